#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cfrec/common.hpp"

namespace cfrec {

struct Gene {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
};

/// Legal intervals for each tuned hyperparameter, with uniform priors.
struct GenomeSpace {
  std::vector<Gene> genes;

  /// The seven training knobs: alpha, beta, mask ratio, bottleneck size,
  /// learning rate, learning rate decay, weight decay.
  static GenomeSpace training_defaults();

  std::size_t dim() const { return genes.size(); }
  double clamp(std::size_t i, double v) const;
  std::vector<double> sample(std::mt19937_64& rng) const;
};

using Genome = std::vector<double>;

/// Componentwise affine blends 2/3*x + 1/3*y and 1/3*x + 2/3*y, clamped to
/// the legal intervals.
std::pair<Genome, Genome> crossover(const GenomeSpace& space, const Genome& x, const Genome& y);

/// Scale of the isotropic mutation: sigma / d^(1/n) with d the genome
/// dimension and n the population size. Pluggable because the exponent
/// convention is a policy choice.
using MutationScaleFn = std::function<double(double sigma, std::size_t dim, std::size_t population)>;
double default_mutation_scale(double sigma, std::size_t dim, std::size_t population);

/// Adds N(0, s^2) to every gene, clamped to the legal interval.
Genome mutate(const GenomeSpace& space, const Genome& x, double sigma, std::size_t population,
              std::mt19937_64& rng, const MutationScaleFn& scale_fn = nullptr);

struct GaConfig {
  std::size_t population = 20;
  double sigma = 0.08;
  // Fractions for elites, crossover children, mutants and fresh samples.
  std::array<double, 4> lambdas = {0.1, 0.2, 0.3, 0.4};
  std::size_t generations = 10;  // total populations evaluated, including the initial one
  std::uint64_t seed = 0;
  int workers = 1;               // concurrent fitness evaluations
  std::string log_path;          // optional TSV log; enables resuming
  bool resume = false;
  MutationScaleFn mutation_scale;  // optional override

  void validate() const;
};

struct GroupSizes {
  std::size_t elites = 0;
  std::size_t crossover_children = 0;
  std::size_t mutants = 0;
  std::size_t fresh = 0;  // includes the rounding remainder
};
GroupSizes group_sizes(std::size_t population, const std::array<double, 4>& lambdas);

struct ScoredGenome {
  Genome genome;
  double fitness = 0.0;  // lower is better; +inf marks a failed evaluation
};

struct GaResult {
  ScoredGenome best;
  std::vector<std::vector<ScoredGenome>> generations;
};

/// Lower is better. Throwing marks the genome with worst fitness.
using FitnessFn = std::function<double(const Genome&)>;

/// Per generation: copy the elites, cross the next-best with random elites,
/// mutate random elites, sample fresh genomes from the priors; evaluate
/// everything new. Per-generation randomness derives from (seed,
/// generation), so resumed runs replay an uninterrupted run exactly.
GaResult evolve(const GenomeSpace& space, const FitnessFn& fitness, const GaConfig& cfg);

}  // namespace cfrec
