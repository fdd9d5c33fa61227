#include "cfrec/hypertune.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cfrec {

GenomeSpace GenomeSpace::training_defaults() {
  GenomeSpace space;
  space.genes = {
      {"alpha", 0.8, 1.2},     {"beta", 0.0, 1.0},       {"mask_ratio", 0.0, 1.0},
      {"bottleneck", 500, 700}, {"learning_rate", 0.0, 0.5}, {"lr_decay", 0.0, 0.5},
      {"weight_decay", 0.0, 0.5},
  };
  return space;
}

double GenomeSpace::clamp(std::size_t i, double v) const {
  return std::min(std::max(v, genes[i].lo), genes[i].hi);
}

std::vector<double> GenomeSpace::sample(std::mt19937_64& rng) const {
  std::vector<double> g(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    std::uniform_real_distribution<double> uniform(genes[i].lo, genes[i].hi);
    g[i] = uniform(rng);
  }
  return g;
}

std::pair<Genome, Genome> crossover(const GenomeSpace& space, const Genome& x, const Genome& y) {
  if (x.size() != space.dim() || y.size() != space.dim()) {
    throw Error::usage("crossover genomes do not match the genome space");
  }
  Genome a(space.dim()), b(space.dim());
  for (std::size_t i = 0; i < space.dim(); ++i) {
    a[i] = space.clamp(i, (2.0 * x[i] + y[i]) / 3.0);
    b[i] = space.clamp(i, (x[i] + 2.0 * y[i]) / 3.0);
  }
  return {std::move(a), std::move(b)};
}

double default_mutation_scale(double sigma, std::size_t dim, std::size_t population) {
  // sigma / d^(1/n): the n-th root of the dimension.
  return sigma / std::pow(static_cast<double>(dim), 1.0 / static_cast<double>(population));
}

Genome mutate(const GenomeSpace& space, const Genome& x, double sigma, std::size_t population,
              std::mt19937_64& rng, const MutationScaleFn& scale_fn) {
  if (!(sigma > 0.0)) throw Error::usage("mutation sigma must be positive");
  if (x.size() != space.dim()) throw Error::usage("genome does not match the genome space");
  const double s = scale_fn ? scale_fn(sigma, space.dim(), population)
                            : default_mutation_scale(sigma, space.dim(), population);
  std::normal_distribution<double> gauss(0.0, s);
  Genome out(space.dim());
  for (std::size_t i = 0; i < space.dim(); ++i) out[i] = space.clamp(i, x[i] + gauss(rng));
  return out;
}

void GaConfig::validate() const {
  if (population < 1) throw Error::usage("population must be at least 1");
  if (!(sigma > 0.0)) throw Error::usage("sigma must be positive");
  if (generations < 1) throw Error::usage("generations must be at least 1");
  double sum = 0.0;
  for (double l : lambdas) {
    if (l < 0.0) throw Error::usage("lambda fractions must be non-negative");
    sum += l;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error::usage("lambda fractions must sum to 1");
  }
}

GroupSizes group_sizes(std::size_t population, const std::array<double, 4>& lambdas) {
  GroupSizes g;
  const double n = static_cast<double>(population);
  g.elites = static_cast<std::size_t>(std::floor(n * lambdas[0] + 1e-12));
  const std::size_t pairs = static_cast<std::size_t>(std::floor(n * lambdas[1] / 2.0 + 1e-12));
  g.crossover_children = 2 * pairs;
  g.mutants = static_cast<std::size_t>(std::floor(n * lambdas[2] + 1e-12));
  // Fresh individuals absorb the rounding remainder.
  const std::size_t reserved = std::min(population, g.elites + g.crossover_children + g.mutants);
  g.fresh = population - reserved;
  return g;
}

namespace {

constexpr std::uint64_t kGaTag = 0x6a000000ULL;

std::vector<std::size_t> sorted_ranks(const std::vector<ScoredGenome>& pop) {
  std::vector<std::size_t> ranks(pop.size());
  std::iota(ranks.begin(), ranks.end(), 0u);
  std::stable_sort(ranks.begin(), ranks.end(), [&](std::size_t a, std::size_t b) {
    return pop[a].fitness < pop[b].fitness;
  });
  return ranks;
}

void append_log(const std::string& path, const GenomeSpace& space, std::size_t generation,
                const std::vector<ScoredGenome>& pop, bool write_header) {
  if (path.empty()) return;
  std::ofstream out(path, write_header ? std::ios::trunc : std::ios::app);
  if (!out) throw Error::data("cannot write " + path);
  if (write_header) {
    out << "generation";
    for (const auto& gene : space.genes) out << '\t' << gene.name;
    out << "\tfitness\n";
  }
  char buf[64];
  for (const auto& ind : pop) {
    out << generation;
    // %.17g round-trips doubles exactly; resumed runs must replay bit for bit.
    for (double v : ind.genome) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << '\t' << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", ind.fitness);
    out << '\t' << buf << '\n';
  }
  if (!out) throw Error::data("failed writing " + path);
}

struct ResumeState {
  std::size_t next_generation = 0;
  std::vector<ScoredGenome> population;
  ScoredGenome best;
  std::vector<std::pair<std::size_t, ScoredGenome>> rows;  // complete generations only
  bool any = false;
  bool truncated = false;  // a partial trailing generation was dropped
};

ResumeState load_log(const std::string& path, const GenomeSpace& space, std::size_t population) {
  ResumeState state;
  state.best.fitness = std::numeric_limits<double>::infinity();
  std::ifstream in(path);
  if (!in) return state;
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::pair<std::size_t, ScoredGenome>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> fields;
    while (std::getline(ss, tok, '\t')) fields.push_back(tok);
    if (fields.size() != space.dim() + 2) {
      throw Error::data(path + ":" + std::to_string(line_no) +
                        ": log row does not match the genome space");
    }
    ScoredGenome ind;
    std::size_t gen = std::stoul(fields[0]);
    for (std::size_t i = 0; i < space.dim(); ++i) ind.genome.push_back(std::stod(fields[1 + i]));
    ind.fitness = std::stod(fields.back());
    rows.emplace_back(gen, std::move(ind));
  }
  if (rows.empty()) return state;

  std::size_t last_gen = 0;
  for (const auto& [gen, ind] : rows) last_gen = std::max(last_gen, gen);
  auto count_of = [&](std::size_t g) {
    std::size_t c = 0;
    for (const auto& [gen, ind] : rows) c += (gen == g);
    return c;
  };
  std::size_t last_complete = last_gen;
  if (count_of(last_gen) != population) {
    // Interrupted mid-write: drop the partial generation and redo it.
    if (last_gen == 0 || count_of(last_gen - 1) != population) return state;
    last_complete = last_gen - 1;
    state.truncated = true;
  }

  for (const auto& [gen, ind] : rows) {
    if (gen > last_complete) continue;
    if (ind.fitness < state.best.fitness) state.best = ind;
    if (gen == last_complete) state.population.push_back(ind);
    state.rows.emplace_back(gen, ind);
  }
  state.next_generation = last_complete + 1;
  state.any = true;
  return state;
}

void rewrite_log(const std::string& path, const GenomeSpace& space,
                 const std::vector<std::pair<std::size_t, ScoredGenome>>& rows) {
  append_log(path, space, 0, {}, /*write_header=*/true);
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t gen = rows[i].first;
    std::vector<ScoredGenome> pop;
    while (i < rows.size() && rows[i].first == gen) pop.push_back(rows[i++].second);
    append_log(path, space, gen, pop, /*write_header=*/false);
  }
}

void evaluate_population(std::vector<ScoredGenome>& pop, std::size_t first_new,
                         const FitnessFn& fitness, int workers) {
#ifdef _OPENMP
  if (workers > 0) omp_set_num_threads(workers);
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (std::size_t i = first_new; i < pop.size(); ++i) {
    try {
      pop[i].fitness = fitness(pop[i].genome);
      if (!std::isfinite(pop[i].fitness)) pop[i].fitness = std::numeric_limits<double>::infinity();
    } catch (const std::exception& e) {
      warn(std::string("fitness evaluation failed (") + e.what() +
           "); assigning worst fitness");
      pop[i].fitness = std::numeric_limits<double>::infinity();
    }
  }
}

}  // namespace

GaResult evolve(const GenomeSpace& space, const FitnessFn& fitness, const GaConfig& cfg) {
  cfg.validate();
  if (space.dim() == 0) throw Error::usage("genome space is empty");
  const std::size_t n = cfg.population;

  GaResult result;
  result.best.fitness = std::numeric_limits<double>::infinity();

  std::vector<ScoredGenome> pop;
  std::size_t start_generation = 0;
  bool log_started = false;

  if (cfg.resume && !cfg.log_path.empty() && std::filesystem::exists(cfg.log_path)) {
    ResumeState state = load_log(cfg.log_path, space, n);
    if (state.any) {
      pop = std::move(state.population);
      start_generation = state.next_generation;
      result.best = state.best;
      log_started = true;
      if (state.truncated) rewrite_log(cfg.log_path, space, state.rows);
    }
  }

  if (!log_started && !cfg.log_path.empty()) {
    append_log(cfg.log_path, space, 0, {}, /*write_header=*/true);
    log_started = true;
  }

  if (pop.empty()) {
    std::mt19937_64 rng(mix_seed(cfg.seed, kGaTag, 0));
    pop.resize(n);
    for (auto& ind : pop) ind.genome = space.sample(rng);
    evaluate_population(pop, 0, fitness, cfg.workers);
    append_log(cfg.log_path, space, 0, pop, /*write_header=*/false);
    for (const auto& ind : pop) {
      if (ind.fitness < result.best.fitness) result.best = ind;
    }
    result.generations.push_back(pop);
    start_generation = 1;
  }

  for (std::size_t gen = start_generation; gen < cfg.generations; ++gen) {
    std::mt19937_64 rng(mix_seed(cfg.seed, kGaTag, gen));
    const std::vector<std::size_t> ranks = sorted_ranks(pop);
    const GroupSizes sizes = group_sizes(n, cfg.lambdas);

    std::vector<ScoredGenome> next;
    next.reserve(n);

    // Elites keep their fitness.
    for (std::size_t e = 0; e < sizes.elites; ++e) next.push_back(pop[ranks[e]]);
    const std::size_t first_new = next.size();

    auto random_elite = [&]() -> const Genome& {
      if (sizes.elites == 0) return pop[ranks[0]].genome;
      std::uniform_int_distribution<std::size_t> pick(0, sizes.elites - 1);
      return pop[ranks[pick(rng)]].genome;
    };

    // The next-best individuals each cross with a random elite.
    for (std::size_t p = 0; p < sizes.crossover_children / 2; ++p) {
      const std::size_t rank = std::min(sizes.elites + p, n - 1);
      auto [a, b] = crossover(space, pop[ranks[rank]].genome, random_elite());
      next.push_back({std::move(a), 0.0});
      next.push_back({std::move(b), 0.0});
    }

    for (std::size_t m = 0; m < sizes.mutants; ++m) {
      next.push_back({mutate(space, random_elite(), cfg.sigma, n, rng, cfg.mutation_scale), 0.0});
    }

    while (next.size() < n) next.push_back({space.sample(rng), 0.0});
    if (next.size() > n) next.resize(n);

    evaluate_population(next, first_new, fitness, cfg.workers);
    append_log(cfg.log_path, space, gen, next, /*write_header=*/false);

    pop = std::move(next);
    for (const auto& ind : pop) {
      if (ind.fitness < result.best.fitness) result.best = ind;
    }
    result.generations.push_back(pop);
  }
  return result;
}

}  // namespace cfrec
