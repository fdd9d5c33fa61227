#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cfrec/model.hpp"
#include "cfrec/ratings.hpp"

namespace cfrec {

/// Reweighted denoising loss. `alpha` weighs squared error on entries the
/// corruption zeroed out (prediction), `beta` on the entries left intact
/// (reconstruction). Indices never observed contribute nothing.
struct LossConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double mask_ratio = 0.25;
  double lambda = 0.0;  // L2 over weight matrices, biases excluded
  // Divide each sample's data term by its known-entry count before batch
  // averaging, so heavily rated rows do not dominate.
  bool normalize_by_known = true;

  void validate() const;
};

/// Flags aligned with the known entries of one row; flag set means the
/// entry was zeroed in the corrupted input.
struct CorruptionMask {
  std::vector<std::uint8_t> corrupted;

  std::size_t count() const {
    std::size_t n = 0;
    for (auto c : corrupted) n += c;
    return n;
  }
};

/// Independently zeroes each known entry with probability mask_ratio.
/// Returns the surviving entries (the corrupted input) and the mask.
std::pair<std::vector<RatingEntry>, CorruptionMask> corrupt(std::span<const RatingEntry> row,
                                                            double mask_ratio,
                                                            std::mt19937_64& rng);

/// alpha * sum over corrupted known entries of squared error
/// + beta * sum over intact known entries of squared error
/// + lambda * ||W||_F^2 (when a model is supplied).
double loss(std::span<const double> prediction, std::span<const RatingEntry> target,
            const CorruptionMask& mask, const LossConfig& cfg,
            const AutoencoderModel* weights = nullptr);

/// Data-term value from predictions aligned with the target's known
/// entries (training path; no dense prediction materialized).
double loss_data_term(std::span<const double> prediction_at_known,
                      std::span<const RatingEntry> target, const CorruptionMask& mask,
                      const LossConfig& cfg);

/// d(loss)/d(prediction): 2*alpha*(pred - x) on corrupted known entries,
/// 2*beta*(pred - x) on intact known entries, zero elsewhere. Returned
/// sparse as (index, value); the weight-decay gradient is applied at the
/// parameter level by the trainer, not here.
std::vector<std::pair<std::uint32_t, double>> loss_gradient(std::span<const double> prediction,
                                                            std::span<const RatingEntry> target,
                                                            const CorruptionMask& mask,
                                                            const LossConfig& cfg);

/// Gradient aligned with the known entries (training path).
void loss_gradient_at_known(std::span<const double> prediction_at_known,
                            std::span<const RatingEntry> target, const CorruptionMask& mask,
                            const LossConfig& cfg, std::span<double> out);

}  // namespace cfrec
