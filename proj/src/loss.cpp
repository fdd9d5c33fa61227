#include "cfrec/loss.hpp"

#include <sstream>

namespace cfrec {

void LossConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0) throw Error::usage("alpha and beta must be non-negative");
  if (alpha == 0.0 && beta == 0.0) throw Error::usage("alpha and beta cannot both be zero");
  if (mask_ratio < 0.0 || mask_ratio > 1.0) throw Error::usage("mask_ratio must be in [0, 1]");
  if (lambda < 0.0) throw Error::usage("lambda must be non-negative");
}

std::pair<std::vector<RatingEntry>, CorruptionMask> corrupt(std::span<const RatingEntry> row,
                                                            double mask_ratio,
                                                            std::mt19937_64& rng) {
  if (mask_ratio < 0.0 || mask_ratio > 1.0) throw Error::usage("mask_ratio must be in [0, 1]");
  CorruptionMask mask;
  mask.corrupted.assign(row.size(), 0);
  std::vector<RatingEntry> survivors;
  survivors.reserve(row.size());
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t t = 0; t < row.size(); ++t) {
    if (uniform(rng) < mask_ratio) {
      mask.corrupted[t] = 1;
    } else {
      survivors.push_back(row[t]);
    }
  }
  return {std::move(survivors), std::move(mask)};
}

namespace {

void check_mask(std::span<const RatingEntry> target, const CorruptionMask& mask) {
  if (mask.corrupted.size() != target.size()) {
    std::ostringstream os;
    os << "corruption mask covers " << mask.corrupted.size() << " entries, target has "
       << target.size();
    throw Error::usage(os.str());
  }
}

}  // namespace

double loss_data_term(std::span<const double> prediction_at_known,
                      std::span<const RatingEntry> target, const CorruptionMask& mask,
                      const LossConfig& cfg) {
  check_mask(target, mask);
  if (prediction_at_known.size() != target.size()) {
    throw Error::usage("prediction values do not align with the target's known entries");
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < target.size(); ++t) {
    const double err = prediction_at_known[t] - target[t].value;
    acc += (mask.corrupted[t] ? cfg.alpha : cfg.beta) * err * err;
  }
  return acc;
}

double loss(std::span<const double> prediction, std::span<const RatingEntry> target,
            const CorruptionMask& mask, const LossConfig& cfg, const AutoencoderModel* weights) {
  check_mask(target, mask);
  double acc = 0.0;
  for (std::size_t t = 0; t < target.size(); ++t) {
    const double err = prediction[target[t].col] - target[t].value;
    acc += (mask.corrupted[t] ? cfg.alpha : cfg.beta) * err * err;
  }
  if (weights != nullptr) acc += cfg.lambda * weights->weights_squared_norm();
  return acc;
}

std::vector<std::pair<std::uint32_t, double>> loss_gradient(std::span<const double> prediction,
                                                            std::span<const RatingEntry> target,
                                                            const CorruptionMask& mask,
                                                            const LossConfig& cfg) {
  check_mask(target, mask);
  std::vector<std::pair<std::uint32_t, double>> grad;
  grad.reserve(target.size());
  for (std::size_t t = 0; t < target.size(); ++t) {
    const double weight = mask.corrupted[t] ? cfg.alpha : cfg.beta;
    grad.emplace_back(target[t].col,
                      2.0 * weight * (prediction[target[t].col] - target[t].value));
  }
  return grad;
}

void loss_gradient_at_known(std::span<const double> prediction_at_known,
                            std::span<const RatingEntry> target, const CorruptionMask& mask,
                            const LossConfig& cfg, std::span<double> out) {
  check_mask(target, mask);
  for (std::size_t t = 0; t < target.size(); ++t) {
    const double weight = mask.corrupted[t] ? cfg.alpha : cfg.beta;
    out[t] = 2.0 * weight * (prediction_at_known[t] - target[t].value);
  }
}

}  // namespace cfrec
