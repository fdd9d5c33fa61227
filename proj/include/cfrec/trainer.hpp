#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "cfrec/evaluator.hpp"
#include "cfrec/loss.hpp"
#include "cfrec/model.hpp"
#include "cfrec/ratings.hpp"
#include "cfrec/sideinfo.hpp"

namespace cfrec {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 30;
  double learning_rate = 0.05;
  double lr_decay = 0.0;  // eta_t = learning_rate / (1 + lr_decay * epoch)
  double momentum = 0.0;  // extension, off by default
  std::uint64_t rng_seed = 42;
  bool shuffle = true;
  LossConfig loss;
  int threads = 0;  // 0: library default
  // Stop after `patience` epochs without validation improvement (0: off).
  std::size_t early_stopping_patience = 0;
  // First epoch index; resumed runs continue the exact schedule of an
  // uninterrupted run because all per-epoch randomness derives from
  // (rng_seed, epoch).
  std::size_t start_epoch = 0;

  void validate() const;
  double learning_rate_at(std::size_t epoch) const {
    return learning_rate / (1.0 + lr_decay * static_cast<double>(epoch));
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_rmse = 0.0;  // NaN when no validation was supplied
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t epochs_completed() const { return epochs.size(); }
};

void write_train_report(const std::string& path, const TrainReport& report);

/// Row visit order for one epoch: a seeded permutation (or the identity
/// when shuffling is off). Each epoch visits every row exactly once.
std::vector<std::uint32_t> epoch_row_order(std::size_t n_rows, std::uint64_t seed,
                                           std::size_t epoch, bool shuffle);

/// Optional per-epoch validation metric (typically RMSE via an estimator).
using ValidationFn = std::function<double(const AutoencoderModel&)>;

/// Minibatch SGD on the masked denoising loss. Row order reshuffles per
/// epoch and corruption masks are regenerated per (epoch, row); both are
/// deterministic functions of (rng_seed, epoch) and independent of the
/// thread count. Throws a numeric error naming epoch and batch if the loss
/// stops being finite.
TrainReport train(AutoencoderModel& model, const SparseRatings& rows, const SideFeatures* side,
                  const TrainConfig& cfg, const ValidationFn& validation = nullptr);

/// Prediction in original rating units from training rows: feed row i,
/// re-add its training bias, clip to the normalized range, denormalize.
/// Rows without training entries fall back to their bias alone.
class AutoencoderEstimator : public RatingEstimator {
 public:
  AutoencoderEstimator(const AutoencoderModel& model, const SparseRatings& train_rows,
                       const SideFeatures* side, const BiasModel& bias, RatingScale scale);

  double predict(std::size_t row, std::uint32_t col) const override;
  void predict_row(std::size_t row, std::span<const std::uint32_t> cols,
                   std::span<double> out) const override;

  /// Feed-forward refinement: prediction for an ad-hoc row that is not part
  /// of the training matrix (e.g. a user's row with freshly added ratings).
  double predict_adhoc(std::span<const RatingEntry> row_entries, double row_bias,
                       std::span<const double> side_vec, std::uint32_t col) const;

 private:
  const AutoencoderModel& model_;
  const SparseRatings& train_rows_;
  const SideFeatures* side_;
  const BiasModel& bias_;
  RatingScale scale_;
};

}  // namespace cfrec
