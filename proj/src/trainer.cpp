#include "cfrec/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cfrec {

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error::usage("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw Error::usage("learning_rate must be positive");
  if (lr_decay < 0.0) throw Error::usage("lr_decay must be non-negative");
  if (momentum < 0.0 || momentum >= 1.0) throw Error::usage("momentum must be in [0, 1)");
  loss.validate();
}

void write_train_report(const std::string& path, const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw Error::data("cannot write " + path);
  out << "epoch\tloss\tval_rmse\tseconds\n";
  char buf[128];
  for (const auto& e : report.epochs) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.8f\t%.6f\t%.3f\n", e.epoch, e.train_loss,
                  e.validation_rmse, e.seconds);
    out << buf;
  }
  if (!out) throw Error::data("failed writing " + path);
}

namespace {

constexpr std::uint64_t kShuffleTag = 0x1000000000ULL;
constexpr std::uint64_t kCorruptTag = 0x2000000000ULL;

// Everything the serial update pass needs from one sample, computed at the
// pre-batch parameters.
struct SampleWork {
  ForwardTrace trace;
  std::vector<double> output_grad;  // aligned with trace.output_indices
  double data_loss = 0.0;           // divided by |known| when configured
  double grad_scale = 1.0;          // per-sample normalization folded into the step
  bool skip = true;
};

void scale_in_place(Gradients& g, double s) {
  g.encoder_w *= s;
  g.encoder_b *= s;
  g.decoder_w *= s;
  g.decoder_b *= s;
}

}  // namespace

std::vector<std::uint32_t> epoch_row_order(std::size_t n_rows, std::uint64_t seed,
                                           std::size_t epoch, bool shuffle) {
  std::vector<std::uint32_t> order(n_rows);
  std::iota(order.begin(), order.end(), 0u);
  if (!shuffle) return order;
  // Fisher-Yates with a per-epoch derived generator.
  std::mt19937_64 rng(mix_seed(seed, kShuffleTag + epoch, 0));
  for (std::size_t i = n_rows; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

TrainReport train(AutoencoderModel& model, const SparseRatings& rows, const SideFeatures* side,
                  const TrainConfig& cfg, const ValidationFn& validation) {
  cfg.validate();
  if (rows.cols() != model.input_dim) {
    std::ostringstream os;
    os << "training rows have dimension " << rows.cols() << ", model expects "
       << model.input_dim;
    throw Error::usage(os.str());
  }
  if (model.side_dim > 0) {
    if (side == nullptr) throw Error::usage("model expects side information but none was given");
    if (side->n_entities() != rows.rows() || side->dim() != model.side_dim) {
      throw Error::usage("side feature shape does not match the training rows and model");
    }
  }

#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif

  const std::size_t n_rows = rows.rows();
  const bool has_side = model.side_dim > 0;

  const bool use_momentum = cfg.momentum > 0.0;
  Gradients velocity, batch_grad;
  if (use_momentum) {
    velocity.resize_zero(model);
    batch_grad.resize_zero(model);
  }

  TrainReport report;
  double best_validation = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;

  std::vector<SampleWork> work(cfg.batch_size);

  for (std::size_t epoch = cfg.start_epoch; epoch < cfg.start_epoch + cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double eta = cfg.learning_rate_at(epoch);
    const std::vector<std::uint32_t> order =
        epoch_row_order(n_rows, cfg.rng_seed, epoch, cfg.shuffle);

    double epoch_data_loss = 0.0;
    std::size_t epoch_batches = 0;

    for (std::size_t batch_start = 0; batch_start < n_rows; batch_start += cfg.batch_size) {
      const std::size_t batch_n = std::min(cfg.batch_size, n_rows - batch_start);
      std::exception_ptr worker_error;

      // Parallel phase: per-sample forward and output gradients at the
      // current parameters. Results land in per-sample slots, so the outcome
      // is independent of scheduling.
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
      for (std::size_t b = 0; b < batch_n; ++b) {
        SampleWork& s = work[b];
        s.skip = true;
        try {
          const std::uint32_t r = order[batch_start + b];
          auto target = rows.row(r);
          if (target.empty()) continue;

          std::mt19937_64 corruption_rng(mix_seed(cfg.rng_seed, kCorruptTag + epoch, r));
          auto [survivors, mask] = corrupt(target, cfg.loss.mask_ratio, corruption_rng);

          std::span<const double> side_vec;
          if (has_side) {
            side_vec = std::span<const double>(
                side->values.row(static_cast<Eigen::Index>(r)).data(), model.side_dim);
          }
          std::vector<std::uint32_t> out_idx(target.size());
          for (std::size_t t = 0; t < target.size(); ++t) out_idx[t] = target[t].col;

          s.trace = forward_training(model, survivors, side_vec, std::move(out_idx));
          std::span<const double> outputs(s.trace.outputs.data(), target.size());
          s.output_grad.resize(target.size());
          loss_gradient_at_known(outputs, target, mask, cfg.loss, s.output_grad);
          s.data_loss = loss_data_term(outputs, target, mask, cfg.loss);
          s.grad_scale = cfg.loss.normalize_by_known
                             ? 1.0 / static_cast<double>(target.size())
                             : 1.0;
          s.data_loss *= s.grad_scale;
          s.skip = false;
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
          if (!worker_error) worker_error = std::current_exception();
        }
      }
      if (worker_error) std::rethrow_exception(worker_error);

      // Serial phase: one well-defined application order regardless of the
      // thread count; all gradients were taken at the pre-update parameters.
      double batch_loss = 0.0;
      std::size_t batch_samples = 0;
      if (use_momentum) scale_in_place(batch_grad, 0.0);
      for (std::size_t b = 0; b < batch_n; ++b) {
        SampleWork& s = work[b];
        if (s.skip) continue;
        batch_loss += s.data_loss;
        ++batch_samples;
        const double sample_weight = s.grad_scale / static_cast<double>(batch_n);
        if (use_momentum) {
          for (double& g : s.output_grad) g *= sample_weight;
          accumulate_backward(model, s.trace, s.output_grad, batch_grad);
        } else {
          apply_backward_sgd(model, s.trace, s.output_grad, eta * sample_weight);
        }
      }
      if (use_momentum && batch_samples > 0) {
        scale_in_place(velocity, cfg.momentum);
        velocity.encoder_w += batch_grad.encoder_w;
        velocity.encoder_b += batch_grad.encoder_b;
        velocity.decoder_w += batch_grad.decoder_w;
        velocity.decoder_b += batch_grad.decoder_b;
        model.encoder_w -= eta * velocity.encoder_w;
        model.encoder_b -= eta * velocity.encoder_b;
        model.decoder_w -= eta * velocity.decoder_w;
        model.decoder_b -= eta * velocity.decoder_b;
      }

      // Weight decay once per batch at the parameter level (2*lambda*W,
      // weight matrices only).
      if (cfg.loss.lambda > 0.0) {
        const double shrink = 1.0 - 2.0 * eta * cfg.loss.lambda;
        if (shrink <= 0.0) {
          throw Error::numeric("weight decay step overshoots: decrease learning_rate or lambda");
        }
        model.encoder_w *= shrink;
        model.decoder_w *= shrink;
      }

      if (batch_samples > 0) {
        const double mean_loss = batch_loss / static_cast<double>(batch_samples);
        if (!std::isfinite(mean_loss)) {
          std::ostringstream os;
          os << "training diverged: non-finite loss at epoch " << epoch << ", batch "
             << epoch_batches;
          throw Error::numeric(os.str());
        }
        epoch_data_loss += mean_loss;
        ++epoch_batches;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss =
        (epoch_batches > 0 ? epoch_data_loss / static_cast<double>(epoch_batches) : 0.0) +
        cfg.loss.lambda * model.weights_squared_norm();
    rec.validation_rmse = std::numeric_limits<double>::quiet_NaN();
    if (validation) rec.validation_rmse = validation(model);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(rec);

    if (validation && cfg.early_stopping_patience > 0) {
      if (rec.validation_rmse < best_validation - 1e-12) {
        best_validation = rec.validation_rmse;
        epochs_since_best = 0;
      } else if (++epochs_since_best >= cfg.early_stopping_patience) {
        break;
      }
    }
  }
  return report;
}

AutoencoderEstimator::AutoencoderEstimator(const AutoencoderModel& model,
                                           const SparseRatings& train_rows,
                                           const SideFeatures* side, const BiasModel& bias,
                                           RatingScale scale)
    : model_(model), train_rows_(train_rows), side_(side), bias_(bias), scale_(scale) {
  if (train_rows.cols() != model.input_dim) {
    throw Error::usage("training rows do not match the model input dimension");
  }
  if (model.side_dim > 0 &&
      (side == nullptr || side->n_entities() != train_rows.rows() ||
       side->dim() != model.side_dim)) {
    throw Error::usage("side feature shape does not match the model");
  }
}

double AutoencoderEstimator::predict(std::size_t row, std::uint32_t col) const {
  std::uint32_t cols[1] = {col};
  double out[1];
  predict_row(row, cols, out);
  return out[0];
}

void AutoencoderEstimator::predict_row(std::size_t row, std::span<const std::uint32_t> cols,
                                       std::span<double> out) const {
  if (row >= train_rows_.rows()) throw Error::usage("estimator row index out of range");
  auto entries = train_rows_.row(row);
  const double row_bias = bias_.bias_for(row);

  // Cold row: no training entries to feed; the bias fallback alone decides.
  if (entries.empty()) {
    const double value = scale_.from_unit(std::clamp(row_bias, -1.0, 1.0));
    for (std::size_t t = 0; t < cols.size(); ++t) out[t] = value;
    return;
  }

  std::span<const double> side_vec;
  if (model_.side_dim > 0) {
    side_vec = std::span<const double>(side_->values.row(static_cast<Eigen::Index>(row)).data(),
                                       model_.side_dim);
  }
  for (std::size_t t = 0; t < cols.size(); ++t) {
    if (cols[t] >= model_.input_dim) throw Error::usage("estimator column index out of range");
  }
  std::vector<std::uint32_t> idx(cols.begin(), cols.end());
  ForwardTrace trace = forward_training(model_, entries, side_vec, std::move(idx));
  for (std::size_t t = 0; t < cols.size(); ++t) {
    out[t] = scale_.from_unit(
        std::clamp(trace.outputs[static_cast<Eigen::Index>(t)] + row_bias, -1.0, 1.0));
  }
}

double AutoencoderEstimator::predict_adhoc(std::span<const RatingEntry> row_entries,
                                           double row_bias, std::span<const double> side_vec,
                                           std::uint32_t col) const {
  if (row_entries.empty()) return scale_.from_unit(std::clamp(row_bias, -1.0, 1.0));
  std::vector<std::uint32_t> idx = {col};
  ForwardTrace trace = forward_training(model_, row_entries, side_vec, std::move(idx));
  return scale_.from_unit(std::clamp(trace.outputs[0] + row_bias, -1.0, 1.0));
}

}  // namespace cfrec
