#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "cfrec/linalg.hpp"
#include "cfrec/ratings.hpp"

namespace cfrec {

enum class Transfer : std::uint8_t { kTanh = 0, kIdentity = 1 };

Transfer transfer_from_name(const std::string& name);
const char* transfer_name(Transfer t);

/// One-bottleneck autoencoder over sparse rating rows. Optional side
/// information of dimension `side_dim` is appended to the input of both the
/// encoder and the decoder, so the decoder learns an explicit per-entity
/// bias term from the features.
struct AutoencoderModel {
  std::size_t input_dim = 0;   // width of the rating input and output
  std::size_t bottleneck = 0;  // hidden width
  std::size_t side_dim = 0;    // feature width, 0 when none
  Transfer hidden_transfer = Transfer::kTanh;
  Transfer output_transfer = Transfer::kIdentity;

  Eigen::MatrixXd encoder_w;  // bottleneck x (input_dim + side_dim)
  Eigen::VectorXd encoder_b;  // bottleneck
  RowMajorMatrix decoder_w;   // input_dim x (bottleneck + side_dim)
  Eigen::VectorXd decoder_b;  // input_dim

  std::size_t parameter_count() const;
  bool finite() const;
  double weights_squared_norm() const {  // weight matrices only, no biases
    return encoder_w.squaredNorm() + decoder_w.squaredNorm();
  }
};

/// Fan-in initialization: every weight uniform in [-1/sqrt(fan_in),
/// +1/sqrt(fan_in)] with fan_in the layer's input width; biases zero.
/// Deterministic per seed. Enforces side_dim < bottleneck < input_dim
/// whenever side information is attached.
AutoencoderModel init_autoencoder(std::size_t input_dim, std::size_t bottleneck,
                                  std::size_t side_dim, std::uint64_t seed,
                                  Transfer hidden_transfer = Transfer::kTanh,
                                  Transfer output_transfer = Transfer::kIdentity);

/// Backprop cache for one sample.
struct ForwardTrace {
  std::vector<RatingEntry> input;            // entries fed to the encoder (post corruption)
  Eigen::VectorXd side;                      // empty when the model has no side input
  Eigen::VectorXd hidden;                    // activations, length bottleneck
  std::vector<std::uint32_t> output_indices; // where outputs were computed
  Eigen::VectorXd outputs;                   // activations at output_indices
};

/// Dense prediction for one sparse row. Unknown inputs contribute exactly
/// zero: only the stored entries are touched.
Eigen::VectorXd forward(const AutoencoderModel& model, std::span<const RatingEntry> row,
                        std::span<const double> side = {});

/// Dense-input variant with an explicit known mask; values at positions
/// where known[j] == 0 are never read.
Eigen::VectorXd forward_masked(const AutoencoderModel& model, std::span<const double> values,
                               std::span<const std::uint8_t> known,
                               std::span<const double> side = {});

/// Training-path forward producing outputs only at `output_indices`
/// (sparsity is an optimization: values agree with forward() exactly).
ForwardTrace forward_training(const AutoencoderModel& model, std::span<const RatingEntry> input,
                              std::span<const double> side,
                              std::vector<std::uint32_t> output_indices);

struct Gradients {
  Eigen::MatrixXd encoder_w;
  Eigen::VectorXd encoder_b;
  RowMajorMatrix decoder_w;
  Eigen::VectorXd decoder_b;

  void resize_zero(const AutoencoderModel& model);
};

/// Accumulates dL/dtheta for one sample into `grads`. `output_gradient`
/// holds dL/d(prediction) aligned with trace.output_indices; contributions
/// flow only through those indices.
void accumulate_backward(const AutoencoderModel& model, const ForwardTrace& trace,
                         std::span<const double> output_gradient, Gradients& grads);

/// In-place SGD touch: theta -= step * dL/dtheta for one sample, without
/// materializing the dense gradient. Must match accumulate_backward exactly.
void apply_backward_sgd(AutoencoderModel& model, const ForwardTrace& trace,
                        std::span<const double> output_gradient, double step);

/// Explicit factorization of a linear model: prediction(row) =
/// factor * code(row) with factor = [decoder_codes | I_N] and
/// code = [hidden(row); decoder_b]. Analysis oracle; requires identity
/// transfers and no side information.
struct LinearDecomposition {
  Eigen::MatrixXd factor;  // input_dim x (bottleneck + input_dim)
};
LinearDecomposition decompose_linear(const AutoencoderModel& model);
Eigen::VectorXd linear_code(const AutoencoderModel& model, std::span<const RatingEntry> row);

}  // namespace cfrec
