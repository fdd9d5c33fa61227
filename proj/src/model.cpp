#include "cfrec/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace cfrec {

namespace {

inline double activate(Transfer t, double z) {
  return t == Transfer::kTanh ? std::tanh(z) : z;
}

// Derivative expressed through the activation value (tanh' = 1 - a^2).
inline double activation_derivative(Transfer t, double a) {
  return t == Transfer::kTanh ? 1.0 - a * a : 1.0;
}

void check_side(const AutoencoderModel& model, std::span<const double> side) {
  if (side.size() != model.side_dim) {
    std::ostringstream os;
    os << "side vector has dimension " << side.size() << ", model expects " << model.side_dim;
    throw Error::usage(os.str());
  }
}

// Encoder pre-activation from known entries and side features only.
Eigen::VectorXd encode(const AutoencoderModel& model, std::span<const RatingEntry> input,
                       std::span<const double> side) {
  Eigen::VectorXd z = model.encoder_b;
  for (const auto& e : input) {
    if (e.col >= model.input_dim) throw Error::usage("input index outside model input_dim");
    if (e.value != 0.0) z.noalias() += model.encoder_w.col(e.col) * e.value;
  }
  for (std::size_t p = 0; p < model.side_dim; ++p) {
    if (side[p] != 0.0) {
      z.noalias() += model.encoder_w.col(static_cast<Eigen::Index>(model.input_dim + p)) * side[p];
    }
  }
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = activate(model.hidden_transfer, z[i]);
  if (!z.allFinite()) throw Error::numeric("non-finite hidden activation (divergence)");
  return z;
}

inline double decode_one(const AutoencoderModel& model, const Eigen::VectorXd& hidden,
                         std::span<const double> side, std::uint32_t j) {
  const Eigen::Index k = static_cast<Eigen::Index>(model.bottleneck);
  double z = model.decoder_b[j] + model.decoder_w.row(j).head(k).dot(hidden);
  for (std::size_t p = 0; p < model.side_dim; ++p) {
    z += model.decoder_w(j, k + static_cast<Eigen::Index>(p)) * side[p];
  }
  return activate(model.output_transfer, z);
}

}  // namespace

Transfer transfer_from_name(const std::string& name) {
  if (name == "tanh") return Transfer::kTanh;
  if (name == "identity" || name == "linear") return Transfer::kIdentity;
  throw Error::usage("unknown transfer '" + name + "' (expected tanh or identity)");
}

const char* transfer_name(Transfer t) {
  return t == Transfer::kTanh ? "tanh" : "identity";
}

std::size_t AutoencoderModel::parameter_count() const {
  return static_cast<std::size_t>(encoder_w.size() + encoder_b.size() + decoder_w.size() +
                                  decoder_b.size());
}

bool AutoencoderModel::finite() const {
  return encoder_w.allFinite() && encoder_b.allFinite() && decoder_w.allFinite() &&
         decoder_b.allFinite();
}

AutoencoderModel init_autoencoder(std::size_t input_dim, std::size_t bottleneck,
                                  std::size_t side_dim, std::uint64_t seed,
                                  Transfer hidden_transfer, Transfer output_transfer) {
  if (input_dim == 0 || bottleneck == 0) {
    throw Error::usage("autoencoder needs input_dim >= 1 and bottleneck >= 1");
  }
  if (side_dim > 0 && !(side_dim < bottleneck && bottleneck < input_dim)) {
    std::ostringstream os;
    os << "side information requires side_dim < bottleneck < input_dim, got P=" << side_dim
       << ", k=" << bottleneck << ", N=" << input_dim;
    throw Error::usage(os.str());
  }

  AutoencoderModel model;
  model.input_dim = input_dim;
  model.bottleneck = bottleneck;
  model.side_dim = side_dim;
  model.hidden_transfer = hidden_transfer;
  model.output_transfer = output_transfer;

  std::mt19937_64 rng(seed);
  auto fill_fan_in = [&rng](auto& mat, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    for (Eigen::Index r = 0; r < mat.rows(); ++r)
      for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = uniform(rng);
  };

  model.encoder_w.resize(static_cast<Eigen::Index>(bottleneck),
                         static_cast<Eigen::Index>(input_dim + side_dim));
  fill_fan_in(model.encoder_w, input_dim + side_dim);
  model.encoder_b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(bottleneck));

  model.decoder_w.resize(static_cast<Eigen::Index>(input_dim),
                         static_cast<Eigen::Index>(bottleneck + side_dim));
  fill_fan_in(model.decoder_w, bottleneck + side_dim);
  model.decoder_b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_dim));
  return model;
}

Eigen::VectorXd forward(const AutoencoderModel& model, std::span<const RatingEntry> row,
                        std::span<const double> side) {
  check_side(model, side);
  Eigen::VectorXd hidden = encode(model, row, side);
  Eigen::VectorXd out(static_cast<Eigen::Index>(model.input_dim));
  for (std::size_t j = 0; j < model.input_dim; ++j) {
    out[static_cast<Eigen::Index>(j)] =
        decode_one(model, hidden, side, static_cast<std::uint32_t>(j));
  }
  if (!out.allFinite()) throw Error::numeric("non-finite output activation (divergence)");
  return out;
}

Eigen::VectorXd forward_masked(const AutoencoderModel& model, std::span<const double> values,
                               std::span<const std::uint8_t> known,
                               std::span<const double> side) {
  if (values.size() != model.input_dim || known.size() != model.input_dim) {
    throw Error::usage("dense input length does not match model input_dim");
  }
  std::vector<RatingEntry> entries;
  for (std::size_t j = 0; j < known.size(); ++j) {
    if (known[j]) entries.push_back({static_cast<std::uint32_t>(j), values[j]});
  }
  return forward(model, entries, side);
}

ForwardTrace forward_training(const AutoencoderModel& model, std::span<const RatingEntry> input,
                              std::span<const double> side,
                              std::vector<std::uint32_t> output_indices) {
  check_side(model, side);
  ForwardTrace trace;
  trace.input.assign(input.begin(), input.end());
  trace.side.resize(static_cast<Eigen::Index>(side.size()));
  for (std::size_t p = 0; p < side.size(); ++p) trace.side[static_cast<Eigen::Index>(p)] = side[p];
  trace.hidden = encode(model, input, side);
  trace.output_indices = std::move(output_indices);
  trace.outputs.resize(static_cast<Eigen::Index>(trace.output_indices.size()));
  for (std::size_t t = 0; t < trace.output_indices.size(); ++t) {
    trace.outputs[static_cast<Eigen::Index>(t)] =
        decode_one(model, trace.hidden, side, trace.output_indices[t]);
  }
  if (!trace.outputs.allFinite()) throw Error::numeric("non-finite output activation (divergence)");
  return trace;
}

void Gradients::resize_zero(const AutoencoderModel& model) {
  encoder_w = Eigen::MatrixXd::Zero(model.encoder_w.rows(), model.encoder_w.cols());
  encoder_b = Eigen::VectorXd::Zero(model.encoder_b.size());
  decoder_w = RowMajorMatrix::Zero(model.decoder_w.rows(), model.decoder_w.cols());
  decoder_b = Eigen::VectorXd::Zero(model.decoder_b.size());
}

namespace {

// Shared backprop skeleton. `touch_*` receive the per-parameter gradient
// contributions; accumulation and direct SGD application both route through
// here so the two paths cannot drift apart.
template <typename TouchDecRow, typename TouchDecBias, typename TouchEncCol, typename TouchEncSide,
          typename TouchEncBias>
void backward_visit(const AutoencoderModel& model, const ForwardTrace& trace,
                    std::span<const double> output_gradient, TouchDecRow&& touch_dec_row,
                    TouchDecBias&& touch_dec_bias, TouchEncCol&& touch_enc_col,
                    TouchEncSide&& touch_enc_side, TouchEncBias&& touch_enc_bias) {
  if (output_gradient.size() != trace.output_indices.size()) {
    throw Error::usage("output gradient length does not match trace output indices");
  }
  const Eigen::Index k = static_cast<Eigen::Index>(model.bottleneck);

  // Decoder touches and the gradient reaching the hidden activations.
  Eigen::VectorXd hidden_grad = Eigen::VectorXd::Zero(k);
  for (std::size_t t = 0; t < trace.output_indices.size(); ++t) {
    const std::uint32_t j = trace.output_indices[t];
    const double gz = output_gradient[t] *
                      activation_derivative(model.output_transfer,
                                            trace.outputs[static_cast<Eigen::Index>(t)]);
    if (gz == 0.0) continue;
    hidden_grad.noalias() += model.decoder_w.row(j).head(k).transpose() * gz;
    touch_dec_row(j, gz);
    touch_dec_bias(j, gz);
  }

  // Through the hidden nonlinearity.
  for (Eigen::Index i = 0; i < hidden_grad.size(); ++i) {
    hidden_grad[i] *= activation_derivative(model.hidden_transfer, trace.hidden[i]);
  }

  // Encoder touches: rating columns for surviving input entries, side
  // columns, and the bias.
  for (const auto& e : trace.input) {
    if (e.value != 0.0) touch_enc_col(e.col, e.value, hidden_grad);
  }
  if (model.side_dim > 0) touch_enc_side(hidden_grad);
  touch_enc_bias(hidden_grad);
}

}  // namespace

void accumulate_backward(const AutoencoderModel& model, const ForwardTrace& trace,
                         std::span<const double> output_gradient, Gradients& grads) {
  const Eigen::Index k = static_cast<Eigen::Index>(model.bottleneck);
  const Eigen::Index p = static_cast<Eigen::Index>(model.side_dim);
  backward_visit(
      model, trace, output_gradient,
      [&](std::uint32_t j, double gz) {
        grads.decoder_w.row(j).head(k).noalias() += gz * trace.hidden.transpose();
        if (p > 0) grads.decoder_w.row(j).segment(k, p).noalias() += gz * trace.side.transpose();
      },
      [&](std::uint32_t j, double gz) { grads.decoder_b[j] += gz; },
      [&](std::uint32_t col, double value, const Eigen::VectorXd& hg) {
        grads.encoder_w.col(col).noalias() += hg * value;
      },
      [&](const Eigen::VectorXd& hg) {
        grads.encoder_w.rightCols(p).noalias() += hg * trace.side.transpose();
      },
      [&](const Eigen::VectorXd& hg) { grads.encoder_b += hg; });
}

void apply_backward_sgd(AutoencoderModel& model, const ForwardTrace& trace,
                        std::span<const double> output_gradient, double step) {
  const Eigen::Index k = static_cast<Eigen::Index>(model.bottleneck);
  const Eigen::Index p = static_cast<Eigen::Index>(model.side_dim);
  // Decoder rows are read inside backward_visit before any touch mutates
  // them: hidden_grad accumulation uses the pre-update row because each row
  // j appears at most once per sample (output indices are unique).
  backward_visit(
      model, trace, output_gradient,
      [&](std::uint32_t j, double gz) {
        model.decoder_w.row(j).head(k).noalias() -= (step * gz) * trace.hidden.transpose();
        if (p > 0) {
          model.decoder_w.row(j).segment(k, p).noalias() -= (step * gz) * trace.side.transpose();
        }
      },
      [&](std::uint32_t j, double gz) { model.decoder_b[j] -= step * gz; },
      [&](std::uint32_t col, double value, const Eigen::VectorXd& hg) {
        model.encoder_w.col(col).noalias() -= (step * value) * hg;
      },
      [&](const Eigen::VectorXd& hg) {
        model.encoder_w.rightCols(p).noalias() -= step * hg * trace.side.transpose();
      },
      [&](const Eigen::VectorXd& hg) { model.encoder_b -= step * hg; });
}

LinearDecomposition decompose_linear(const AutoencoderModel& model) {
  if (model.side_dim != 0) {
    throw Error::usage("linear decomposition is defined for models without side information");
  }
  if (model.hidden_transfer != Transfer::kIdentity ||
      model.output_transfer != Transfer::kIdentity) {
    throw Error::usage("linear decomposition requires identity transfers");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(model.input_dim);
  const Eigen::Index k = static_cast<Eigen::Index>(model.bottleneck);
  LinearDecomposition dec;
  dec.factor.resize(n, k + n);
  dec.factor.leftCols(k) = model.decoder_w.leftCols(k);
  dec.factor.rightCols(n) = Eigen::MatrixXd::Identity(n, n);
  return dec;
}

Eigen::VectorXd linear_code(const AutoencoderModel& model, std::span<const RatingEntry> row) {
  if (model.side_dim != 0 || model.hidden_transfer != Transfer::kIdentity ||
      model.output_transfer != Transfer::kIdentity) {
    throw Error::usage("linear codes require an identity-transfer model without side information");
  }
  Eigen::VectorXd code(static_cast<Eigen::Index>(model.bottleneck + model.input_dim));
  code.head(static_cast<Eigen::Index>(model.bottleneck)) = encode(model, row, {});
  code.tail(static_cast<Eigen::Index>(model.input_dim)) = model.decoder_b;
  return code;
}

}  // namespace cfrec
