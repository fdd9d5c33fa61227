#pragma once

#include <optional>
#include <string>

#include "cfrec/baselines.hpp"
#include "cfrec/model.hpp"
#include "cfrec/ratings.hpp"

namespace cfrec {

/// Self-contained model snapshot: parameters plus everything evaluation
/// needs (bias model, scale, orientation, training position). Binary,
/// versioned, byte-exact round trip.
struct Checkpoint {
  enum class Kind : std::uint32_t { kAutoencoder = 1, kMatrixFactorization = 2 };

  Kind kind = Kind::kAutoencoder;
  Orientation orientation = Orientation::kUserRows;
  RatingScale scale;
  BiasModel bias;
  std::uint64_t train_seed = 0;
  std::uint64_t epochs_trained = 0;

  std::optional<AutoencoderModel> autoencoder;
  std::optional<MFModel> factors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cfrec
