#pragma once

#include <optional>
#include <string>

#include "cfrec/config.hpp"
#include "cfrec/evaluator.hpp"
#include "cfrec/hypertune.hpp"
#include "cfrec/ingest.hpp"
#include "cfrec/sideinfo.hpp"
#include "cfrec/trainer.hpp"

namespace cfrec {

/// Everything one experiment needs, resolved from a key=value config file
/// plus command-line overrides.
struct ExperimentConfig {
  // Data sources.
  std::string ratings;
  std::string format;  // "", "dat", "csv", "canonical"
  std::optional<RatingScale> scale;
  Orientation orientation = Orientation::kItemRows;
  std::string genres;
  std::string tags;
  std::string demographics;
  std::size_t pca_components = 50;

  // Splitting.
  double train_fraction = 0.9;
  double validation_fraction = 0.0;  // inner slice of train for per-epoch RMSE

  // Model and training.
  std::size_t bottleneck = 600;
  Transfer hidden_transfer = Transfer::kTanh;
  Transfer output_transfer = Transfer::kIdentity;
  TrainConfig train;

  // Genetic tuning.
  GaConfig ga;
  std::size_t tune_epochs = 0;  // 0: same as train.epochs

  static ExperimentConfig from_config(const KeyValueConfig& kv);
  void apply_genome(const GenomeSpace& space, const Genome& genome);
};

/// Parsed and normalized data with the side-feature blocks requested by the
/// config, still in user-row orientation.
struct Dataset {
  SparseRatings normalized;  // user rows, values in [-1, 1]
  RatingScale scale;
  IdMap users;
  IdMap items;
  std::optional<SideFeatures> user_side;
  std::optional<SideFeatures> item_side;
};
Dataset load_dataset(const ExperimentConfig& cfg);

/// Oriented, split and unbiased tensors ready for training/evaluation.
struct Prepared {
  SparseRatings train;       // oriented, normalized, unbiased
  SparseRatings validation;  // oriented, normalized; empty when unused
  SparseRatings test;        // oriented, normalized
  BiasModel bias;
  RatingScale scale;
  std::optional<SideFeatures> side;            // aligned with rows of `train`
  std::vector<std::uint32_t> row_train_counts;  // per oriented row

  const SideFeatures* side_ptr() const { return side ? &*side : nullptr; }
};

/// Orients the already-split normalized matrices, carves out the inner
/// validation slice, unbiases the training rows, and attaches the side
/// block matching the row entity.
Prepared prepare(const SparseRatings& normalized_train, const SparseRatings& normalized_test,
                 const std::optional<SideFeatures>& user_side,
                 const std::optional<SideFeatures>& item_side, const ExperimentConfig& cfg,
                 const RatingScale& scale);

/// Fresh model per config dims; side width comes from the prepared data.
AutoencoderModel build_model(const Prepared& data, const ExperimentConfig& cfg);

/// Trains with an optional per-epoch validation RMSE hook over
/// data.validation. Returns the report.
TrainReport train_autoencoder(AutoencoderModel& model, const Prepared& data,
                              const ExperimentConfig& cfg);

double test_rmse(const AutoencoderModel& model, const Prepared& data);
double validation_rmse(const AutoencoderModel& model, const Prepared& data);
EvalReport quintile_eval(const AutoencoderModel& model, const Prepared& data);

/// Split at `fraction`, train, return test RMSE: the unit of work for
/// density sweeps and tuning fitness.
double pipeline_rmse(const SparseRatings& normalized, const std::optional<SideFeatures>& user_side,
                     const std::optional<SideFeatures>& item_side, const ExperimentConfig& cfg,
                     const RatingScale& scale, double fraction, std::uint64_t seed);

/// Maps a tuning genome onto a copy of the config and measures fitness as
/// the validation RMSE on a held-out slice of the training split.
double genome_fitness(const SparseRatings& normalized_train,
                      const std::optional<SideFeatures>& user_side,
                      const std::optional<SideFeatures>& item_side, const ExperimentConfig& base,
                      const RatingScale& scale, const GenomeSpace& space, const Genome& genome);

}  // namespace cfrec
