#include "cfrec/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace cfrec {

namespace {

constexpr std::uint64_t kValidationSplitTag = 0x7a11dULL;

Orientation orientation_from_string(const std::string& s) {
  if (s == "user" || s == "u" || s == "user-rows" || s == "u-cfn") return Orientation::kUserRows;
  if (s == "item" || s == "v" || s == "item-rows" || s == "v-cfn") return Orientation::kItemRows;
  throw Error::usage("unknown orientation '" + s + "' (expected user or item)");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& kv) {
  ExperimentConfig cfg;
  cfg.ratings = kv.get_string("ratings", "");
  cfg.format = kv.get_string("format", "");
  if (kv.has("scale")) {
    auto parts = kv.get_doubles("scale");
    if (parts.size() != 2) throw Error::usage("scale expects `min,max`");
    cfg.scale = RatingScale{parts[0], parts[1]};
    if (!cfg.scale->valid()) throw Error::usage("scale expects min < max");
  }
  cfg.orientation = orientation_from_string(kv.get_string("orientation", "item"));
  cfg.genres = kv.get_string("genres", "");
  cfg.tags = kv.get_string("tags", "");
  cfg.demographics = kv.get_string("demographics", "");
  cfg.pca_components = kv.get_size("pca_components", 50);

  cfg.train_fraction = kv.get_double("train_fraction", 0.9);
  cfg.validation_fraction = kv.get_double("validation_fraction", 0.0);

  cfg.bottleneck = kv.get_size("bottleneck", 600);
  cfg.hidden_transfer = transfer_from_name(kv.get_string("hidden_transfer", "tanh"));
  cfg.output_transfer = transfer_from_name(kv.get_string("output_transfer", "identity"));

  const std::string corruption = kv.get_string("corruption", "masking");
  if (corruption == "gaussian") {
    throw Error::usage("gaussian corruption is reserved but not implemented; use masking");
  }
  if (corruption != "masking") throw Error::usage("unknown corruption '" + corruption + "'");

  cfg.train.epochs = kv.get_size("epochs", 30);
  cfg.train.batch_size = kv.get_size("batch_size", 30);
  cfg.train.learning_rate = kv.get_double("learning_rate", 0.05);
  cfg.train.lr_decay = kv.get_double("lr_decay", 0.0);
  cfg.train.momentum = kv.get_double("momentum", 0.0);
  cfg.train.rng_seed = kv.get_size("seed", 42);
  cfg.train.shuffle = kv.get_bool("shuffle", true);
  cfg.train.early_stopping_patience = kv.get_size("early_stopping_patience", 0);
  cfg.train.loss.alpha = kv.get_double("alpha", 1.0);
  cfg.train.loss.beta = kv.get_double("beta", 1.0);
  cfg.train.loss.mask_ratio = kv.get_double("mask_ratio", 0.25);
  cfg.train.loss.lambda = kv.get_double("weight_decay", 0.0);
  cfg.train.loss.normalize_by_known = kv.get_bool("normalize_loss", true);

  cfg.ga.population = kv.get_size("population", 20);
  cfg.ga.sigma = kv.get_double("ga_sigma", 0.08);
  if (kv.has("ga_lambdas")) {
    auto ls = kv.get_doubles("ga_lambdas");
    if (ls.size() != 4) throw Error::usage("ga_lambdas expects four comma-separated fractions");
    std::copy(ls.begin(), ls.end(), cfg.ga.lambdas.begin());
  }
  cfg.ga.generations = kv.get_size("generations", 10);
  cfg.ga.seed = kv.get_size("seed", 42);
  cfg.ga.workers = static_cast<int>(kv.get_size("tune_workers", 1));
  cfg.tune_epochs = kv.get_size("tune_epochs", 0);
  return cfg;
}

void ExperimentConfig::apply_genome(const GenomeSpace& space, const Genome& genome) {
  if (genome.size() != space.dim()) throw Error::usage("genome does not match the genome space");
  for (std::size_t i = 0; i < space.dim(); ++i) {
    const std::string& name = space.genes[i].name;
    const double v = genome[i];
    if (name == "alpha") {
      train.loss.alpha = v;
    } else if (name == "beta") {
      train.loss.beta = v;
    } else if (name == "mask_ratio") {
      train.loss.mask_ratio = v;
    } else if (name == "bottleneck") {
      bottleneck = static_cast<std::size_t>(std::lround(v));
    } else if (name == "learning_rate") {
      train.learning_rate = std::max(v, 1e-6);  // the prior allows 0; keep the step positive
    } else if (name == "lr_decay") {
      train.lr_decay = v;
    } else if (name == "weight_decay") {
      train.loss.lambda = v;
    } else {
      throw Error::usage("genome gene '" + name + "' has no training knob");
    }
  }
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.ratings.empty()) throw Error::usage("config is missing the `ratings` path");
  FileFormat format;
  if (!cfg.format.empty()) {
    format = format_from_name(cfg.format);
  } else if (auto guessed = guess_format(cfg.ratings)) {
    format = *guessed;
  } else {
    throw Error::usage("cannot guess the format of " + cfg.ratings + "; set `format`");
  }

  RatingsData parsed = parse_ratings(cfg.ratings, format, cfg.scale);
  Dataset data;
  data.scale = parsed.scale;
  data.normalized = normalize(parsed.ratings, parsed.scale);
  data.users = std::move(parsed.users);
  data.items = std::move(parsed.items);

  std::vector<SideFeatures> item_blocks;
  if (!cfg.tags.empty()) {
    FileFormat tag_format = guess_format(cfg.tags).value_or(format);
    TagMatrix tags = parse_tags(cfg.tags, tag_format, data.items);
    item_blocks.push_back(pca_compress(tags, cfg.pca_components));
  }
  if (!cfg.genres.empty()) {
    FileFormat genre_format = guess_format(cfg.genres).value_or(format);
    CategoryMatrix genres = parse_categories(cfg.genres, genre_format, data.items);
    item_blocks.push_back(from_categories(genres, "genres"));
  }
  if (!item_blocks.empty()) data.item_side = assemble(item_blocks);

  if (!cfg.demographics.empty()) {
    FileFormat demo_format = guess_format(cfg.demographics).value_or(format);
    Demographics demo = parse_demographics(cfg.demographics, demo_format, data.users);
    data.user_side = encode_demographics(demo);
  }

  // Side files may introduce entities unseen in the ratings; their rating
  // rows/columns stay empty but the index spaces must agree.
  if (data.users.size() != data.normalized.rows() || data.items.size() != data.normalized.cols()) {
    std::vector<RatingTriplet> trip = data.normalized.to_triplets();
    data.normalized = SparseRatings::from_triplets(data.users.size(), data.items.size(),
                                                   Orientation::kUserRows, std::move(trip));
  }
  return data;
}

Prepared prepare(const SparseRatings& normalized_train, const SparseRatings& normalized_test,
                 const std::optional<SideFeatures>& user_side,
                 const std::optional<SideFeatures>& item_side, const ExperimentConfig& cfg,
                 const RatingScale& scale) {
  Prepared out;
  out.scale = scale;

  SparseRatings train_oriented = cfg.orientation == Orientation::kItemRows
                                     ? transpose(normalized_train)
                                     : normalized_train;
  out.test = cfg.orientation == Orientation::kItemRows ? transpose(normalized_test)
                                                       : normalized_test;

  if (cfg.validation_fraction > 0.0) {
    SplitSpec inner{1.0 - cfg.validation_fraction,
                    mix_seed(cfg.train.rng_seed, kValidationSplitTag, 0)};
    auto [fit, val] = split(train_oriented, inner);
    train_oriented = std::move(fit);
    out.validation = std::move(val);
  } else {
    out.validation = SparseRatings(train_oriented.rows(), train_oriented.cols(),
                                   train_oriented.orientation());
  }

  auto [unbiased, bias] = unbias(train_oriented);
  out.train = std::move(unbiased);
  out.bias = std::move(bias);

  const auto& side = cfg.orientation == Orientation::kItemRows ? item_side : user_side;
  if (side) out.side = *side;

  out.row_train_counts.assign(out.train.rows(), 0);
  for (std::size_t i = 0; i < out.train.rows(); ++i) {
    out.row_train_counts[i] = static_cast<std::uint32_t>(out.train.row_nnz(i));
  }
  return out;
}

AutoencoderModel build_model(const Prepared& data, const ExperimentConfig& cfg) {
  const std::size_t side_dim = data.side ? data.side->dim() : 0;
  return init_autoencoder(data.train.cols(), cfg.bottleneck, side_dim, cfg.train.rng_seed,
                          cfg.hidden_transfer, cfg.output_transfer);
}

TrainReport train_autoencoder(AutoencoderModel& model, const Prepared& data,
                              const ExperimentConfig& cfg) {
  ValidationFn validation;
  if (data.validation.nnz() > 0) {
    validation = [&data](const AutoencoderModel& m) {
      AutoencoderEstimator estimator(m, data.train, data.side_ptr(), data.bias, data.scale);
      return rmse(estimator, data.validation, data.scale);
    };
  }
  return train(model, data.train, data.side_ptr(), cfg.train, validation);
}

double test_rmse(const AutoencoderModel& model, const Prepared& data) {
  AutoencoderEstimator estimator(model, data.train, data.side_ptr(), data.bias, data.scale);
  return rmse(estimator, data.test, data.scale);
}

double validation_rmse(const AutoencoderModel& model, const Prepared& data) {
  if (data.validation.nnz() == 0) throw Error::usage("no validation slice was prepared");
  AutoencoderEstimator estimator(model, data.train, data.side_ptr(), data.bias, data.scale);
  return rmse(estimator, data.validation, data.scale);
}

EvalReport quintile_eval(const AutoencoderModel& model, const Prepared& data) {
  AutoencoderEstimator estimator(model, data.train, data.side_ptr(), data.bias, data.scale);
  return quintile_report(estimator, data.test, data.scale, data.row_train_counts,
                         EntityAxis::kRows);
}

double pipeline_rmse(const SparseRatings& normalized, const std::optional<SideFeatures>& user_side,
                     const std::optional<SideFeatures>& item_side, const ExperimentConfig& cfg,
                     const RatingScale& scale, double fraction, std::uint64_t seed) {
  auto [train_part, test_part] = split(normalized, SplitSpec{fraction, seed});
  if (test_part.nnz() == 0) throw Error::data("split produced an empty test set");
  ExperimentConfig local = cfg;
  local.train_fraction = fraction;
  Prepared data = prepare(train_part, test_part, user_side, item_side, local, scale);
  AutoencoderModel model = build_model(data, local);
  train_autoencoder(model, data, local);
  return test_rmse(model, data);
}

double genome_fitness(const SparseRatings& normalized_train,
                      const std::optional<SideFeatures>& user_side,
                      const std::optional<SideFeatures>& item_side, const ExperimentConfig& base,
                      const RatingScale& scale, const GenomeSpace& space, const Genome& genome) {
  ExperimentConfig cfg = base;
  cfg.apply_genome(space, genome);
  if (cfg.tune_epochs > 0) cfg.train.epochs = cfg.tune_epochs;
  if (cfg.validation_fraction <= 0.0) cfg.validation_fraction = 0.1;
  cfg.train.threads = 1;  // fitness evaluations already run in parallel

  // The validation slice is carved out of the training split; the test set
  // plays no role in fitness.
  SparseRatings empty_test(normalized_train.rows(), normalized_train.cols(),
                           normalized_train.orientation());
  Prepared data = prepare(normalized_train, empty_test, user_side, item_side, cfg, scale);
  AutoencoderModel model = build_model(data, cfg);
  train_autoencoder(model, data, cfg);
  return validation_rmse(model, data);
}

}  // namespace cfrec
