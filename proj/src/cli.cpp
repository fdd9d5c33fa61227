#include "cfrec/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cfrec/checkpoint.hpp"
#include "cfrec/pipeline.hpp"

namespace fs = std::filesystem;

namespace cfrec {

namespace {

struct CommonFlags {
  std::string config_path;
  std::string output = ".";
  long long seed = -1;  // -1: take the config value
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
  auto* opt = cmd->add_option("--config", flags.config_path, "key = value experiment config");
  if (config_required) opt->required();
  cmd->add_option("--output", flags.output, "output directory for this run");
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--threads", flags.threads,
                  "worker threads (default: CFREC_THREADS or all cores)");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig cfg = flags.config_path.empty()
                             ? ExperimentConfig::from_config(KeyValueConfig::parse(""))
                             : ExperimentConfig::from_config(KeyValueConfig::load(flags.config_path));
  if (flags.seed >= 0) {
    cfg.train.rng_seed = static_cast<std::uint64_t>(flags.seed);
    cfg.ga.seed = static_cast<std::uint64_t>(flags.seed);
  }
  int threads = flags.threads;
  if (threads <= 0) {
    if (const char* env = std::getenv("CFREC_THREADS")) threads = std::atoi(env);
  }
  cfg.train.threads = threads > 0 ? threads : 0;
  return cfg;
}

void ensure_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error::data("cannot create output directory " + dir + ": " + ec.message());
}

void copy_config_into(const std::string& config_path, const std::string& dir) {
  if (config_path.empty()) return;
  std::error_code ec;
  fs::copy_file(config_path, fs::path(dir) / "config.txt", fs::copy_options::overwrite_existing,
                ec);
  if (ec) warn("could not copy the config into " + dir + ": " + ec.message());
}

// Split directories carry the canonical files, the id maps and a small
// metadata file so later commands agree on the scale and dimensions.
struct SplitDir {
  SparseRatings train_normalized;  // user rows
  SparseRatings test_normalized;   // user rows; empty when absent
  RatingScale scale;
  IdMap users;
  IdMap items;
};

void write_dataset_meta(const std::string& dir, const RatingScale& scale, std::size_t n_users,
                        std::size_t n_items, const SplitSpec& spec) {
  std::ofstream out(fs::path(dir) / "dataset.txt");
  if (!out) throw Error::data("cannot write dataset metadata in " + dir);
  out << "scale = " << scale.min_rating << "," << scale.max_rating << "\n";
  out << "n_users = " << n_users << "\n";
  out << "n_items = " << n_items << "\n";
  out << "train_fraction = " << spec.train_fraction << "\n";
  out << "split_seed = " << spec.rng_seed << "\n";
}

SparseRatings parse_canonical_mapped(const std::string& path, const IdMap& users,
                                     const IdMap& items, const RatingScale& scale) {
  std::ifstream in(path);
  if (!in) throw Error::data("cannot open " + path);
  std::vector<RatingTriplet> triplets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string user, item, value;
    if (!std::getline(ss, user, '\t') || !std::getline(ss, item, '\t') ||
        !std::getline(ss, value, '\t')) {
      throw Error::data(path + ":" + std::to_string(line_no) + ": expected user<TAB>item<TAB>rating");
    }
    const std::uint32_t* u = users.find(user);
    const std::uint32_t* i = items.find(item);
    if (!u || !i) {
      throw Error::data(path + ":" + std::to_string(line_no) +
                        ": id not present in the sidecar maps");
    }
    triplets.push_back({*u, *i, std::stod(value)});
  }
  SparseRatings raw = SparseRatings::from_triplets(users.size(), items.size(),
                                                   Orientation::kUserRows, std::move(triplets));
  return normalize(raw, scale);
}

SplitDir load_split_dir(const std::string& dir, bool need_test) {
  SplitDir out;
  const fs::path base(dir);
  if (!fs::exists(base / "dataset.txt")) {
    throw Error::data(dir + " does not look like a split directory (missing dataset.txt)");
  }
  KeyValueConfig meta = KeyValueConfig::load((base / "dataset.txt").string());
  auto scale_parts = meta.get_doubles("scale");
  if (scale_parts.size() != 2) throw Error::data(dir + "/dataset.txt has a malformed scale");
  out.scale = {scale_parts[0], scale_parts[1]};
  out.users = read_id_map((base / "users.map.tsv").string());
  out.items = read_id_map((base / "items.map.tsv").string());
  out.train_normalized =
      parse_canonical_mapped((base / "train.tsv").string(), out.users, out.items, out.scale);
  if (need_test) {
    out.test_normalized =
        parse_canonical_mapped((base / "test.tsv").string(), out.users, out.items, out.scale);
  } else {
    out.test_normalized = SparseRatings(out.users.size(), out.items.size(), Orientation::kUserRows);
  }
  return out;
}

// Side features for the configured sources, resolved against the split
// directory's id maps. Side files may add entities; the rating matrices are
// re-dimensioned to keep every index space consistent.
void attach_side_features(const ExperimentConfig& cfg, SplitDir& data,
                          std::optional<SideFeatures>& user_side,
                          std::optional<SideFeatures>& item_side) {
  std::vector<SideFeatures> item_blocks;
  if (!cfg.tags.empty()) {
    FileFormat fmt = guess_format(cfg.tags).value_or(FileFormat::kCanonical);
    TagMatrix tags = parse_tags(cfg.tags, fmt, data.items);
    item_blocks.push_back(pca_compress(tags, cfg.pca_components));
  }
  if (!cfg.genres.empty()) {
    FileFormat fmt = guess_format(cfg.genres).value_or(FileFormat::kCanonical);
    CategoryMatrix genres = parse_categories(cfg.genres, fmt, data.items);
    item_blocks.push_back(from_categories(genres, "genres"));
  }
  if (!item_blocks.empty()) item_side = assemble(item_blocks);
  if (!cfg.demographics.empty()) {
    FileFormat fmt = guess_format(cfg.demographics).value_or(FileFormat::kCanonical);
    Demographics demo = parse_demographics(cfg.demographics, fmt, data.users);
    user_side = encode_demographics(demo);
  }

  if (data.users.size() != data.train_normalized.rows() ||
      data.items.size() != data.train_normalized.cols()) {
    auto regrow = [&](SparseRatings& m) {
      std::vector<RatingTriplet> trip = m.to_triplets();
      m = SparseRatings::from_triplets(data.users.size(), data.items.size(),
                                       Orientation::kUserRows, std::move(trip));
    };
    regrow(data.train_normalized);
    regrow(data.test_normalized);
  }
}

int cmd_split(const CommonFlags& flags, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(flags);
  Dataset data = load_dataset(cfg);
  ensure_output_dir(flags.output);

  SplitSpec spec{cfg.train_fraction, cfg.train.rng_seed};
  auto [train_part, test_part] = split(data.normalized, spec);

  const fs::path base(flags.output);
  write_canonical_ratings((base / "train.tsv").string(), train_part, data.scale, data.users,
                          data.items);
  write_canonical_ratings((base / "test.tsv").string(), test_part, data.scale, data.users,
                          data.items);
  write_id_map((base / "users.map.tsv").string(), data.users);
  write_id_map((base / "items.map.tsv").string(), data.items);
  write_dataset_meta(flags.output, data.scale, data.users.size(), data.items.size(), spec);
  copy_config_into(flags.config_path, flags.output);

  out << "split: " << train_part.nnz() << " train / " << test_part.nnz() << " test ratings ("
      << data.users.size() << " users, " << data.items.size() << " items) -> " << flags.output
      << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& data_dir, const std::string& resume,
              std::ostream& out) {
  ExperimentConfig cfg = resolve_config(flags);
  SplitDir dataset = load_split_dir(data_dir, /*need_test=*/false);
  std::optional<SideFeatures> user_side, item_side;
  attach_side_features(cfg, dataset, user_side, item_side);
  ensure_output_dir(flags.output);

  Prepared data = prepare(dataset.train_normalized, dataset.test_normalized, user_side, item_side,
                          cfg, dataset.scale);

  AutoencoderModel model;
  std::uint64_t epochs_before = 0;
  if (!resume.empty()) {
    Checkpoint ckpt = load_checkpoint(resume);
    if (ckpt.kind != Checkpoint::Kind::kAutoencoder || !ckpt.autoencoder) {
      throw Error::data(resume + " is not an autoencoder checkpoint");
    }
    if (ckpt.orientation != cfg.orientation) {
      throw Error::usage("checkpoint orientation does not match the config");
    }
    model = std::move(*ckpt.autoencoder);
    if (model.input_dim != data.train.cols()) {
      throw Error::data("checkpoint input dimension does not match the data");
    }
    epochs_before = ckpt.epochs_trained;
    cfg.train.rng_seed = ckpt.train_seed;
    cfg.train.start_epoch = epochs_before;
  } else {
    model = build_model(data, cfg);
  }

  TrainReport report = train_autoencoder(model, data, cfg);

  Checkpoint ckpt;
  ckpt.kind = Checkpoint::Kind::kAutoencoder;
  ckpt.orientation = cfg.orientation;
  ckpt.scale = data.scale;
  ckpt.bias = data.bias;
  ckpt.train_seed = cfg.train.rng_seed;
  ckpt.epochs_trained = epochs_before + report.epochs_completed();
  ckpt.autoencoder = model;

  const fs::path base(flags.output);
  save_checkpoint((base / "model.ckpt").string(), ckpt);
  write_train_report((base / "train_report.tsv").string(), report);
  copy_config_into(flags.config_path, flags.output);

  out << "train: " << report.epochs_completed() << " epoch(s), final loss "
      << (report.epochs.empty() ? 0.0 : report.epochs.back().train_loss) << " -> "
      << (base / "model.ckpt").string() << "\n";
  return 0;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& data_dir,
                 const std::string& checkpoint_path, bool quintiles,
                 const std::string& sweep_ratios, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(flags);
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.kind != Checkpoint::Kind::kAutoencoder || !ckpt.autoencoder) {
    throw Error::data(checkpoint_path + " is not an autoencoder checkpoint");
  }
  cfg.orientation = ckpt.orientation;
  cfg.train.rng_seed = ckpt.train_seed;

  SplitDir dataset = load_split_dir(data_dir, /*need_test=*/true);
  std::optional<SideFeatures> user_side, item_side;
  attach_side_features(cfg, dataset, user_side, item_side);

  Prepared data = prepare(dataset.train_normalized, dataset.test_normalized, user_side, item_side,
                          cfg, dataset.scale);
  // The checkpoint's bias is authoritative (it matches the rows the model
  // actually saw); flag drift loudly.
  if (ckpt.bias.row_means.size() == data.bias.row_means.size()) {
    double drift = 0.0;
    for (std::size_t i = 0; i < ckpt.bias.row_means.size(); ++i) {
      drift = std::max(drift, std::abs(ckpt.bias.row_means[i] - data.bias.row_means[i]));
    }
    if (drift > 1e-9) {
      warn("training bias differs from the recomputed bias (max drift " + std::to_string(drift) +
           "); using the checkpoint values");
    }
  }
  data.bias = ckpt.bias;

  EvalReport report;
  if (quintiles) {
    report = quintile_eval(*ckpt.autoencoder, data);
  } else {
    report.rmse = test_rmse(*ckpt.autoencoder, data);
    report.n_ratings = data.test.nnz();
  }

  if (!sweep_ratios.empty()) {
    std::vector<double> ratios;
    std::stringstream ss(sweep_ratios);
    std::string tok;
    while (std::getline(ss, tok, ',')) ratios.push_back(std::stod(tok));
    Dataset raw = load_dataset(cfg);
    EvalReport sweep = density_sweep(
        [&](double ratio, std::uint64_t seed) {
          return pipeline_rmse(raw.normalized, raw.user_side, raw.item_side, cfg, raw.scale,
                               ratio, seed);
        },
        ratios, cfg.train.rng_seed);
    report.density_curve = std::move(sweep.density_curve);
  }

  ensure_output_dir(flags.output);
  write_eval_report((fs::path(flags.output) / "eval_report.tsv").string(), report);

  out << "rmse\t" << report.rmse << "\n";
  for (std::size_t b = 0; b < report.quintiles.size(); ++b) {
    out << "quintile_" << (b + 1) << "\t" << report.quintiles[b].rmse << "\t("
        << report.quintiles[b].n_ratings << " ratings)\n";
  }
  for (const auto& [ratio, value] : report.density_curve) {
    out << "density_" << ratio << "\t" << value << "\n";
  }
  return 0;
}

int cmd_tune(const CommonFlags& flags, const std::string& data_dir, bool resume,
             std::ostream& out) {
  ExperimentConfig cfg = resolve_config(flags);
  SplitDir dataset = load_split_dir(data_dir, /*need_test=*/false);
  std::optional<SideFeatures> user_side, item_side;
  attach_side_features(cfg, dataset, user_side, item_side);
  ensure_output_dir(flags.output);

  GenomeSpace space = GenomeSpace::training_defaults();
  if (!flags.config_path.empty()) {
    KeyValueConfig kv = KeyValueConfig::load(flags.config_path);
    for (auto& gene : space.genes) {
      if (kv.has("gene_" + gene.name)) {
        auto bounds = kv.get_doubles("gene_" + gene.name);
        if (bounds.size() != 2 || !(bounds[0] <= bounds[1])) {
          throw Error::usage("gene_" + gene.name + " expects `lo,hi`");
        }
        gene.lo = bounds[0];
        gene.hi = bounds[1];
      }
    }
  }
  // The bottleneck must stay below the oriented input width.
  const std::size_t input_dim = cfg.orientation == Orientation::kItemRows
                                    ? dataset.train_normalized.rows()
                                    : dataset.train_normalized.cols();
  for (auto& gene : space.genes) {
    if (gene.name == "bottleneck" && gene.hi >= static_cast<double>(input_dim)) {
      warn("bottleneck gene bound " + std::to_string(gene.hi) + " clamped below input width " +
           std::to_string(input_dim));
      gene.hi = static_cast<double>(input_dim - 1);
      gene.lo = std::min(gene.lo, gene.hi);
    }
  }

  GaConfig ga = cfg.ga;
  ga.log_path = (fs::path(flags.output) / "tune_log.tsv").string();
  ga.resume = resume;

  const SparseRatings& train_rows = dataset.train_normalized;
  GaResult result = evolve(
      space,
      [&](const Genome& genome) {
        return genome_fitness(train_rows, user_side, item_side, cfg, dataset.scale, space, genome);
      },
      ga);

  std::ofstream best((fs::path(flags.output) / "best_genome.txt"));
  for (std::size_t i = 0; i < space.dim(); ++i) {
    best << space.genes[i].name << " = " << result.best.genome[i] << "\n";
  }
  best << "# validation_rmse = " << result.best.fitness << "\n";
  copy_config_into(flags.config_path, flags.output);

  out << "tune: best validation rmse " << result.best.fitness << "\n";
  for (std::size_t i = 0; i < space.dim(); ++i) {
    out << "  " << space.genes[i].name << " = " << result.best.genome[i] << "\n";
  }
  return 0;
}

int cmd_predict(const CommonFlags& flags, const std::string& data_dir,
                const std::string& checkpoint_path, const std::string& user_id,
                const std::string& item_id, const std::vector<std::string>& extra_ratings,
                std::ostream& out) {
  ExperimentConfig cfg = resolve_config(flags);
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.kind != Checkpoint::Kind::kAutoencoder || !ckpt.autoencoder) {
    throw Error::data(checkpoint_path + " is not an autoencoder checkpoint");
  }
  cfg.orientation = ckpt.orientation;
  cfg.train.rng_seed = ckpt.train_seed;

  SplitDir dataset = load_split_dir(data_dir, /*need_test=*/false);
  std::optional<SideFeatures> user_side, item_side;
  attach_side_features(cfg, dataset, user_side, item_side);
  Prepared data = prepare(dataset.train_normalized, dataset.test_normalized, user_side, item_side,
                          cfg, dataset.scale);
  data.bias = ckpt.bias;

  const std::uint32_t* user = dataset.users.find(user_id);
  const std::uint32_t* item = dataset.items.find(item_id);
  if (!user) throw Error::data("unknown user id '" + user_id + "'");
  if (!item) throw Error::data("unknown item id '" + item_id + "'");
  const bool item_rows = cfg.orientation == Orientation::kItemRows;
  const std::size_t row = item_rows ? *item : *user;
  const std::uint32_t col = item_rows ? *user : *item;
  const IdMap& col_map = item_rows ? dataset.users : dataset.items;

  AutoencoderEstimator estimator(*ckpt.autoencoder, data.train, data.side_ptr(), data.bias,
                                 data.scale);

  double prediction;
  if (extra_ratings.empty()) {
    prediction = estimator.predict(row, col);
  } else {
    // Merge ad-hoc ratings into the row and run a plain feed-forward pass:
    // refinement without retraining.
    const double row_bias = data.bias.bias_for(row);
    std::vector<RatingEntry> entries(data.train.row(row).begin(), data.train.row(row).end());
    for (const std::string& spec : extra_ratings) {
      auto eq = spec.find('=');
      if (eq == std::string::npos) throw Error::usage("--rate expects `<id>=<rating>`");
      const std::string id = spec.substr(0, eq);
      const double value = std::stod(spec.substr(eq + 1));
      const std::uint32_t* c = col_map.find(id);
      if (!c) throw Error::data("unknown id '" + id + "' in --rate");
      if (value < data.scale.min_rating || value > data.scale.max_rating) {
        throw Error::data("--rate value outside the rating scale");
      }
      const double unbiased = data.scale.to_unit(value) - row_bias;
      bool replaced = false;
      for (auto& e : entries) {
        if (e.col == *c) {
          e.value = unbiased;
          replaced = true;
          break;
        }
      }
      if (!replaced) entries.push_back({*c, unbiased});
    }
    std::sort(entries.begin(), entries.end(),
              [](const RatingEntry& a, const RatingEntry& b) { return a.col < b.col; });
    std::span<const double> side_vec;
    if (ckpt.autoencoder->side_dim > 0 && data.side) {
      side_vec = std::span<const double>(
          data.side->values.row(static_cast<Eigen::Index>(row)).data(),
          ckpt.autoencoder->side_dim);
    }
    prediction = estimator.predict_adhoc(entries, row_bias, side_vec, col);
  }

  out << prediction << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"Collaborative filtering with sparse denoising autoencoders"};
  app.require_subcommand(1);

  CommonFlags split_flags, train_flags, eval_flags, tune_flags, predict_flags;
  std::string train_data, train_resume;
  std::string eval_data, eval_checkpoint, eval_sweep;
  bool eval_quintiles = false;
  std::string tune_data;
  bool tune_resume = false;
  std::string predict_data, predict_checkpoint, predict_user, predict_item;
  std::vector<std::string> predict_rates;

  auto* split_cmd = app.add_subcommand("split", "split a rating file into train/test");
  add_common(split_cmd, split_flags);

  auto* train_cmd = app.add_subcommand("train", "train an autoencoder on a split");
  add_common(train_cmd, train_flags);
  train_cmd->add_option("--data", train_data, "split directory")->required();
  train_cmd->add_option("--resume", train_resume, "checkpoint to continue from");

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
  add_common(eval_cmd, eval_flags, /*config_required=*/false);
  eval_cmd->add_option("--data", eval_data, "split directory")->required();
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "model checkpoint")->required();
  eval_cmd->add_flag("--quintiles", eval_quintiles, "report RMSE per rating-count quintile");
  eval_cmd->add_option("--sweep", eval_sweep,
                       "comma-separated train ratios for a density sweep (uses `ratings`)");

  auto* tune_cmd = app.add_subcommand("tune", "genetic hyperparameter search");
  add_common(tune_cmd, tune_flags);
  tune_cmd->add_option("--data", tune_data, "split directory")->required();
  tune_cmd->add_flag("--resume", tune_resume, "continue from the tuning log");

  auto* predict_cmd = app.add_subcommand("predict", "predict one rating from a checkpoint");
  add_common(predict_cmd, predict_flags, /*config_required=*/false);
  predict_cmd->add_option("--data", predict_data, "split directory")->required();
  predict_cmd->add_option("--checkpoint", predict_checkpoint, "model checkpoint")->required();
  predict_cmd->add_option("--user", predict_user, "user id")->required();
  predict_cmd->add_option("--item", predict_item, "item id")->required();
  predict_cmd->add_option("--rate", predict_rates,
                          "ad-hoc `<id>=<rating>` entries merged into the input row");

  std::vector<const char*> argv;
  argv.push_back("cfrec");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (split_cmd->parsed()) return cmd_split(split_flags, out);
    if (train_cmd->parsed()) return cmd_train(train_flags, train_data, train_resume, out);
    if (eval_cmd->parsed()) {
      return cmd_evaluate(eval_flags, eval_data, eval_checkpoint, eval_quintiles, eval_sweep, out);
    }
    if (tune_cmd->parsed()) return cmd_tune(tune_flags, tune_data, tune_resume, out);
    if (predict_cmd->parsed()) {
      return cmd_predict(predict_flags, predict_data, predict_checkpoint, predict_user,
                         predict_item, predict_rates, out);
    }
  } catch (const Error& e) {
    std::cerr << "cfrec: error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "cfrec: unexpected error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kNumeric);
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args) { return run_cli(args, std::cout); }

}  // namespace cfrec
