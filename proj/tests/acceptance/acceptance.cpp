// Acceptance suite: one checkable criterion per function, each printing a
// single PASS/FAIL/SKIP line. Criteria 1-3 run the full MovieLens-1M
// pipeline and are skipped (exit 77 under ctest) when the dataset is not
// present; every threshold stays pinned in code either way.
//
// Usage: acceptance [1..10|all]

#include <Eigen/Dense>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "cfrec/baselines.hpp"
#include "cfrec/checkpoint.hpp"
#include "cfrec/cli.hpp"
#include "cfrec/pipeline.hpp"

using namespace cfrec;
namespace fs = std::filesystem;

namespace {

constexpr int kSkipExit = 77;

struct Outcome {
  int criterion = 0;
  std::string status;  // PASS | FAIL | SKIP
  std::string detail;
};

int default_threads() {
  if (const char* env = std::getenv("CFREC_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// ---------------------------------------------------------------------------
// MovieLens-1M plumbing (criteria 1-3)

std::optional<fs::path> find_ml1m() {
  std::vector<fs::path> candidates;
  if (const char* env = std::getenv("CFREC_ML1M_DIR")) candidates.emplace_back(env);
  candidates.emplace_back("data/ml-1m");
  for (const auto& dir : candidates) {
    if (fs::exists(dir / "ratings.dat")) return dir;
  }
  return std::nullopt;
}

const char* kMl1mSkip =
    "MovieLens-1M not found (set CFREC_ML1M_DIR or place ratings.dat under data/ml-1m); "
    "thresholds remain pinned in code";

// Reference training settings for the MovieLens-1M runs. Loss weights follow
// the published mixed configuration; the optimizer knobs are fixed here.
ExperimentConfig ml1m_config(const fs::path& dir, Orientation orientation, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.ratings = (dir / "ratings.dat").string();
  cfg.format = "dat";
  cfg.scale = RatingScale{1.0, 5.0};
  cfg.orientation = orientation;
  cfg.train_fraction = 0.9;
  cfg.bottleneck = 600;
  cfg.hidden_transfer = Transfer::kTanh;
  cfg.output_transfer = Transfer::kIdentity;
  cfg.train.epochs = 30;
  cfg.train.batch_size = 30;
  cfg.train.learning_rate = 0.08;
  cfg.train.lr_decay = 0.05;
  cfg.train.rng_seed = seed;
  cfg.train.threads = default_threads();
  cfg.train.loss.alpha = 0.91;
  cfg.train.loss.beta = 0.54;
  cfg.train.loss.mask_ratio = 0.25;
  cfg.train.loss.lambda = 2e-4;
  cfg.train.loss.normalize_by_known = true;
  return cfg;
}

struct Ml1mRun {
  double test_rmse = 0.0;
  double best_validation_rmse = 0.0;
  EvalReport quintiles;
  double seconds = 0.0;
};

Ml1mRun run_ml1m(const fs::path& dir, Orientation orientation, std::uint64_t seed,
                 bool with_genres, double validation_fraction, bool want_quintiles,
                 const LossConfig* loss_override = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = ml1m_config(dir, orientation, seed);
  cfg.validation_fraction = validation_fraction;
  if (with_genres) cfg.genres = (dir / "movies.dat").string();
  if (loss_override) cfg.train.loss = *loss_override;

  Dataset data = load_dataset(cfg);
  auto [train_part, test_part] = split(data.normalized, SplitSpec{0.9, seed});
  Prepared prepared = prepare(train_part, test_part, data.user_side, data.item_side, cfg,
                              data.scale);
  AutoencoderModel model = build_model(prepared, cfg);
  TrainReport report = train_autoencoder(model, prepared, cfg);

  Ml1mRun run;
  run.test_rmse = test_rmse(model, prepared);
  run.best_validation_rmse = std::numeric_limits<double>::infinity();
  for (const auto& e : report.epochs) {
    if (std::isfinite(e.validation_rmse)) {
      run.best_validation_rmse = std::min(run.best_validation_rmse, e.validation_rmse);
    }
  }
  if (want_quintiles) run.quintiles = quintile_eval(model, prepared);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

Outcome criterion_1() {
  Outcome out{1, "FAIL", ""};
  auto dir = find_ml1m();
  if (!dir) {
    out.status = "SKIP";
    out.detail = kMl1mSkip;
    return out;
  }
  Ml1mRun v = run_ml1m(*dir, Orientation::kItemRows, 1, false, 0.0, false);
  Ml1mRun u = run_ml1m(*dir, Orientation::kUserRows, 1, false, 0.0, false);
  const double total_minutes = (v.seconds + u.seconds) / 60.0;
  std::ostringstream detail;
  detail << "item-autoencoder rmse " << v.test_rmse << " (<= 0.86), user-autoencoder rmse "
         << u.test_rmse << " (<= 0.88), " << total_minutes << " min total (<= 120)";
  out.detail = detail.str();
  if (v.test_rmse <= 0.86 && u.test_rmse <= 0.88 && total_minutes <= 120.0) out.status = "PASS";
  return out;
}

Outcome criterion_2() {
  Outcome out{2, "FAIL", ""};
  auto dir = find_ml1m();
  if (!dir) {
    out.status = "SKIP";
    out.detail = kMl1mSkip;
    return out;
  }
  LossConfig mixed;  // published mixed configuration
  mixed.alpha = 0.91;
  mixed.beta = 0.54;
  mixed.mask_ratio = 0.25;
  mixed.lambda = 2e-4;
  LossConfig supervised = mixed;  // prediction-only: no reconstruction, no masking
  supervised.beta = 0.0;
  supervised.mask_ratio = 0.0;

  int wins = 0;
  std::ostringstream detail;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Ml1mRun a = run_ml1m(*dir, Orientation::kItemRows, seed, false, 0.1, false, &mixed);
    Ml1mRun b = run_ml1m(*dir, Orientation::kItemRows, seed, false, 0.1, false, &supervised);
    const bool win = a.best_validation_rmse <= b.best_validation_rmse;
    wins += win;
    detail << "seed " << seed << ": mixed " << a.best_validation_rmse << (win ? " <= " : " > ")
           << "supervised " << b.best_validation_rmse << "; ";
  }
  detail << wins << "/3 seeds (need >= 2)";
  out.detail = detail.str();
  if (wins >= 2) out.status = "PASS";
  return out;
}

Outcome criterion_3() {
  Outcome out{3, "FAIL", ""};
  auto dir = find_ml1m();
  if (!dir) {
    out.status = "SKIP";
    out.detail = kMl1mSkip;
    return out;
  }
  if (!fs::exists(*dir / "movies.dat")) {
    out.detail = "movies.dat with genres is required for the side-information run";
    return out;
  }
  int wins = 0;
  std::ostringstream detail;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Ml1mRun plain = run_ml1m(*dir, Orientation::kItemRows, seed, false, 0.0, true);
    Ml1mRun hybrid = run_ml1m(*dir, Orientation::kItemRows, seed, true, 0.0, true);
    const double cold_plain = plain.quintiles.quintiles.front().rmse;
    const double cold_hybrid = hybrid.quintiles.quintiles.front().rmse;
    const bool win = cold_hybrid <= cold_plain + 0.002;
    wins += win;
    detail << "seed " << seed << ": bottom-quintile " << cold_plain << " -> " << cold_hybrid
           << (win ? " ok" : " regressed") << "; ";
  }
  detail << wins << "/3 seeds (need >= 2)";
  out.detail = detail.str();
  if (wins >= 2) out.status = "PASS";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 4: analytic gradients of forward + loss (+ weight decay) vs
// central finite differences on 20 random small instances.

Outcome criterion_4() {
  Outcome out{4, "FAIL", ""};
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim_pick(6, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> value(-1.0, 1.0);

  double worst = 0.0;
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t n = dim_pick(rng);
    const std::size_t k = 3 + instance % 3;
    const std::size_t p = (instance % 2 == 1 && k >= 2) ? 1 + instance % std::min<std::size_t>(2, k - 1) : 0;
    AutoencoderModel model = init_autoencoder(n, k, p, 9000 + instance);

    std::vector<RatingEntry> target;
    for (std::size_t j = 0; j < n; ++j) {
      if (unit(rng) < 0.7) target.push_back({static_cast<std::uint32_t>(j), value(rng)});
    }
    if (target.empty()) target.push_back({0, 0.5});

    LossConfig cfg;
    cfg.alpha = 0.5 + unit(rng);
    cfg.beta = unit(rng);
    cfg.mask_ratio = 0.6 * unit(rng);
    cfg.lambda = instance % 3 == 0 ? 0.0 : 0.01 * unit(rng);

    std::mt19937_64 mask_rng(500 + instance);
    auto [survivors, mask] = corrupt(target, cfg.mask_ratio, mask_rng);
    Eigen::VectorXd side = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(p), -0.4, 0.6);
    std::span<const double> side_span(side.data(), p);

    std::vector<std::uint32_t> out_idx;
    for (const auto& e : target) out_idx.push_back(e.col);

    auto objective = [&](const AutoencoderModel& m) {
      Eigen::VectorXd pred = forward(m, survivors, side_span);
      return loss(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                  target, mask, cfg, &m);
    };

    // Analytic gradient: data term through backprop, weight decay at the
    // parameter level (2 * lambda * W).
    ForwardTrace trace = forward_training(model, survivors, side_span, out_idx);
    std::vector<double> pred_at_known(target.size());
    for (std::size_t t = 0; t < target.size(); ++t) {
      pred_at_known[t] = trace.outputs[static_cast<Eigen::Index>(t)];
    }
    std::vector<double> grad_at_known(target.size());
    loss_gradient_at_known(pred_at_known, target, mask, cfg, grad_at_known);
    Gradients grads;
    grads.resize_zero(model);
    accumulate_backward(model, trace, grad_at_known, grads);
    grads.encoder_w += 2.0 * cfg.lambda * model.encoder_w;
    grads.decoder_w += 2.0 * cfg.lambda * model.decoder_w;

    std::vector<double> analytic;
    for (Eigen::Index i = 0; i < grads.encoder_w.size(); ++i)
      analytic.push_back(grads.encoder_w.data()[i]);
    for (Eigen::Index i = 0; i < grads.encoder_b.size(); ++i)
      analytic.push_back(grads.encoder_b.data()[i]);
    for (Eigen::Index i = 0; i < grads.decoder_w.size(); ++i)
      analytic.push_back(grads.decoder_w.data()[i]);
    for (Eigen::Index i = 0; i < grads.decoder_b.size(); ++i)
      analytic.push_back(grads.decoder_b.data()[i]);

    std::vector<double*> params;
    for (Eigen::Index i = 0; i < model.encoder_w.size(); ++i)
      params.push_back(model.encoder_w.data() + i);
    for (Eigen::Index i = 0; i < model.encoder_b.size(); ++i)
      params.push_back(model.encoder_b.data() + i);
    for (Eigen::Index i = 0; i < model.decoder_w.size(); ++i)
      params.push_back(model.decoder_w.data() + i);
    for (Eigen::Index i = 0; i < model.decoder_b.size(); ++i)
      params.push_back(model.decoder_b.data() + i);

    const double eps = 1e-5;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = *params[i];
      *params[i] = saved + eps;
      const double hi = objective(model);
      *params[i] = saved - eps;
      const double lo = objective(model);
      *params[i] = saved;
      const double fd = (hi - lo) / (2.0 * eps);
      const double rel = std::abs(fd - analytic[i]) /
                         std::max({std::abs(fd), std::abs(analytic[i]), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  std::ostringstream detail;
  detail << "max relative gradient error " << worst << " over 20 instances (< 1e-5)";
  out.detail = detail.str();
  if (worst < 1e-5) out.status = "PASS";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 5: perturbing inputs/targets at unknown indices changes nothing,
// bit for bit, on 1000 random instances.

Outcome criterion_5() {
  Outcome out{5, "FAIL", ""};
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<std::size_t> dim_pick(5, 16);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  std::uniform_real_distribution<double> poison(-1e6, 1e6);

  for (int instance = 0; instance < 1000; ++instance) {
    const std::size_t n = dim_pick(rng);
    const std::size_t k = 2 + instance % 4;
    AutoencoderModel model = init_autoencoder(n, k, 0, 10000 + instance);

    std::vector<double> values(n, 0.0);
    std::vector<std::uint8_t> known(n, 0);
    std::vector<RatingEntry> target;
    for (std::size_t j = 0; j < n; ++j) {
      if (unit(rng) < 0.5) {
        known[j] = 1;
        values[j] = value(rng);
        target.push_back({static_cast<std::uint32_t>(j), values[j]});
      }
    }
    if (target.empty()) {
      known[0] = 1;
      values[0] = 0.25;
      target.push_back({0, 0.25});
    }

    LossConfig cfg;
    cfg.alpha = 1.1;
    cfg.beta = 0.6;
    std::mt19937_64 mask_rng(instance);
    auto [survivors, mask] = corrupt(target, 0.3, mask_rng);

    Eigen::VectorXd base_pred = forward_masked(model, values, known);
    std::vector<double> pred(base_pred.data(), base_pred.data() + base_pred.size());
    const double base_loss = loss(pred, target, mask, cfg, &model);
    const auto base_grad = loss_gradient(pred, target, mask, cfg);

    // Poison every unknown position in the dense input and the prediction.
    for (std::size_t j = 0; j < n; ++j) {
      if (!known[j]) {
        values[j] = poison(rng);
        pred[j] = poison(rng);
      }
    }
    Eigen::VectorXd poisoned_pred = forward_masked(model, values, known);
    if ((poisoned_pred - base_pred).cwiseAbs().maxCoeff() != 0.0) {
      out.detail = "prediction changed after an unknown-index input perturbation";
      return out;
    }
    if (loss(pred, target, mask, cfg, &model) != base_loss) {
      out.detail = "loss changed after an unknown-index perturbation";
      return out;
    }
    if (loss_gradient(pred, target, mask, cfg) != base_grad) {
      out.detail = "gradient changed after an unknown-index perturbation";
      return out;
    }
  }
  out.status = "PASS";
  out.detail = "1000 random instances, exact equality";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 6: matrix-factorization correspondence of linear models.

Outcome criterion_6() {
  Outcome out{6, "FAIL", ""};
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> value(-1.0, 1.0);

  auto random_inputs = [&](std::size_t rows, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 local(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_real_distribution<double> v(-1.0, 1.0);
    std::vector<RatingTriplet> t;
    for (std::uint32_t i = 0; i < rows; ++i) {
      bool any = false;
      for (std::uint32_t j = 0; j < n; ++j) {
        if (coin(local) < 0.4) {
          t.push_back({i, j, v(local)});
          any = true;
        }
      }
      if (!any) t.push_back({i, 0, v(local)});
    }
    return SparseRatings::from_triplets(rows, n, Orientation::kUserRows, std::move(t));
  };

  double worst_dev = 0.0, worst_sigma = 0.0;
  for (int i = 0; i < 10; ++i) {
    const std::size_t n = 15 + static_cast<std::size_t>(10 * unit(rng));
    const std::size_t k = 2 + i % 4;
    AutoencoderModel model =
        init_autoencoder(n, k, 0, 600 + i, Transfer::kIdentity, Transfer::kIdentity);
    for (Eigen::Index b = 0; b < model.decoder_b.size(); ++b) model.decoder_b[b] = value(rng);
    auto report = equivalence_check(model, random_inputs(k + 12, n, 40 + i));
    worst_dev = std::max(worst_dev, report.max_deviation);
    worst_sigma = std::max(worst_sigma, report.sigma_ratio);
    if (!report.passed) {
      out.detail = "random linear model " + std::to_string(i) + " failed";
      return out;
    }
  }

  for (int i = 0; i < 3; ++i) {
    auto all = random_inputs(30, 20, 90 + i);
    auto [train_rows, bias] = unbias(all);
    AutoencoderModel model =
        init_autoencoder(20, 4, 0, 700 + i, Transfer::kIdentity, Transfer::kIdentity);
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.learning_rate = 0.1;
    cfg.rng_seed = i;
    cfg.loss.mask_ratio = 0.0;
    train(model, train_rows, nullptr, cfg);
    auto report = equivalence_check(model, train_rows);
    worst_dev = std::max(worst_dev, report.max_deviation);
    worst_sigma = std::max(worst_sigma, report.sigma_ratio);
    if (!report.passed) {
      out.detail = "trained linear model " + std::to_string(i) + " failed";
      return out;
    }
  }
  std::ostringstream detail;
  detail << "max deviation " << worst_dev << " (< 1e-10), max sigma ratio " << worst_sigma
         << " (< 1e-8) over 13 models";
  out.detail = detail.str();
  out.status = "PASS";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 7: synthetic parity between the linear autoencoder and ALS-WR.

Outcome criterion_7() {
  Outcome out{7, "FAIL", ""};
  const std::size_t n_rows = 200, n_cols = 150, rank = 5;
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd a(n_rows, rank), b(n_cols, rank);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = gauss(rng);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = gauss(rng);
  Eigen::MatrixXd full = a * b.transpose();
  full /= full.cwiseAbs().maxCoeff();

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<RatingTriplet> observed;
  for (std::uint32_t i = 0; i < n_rows; ++i) {
    for (std::uint32_t j = 0; j < n_cols; ++j) {
      if (coin(rng) < 0.3) {
        observed.push_back({i, j, full(i, j)});
      }
    }
  }
  auto all = SparseRatings::from_triplets(n_rows, n_cols, Orientation::kUserRows,
                                          std::move(observed));
  auto [train_all, test_part] = split(all, {0.9, 7});
  auto [fit_part, val_part] = split(train_all, {0.9, 8});
  auto [fit_unbiased, bias] = unbias(fit_part);
  const RatingScale identity_scale{-1.0, 1.0};  // from_unit is the identity

  // ALS-WR at the planted rank, weighted-lambda grid on validation.
  bool monotone = true;
  double best_als_val = std::numeric_limits<double>::infinity();
  MFModel best_als;
  for (double lambda : {1e-4, 1e-3, 1e-2, 5e-2}) {
    MFModel model = als_wr(fit_unbiased, rank, lambda, 12, 17);
    for (std::size_t i = 1; i < model.objective_trace.size(); ++i) {
      monotone &= model.objective_trace[i] <= model.objective_trace[i - 1] * (1 + 1e-12);
    }
    FactorEstimator estimator(model, bias, identity_scale);
    const double val = rmse(estimator, val_part, identity_scale);
    if (val < best_als_val) {
      best_als_val = val;
      best_als = std::move(model);
    }
  }
  FactorEstimator als_estimator(best_als, bias, identity_scale);
  const double als_test = rmse(als_estimator, test_part, identity_scale);

  // Linear autoencoder at the same rank, no corruption, coarse lambda grid.
  // The optimizer budget is sized so SGD reaches the class optimum (checked
  // against an independent full-batch optimizer during development).
  double best_cfn_val = std::numeric_limits<double>::infinity();
  AutoencoderModel best_cfn;
  for (double lambda : {0.0, 1e-6, 1e-5}) {
    AutoencoderModel model =
        init_autoencoder(n_cols, rank, 0, 99, Transfer::kIdentity, Transfer::kIdentity);
    TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.batch_size = 30;
    cfg.learning_rate = 3.0;
    cfg.lr_decay = 0.001;
    cfg.rng_seed = 5;
    cfg.loss.alpha = 1.0;
    cfg.loss.beta = 1.0;
    cfg.loss.mask_ratio = 0.0;
    cfg.loss.lambda = lambda;
    train(model, fit_unbiased, nullptr, cfg);
    AutoencoderEstimator estimator(model, fit_unbiased, nullptr, bias, identity_scale);
    const double val = rmse(estimator, val_part, identity_scale);
    if (val < best_cfn_val) {
      best_cfn_val = val;
      best_cfn = std::move(model);
    }
  }
  AutoencoderEstimator cfn_estimator(best_cfn, fit_unbiased, nullptr, bias, identity_scale);
  const double cfn_test = rmse(cfn_estimator, test_part, identity_scale);

  std::ostringstream detail;
  detail << "linear autoencoder rmse " << cfn_test << " vs als " << als_test << " (ratio "
         << cfn_test / als_test << " <= 1.15), objective monotone: " << (monotone ? "yes" : "no");
  out.detail = detail.str();
  if (monotone && cfn_test <= 1.15 * als_test) out.status = "PASS";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 8: the PCA compression contract on random tag matrices.

Outcome criterion_8() {
  Outcome out{8, "FAIL", ""};
  std::mt19937_64 rng(321);
  std::uniform_int_distribution<int> count(0, 5);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  double worst_ortho = 0.0, worst_norm = 0.0, worst_recon = 0.0;
  for (int instance = 0; instance < 5; ++instance) {
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(40, 25);
    TagMatrix tags;
    tags.n_entities = 40;
    tags.rows.resize(40);
    for (int j = 0; j < 25; ++j) tags.tags.intern("t" + std::to_string(j));
    for (Eigen::Index i = 0; i < 40; ++i) {
      for (Eigen::Index j = 0; j < 25; ++j) {
        if (coin(rng) < 0.4) {
          const int c = count(rng);
          if (c > 0) {
            dense(i, j) = c;
            tags.rows[static_cast<std::size_t>(i)].push_back(
                {static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(c)});
          }
        }
      }
    }

    SideFeatures y = pca_compress(tags, 25);
    const Eigen::MatrixXd& v = y.values;

    for (Eigen::Index p = 0; p < v.cols(); ++p) {
      for (Eigen::Index q = p + 1; q < v.cols(); ++q) {
        const double np = v.col(p).norm(), nq = v.col(q).norm();
        if (np == 0.0 || nq == 0.0) continue;
        worst_ortho = std::max(worst_ortho, std::abs(v.col(p).dot(v.col(q))) / (np * nq));
      }
    }

    // Independent oracle: dense symmetric eigendecomposition.
    Eigen::MatrixXd gram = dense * dense.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    Eigen::VectorXd lambdas = solver.eigenvalues().reverse();
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      const double oracle = lambdas[j];
      if (oracle < 1e-9 * lambdas[0]) continue;
      worst_norm = std::max(worst_norm, std::abs(v.col(j).squaredNorm() - oracle) / oracle);
    }

    const Eigen::MatrixXd recon = Eigen::MatrixXd(v) * Eigen::MatrixXd(v).transpose();
    worst_recon = std::max(worst_recon, (recon - gram).cwiseAbs().maxCoeff() /
                                            std::max(1.0, gram.cwiseAbs().maxCoeff()));
  }
  std::ostringstream detail;
  detail << "orthogonality " << worst_ortho << " (< 1e-8), eigenvalue norm error " << worst_norm
         << " (< 1e-6 rel), reconstruction " << worst_recon << " (< 1e-8 rel) over 5 matrices";
  out.detail = detail.str();
  if (worst_ortho < 1e-8 && worst_norm < 1e-6 && worst_recon < 1e-8) out.status = "PASS";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 9: genetic tuner convergence on a synthetic quadratic fitness.

Outcome criterion_9() {
  Outcome out{9, "FAIL", ""};
  GenomeSpace space = GenomeSpace::training_defaults();
  Genome target;
  for (const auto& gene : space.genes) target.push_back(0.5 * (gene.lo + gene.hi));

  std::ostringstream detail;
  bool ok = true;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    GaConfig cfg;
    cfg.population = 20;
    cfg.sigma = 0.08;
    cfg.lambdas = {0.1, 0.2, 0.3, 0.4};
    cfg.generations = 50;
    cfg.seed = seed;
    GaResult result = evolve(
        space,
        [&target](const Genome& g) {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += (g[i] - target[i]) * (g[i] - target[i]);
          return acc;
        },
        cfg);

    double best_so_far = std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (const auto& gen : result.generations) {
      double gen_best = best_so_far;
      for (const auto& ind : gen) gen_best = std::min(gen_best, ind.fitness);
      monotone &= gen_best <= best_so_far;
      best_so_far = gen_best;
    }
    detail << "seed " << seed << ": best " << result.best.fitness
           << (monotone ? "" : " (non-monotone!)") << "; ";
    ok &= monotone && result.best.fitness < 1e-2;
  }
  detail << "(need < 1e-2 within 50 generations, monotone best)";
  out.detail = detail.str();
  if (ok) out.status = "PASS";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 10: determinism of the training command.

Outcome criterion_10() {
  Outcome out{10, "FAIL", ""};
  const fs::path dir =
      fs::temp_directory_path() / ("cfrec_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);

  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> star(1, 5);
  std::ostringstream ratings;
  for (int u = 1; u <= 60; ++u) {
    for (int i = 1; i <= 40; ++i) {
      if (coin(rng) < 0.4) ratings << u << "::" << i << "::" << star(rng) << "::0\n";
    }
  }
  std::ofstream((dir / "ratings.dat")) << ratings.str();
  std::ofstream((dir / "config.txt"))
      << "ratings = " << (dir / "ratings.dat").string() << "\n"
      << "orientation = item\nbottleneck = 8\nepochs = 6\nlearning_rate = 0.2\n"
      << "mask_ratio = 0.25\nalpha = 1.0\nbeta = 0.6\nweight_decay = 0.0001\nseed = 12\n";

  auto run = [&](const std::string& tag) {
    std::ostringstream sink;
    const std::vector<std::string> split_args = {"split", "--config", (dir / "config.txt").string(),
                                                 "--output", (dir / "s").string()};
    if (run_cli(split_args, sink) != 0) return std::string();
    const std::vector<std::string> train_args = {
        "train",    "--config", (dir / "config.txt").string(),
        "--data",   (dir / "s").string(),
        "--output", (dir / tag).string(),
        "--threads", "1"};
    if (run_cli(train_args, sink) != 0) return std::string();
    std::ifstream in(dir / tag / "model.ckpt", std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };

  const std::string first = run("a");
  const std::string second = run("b");
  std::error_code ec;
  fs::remove_all(dir, ec);

  if (first.empty() || second.empty()) {
    out.detail = "training command failed";
    return out;
  }
  if (first == second) {
    out.status = "PASS";
    out.detail = "two single-threaded runs produced byte-identical checkpoints (" +
                 std::to_string(first.size()) + " bytes)";
  } else {
    out.detail = "checkpoints differ";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "all";
  std::vector<Outcome (*)()> criteria = {criterion_1, criterion_2, criterion_3, criterion_4,
                                         criterion_5, criterion_6, criterion_7, criterion_8,
                                         criterion_9, criterion_10};

  std::vector<Outcome> results;
  try {
    if (which == "all") {
      for (auto* fn : criteria) results.push_back(fn());
    } else {
      const int n = std::stoi(which);
      if (n < 1 || n > 10) {
        std::cerr << "usage: acceptance [1..10|all]\n";
        return 1;
      }
      results.push_back(criteria[static_cast<std::size_t>(n - 1)]());
    }
  } catch (const std::exception& e) {
    std::cerr << "acceptance: unexpected error: " << e.what() << "\n";
    return 1;
  }

  bool any_fail = false, any_skip = false;
  for (const auto& r : results) {
    std::cout << "criterion " << r.criterion << ": " << r.status << " — " << r.detail << "\n";
    any_fail |= r.status == "FAIL";
    any_skip |= r.status == "SKIP";
  }
  if (any_fail) return 1;
  if (any_skip) return kSkipExit;
  return 0;
}
