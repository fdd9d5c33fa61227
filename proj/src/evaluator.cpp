#include "cfrec/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace cfrec {

double rmse(const RatingEstimator& estimator, const SparseRatings& test,
            const RatingScale& scale) {
  if (test.nnz() == 0) throw Error::data("rmse over an empty test set");
  double acc = 0.0;
  std::vector<std::uint32_t> cols;
  std::vector<double> pred;
  for (std::size_t i = 0; i < test.rows(); ++i) {
    auto row = test.row(i);
    if (row.empty()) continue;
    cols.resize(row.size());
    pred.resize(row.size());
    for (std::size_t t = 0; t < row.size(); ++t) cols[t] = row[t].col;
    estimator.predict_row(i, cols, pred);
    for (std::size_t t = 0; t < row.size(); ++t) {
      const double err = pred[t] - scale.from_unit(row[t].value);
      acc += err * err;
    }
  }
  return std::sqrt(acc / static_cast<double>(test.nnz()));
}

EvalReport quintile_report(const RatingEstimator& estimator, const SparseRatings& test,
                           const RatingScale& scale, std::span<const std::uint32_t> train_counts,
                           EntityAxis axis) {
  const std::size_t n_entities = axis == EntityAxis::kRows ? test.rows() : test.cols();
  if (train_counts.size() != n_entities) {
    throw Error::usage("train_counts length does not match the entity axis");
  }

  // Entities sorted ascending by training count; ties broken by index so
  // bucket boundaries are deterministic.
  std::vector<std::uint32_t> order(n_entities);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return train_counts[a] != train_counts[b] ? train_counts[a] < train_counts[b] : a < b;
  });
  std::vector<std::uint32_t> bucket_of(n_entities);
  constexpr std::size_t kBuckets = 5;
  std::vector<QuintileBucket> buckets(kBuckets);
  for (std::size_t b = 0; b < kBuckets; ++b) {
    buckets[b].first_rank = b * n_entities / kBuckets;
    buckets[b].last_rank = (b + 1) * n_entities / kBuckets;
    for (std::size_t r = buckets[b].first_rank; r < buckets[b].last_rank; ++r) {
      bucket_of[order[r]] = static_cast<std::uint32_t>(b);
    }
  }

  std::vector<double> sq_sum(kBuckets, 0.0);
  std::vector<std::size_t> counts(kBuckets, 0);
  double total_sq = 0.0;
  std::vector<std::uint32_t> cols;
  std::vector<double> pred;
  for (std::size_t i = 0; i < test.rows(); ++i) {
    auto row = test.row(i);
    if (row.empty()) continue;
    cols.resize(row.size());
    pred.resize(row.size());
    for (std::size_t t = 0; t < row.size(); ++t) cols[t] = row[t].col;
    estimator.predict_row(i, cols, pred);
    for (std::size_t t = 0; t < row.size(); ++t) {
      const double err = pred[t] - scale.from_unit(row[t].value);
      const std::size_t entity = axis == EntityAxis::kRows ? i : row[t].col;
      sq_sum[bucket_of[entity]] += err * err;
      ++counts[bucket_of[entity]];
      total_sq += err * err;
    }
  }

  EvalReport report;
  report.n_ratings = test.nnz();
  report.rmse = report.n_ratings > 0 ? std::sqrt(total_sq / static_cast<double>(report.n_ratings))
                                     : 0.0;
  for (std::size_t b = 0; b < kBuckets; ++b) {
    buckets[b].n_ratings = counts[b];
    buckets[b].rmse = counts[b] > 0 ? std::sqrt(sq_sum[b] / static_cast<double>(counts[b])) : 0.0;
  }
  report.quintiles = std::move(buckets);
  return report;
}

EvalReport density_sweep(const std::function<double(double, std::uint64_t)>& pipeline,
                         std::span<const double> ratios, std::uint64_t seed) {
  EvalReport report;
  for (double ratio : ratios) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
      throw Error::usage("density sweep ratios must lie in (0, 1)");
    }
    report.density_curve.emplace_back(ratio, pipeline(ratio, seed));
  }
  return report;
}

void write_eval_report(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw Error::data("cannot write " + path);
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  out << "metric\tvalue\tcount\n";
  out << "rmse\t" << fmt(report.rmse) << '\t' << report.n_ratings << '\n';
  for (std::size_t b = 0; b < report.quintiles.size(); ++b) {
    const auto& q = report.quintiles[b];
    out << "quintile_" << (b + 1) << "\t" << fmt(q.rmse) << '\t' << q.n_ratings << '\n';
  }
  for (const auto& [ratio, value] : report.density_curve) {
    out << "density_" << fmt(ratio) << "\t" << fmt(value) << "\t0\n";
  }
  if (!out) throw Error::data("failed writing " + path);
}

}  // namespace cfrec
