#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cfrec/ratings.hpp"

namespace cfrec {

/// Anything that can estimate a rating in original units for a (row, col)
/// cell of the evaluation orientation.
class RatingEstimator {
 public:
  virtual ~RatingEstimator() = default;
  virtual double predict(std::size_t row, std::uint32_t col) const = 0;
  /// Batched per-row variant; implementations override it when sharing work
  /// across the columns of one row is cheaper.
  virtual void predict_row(std::size_t row, std::span<const std::uint32_t> cols,
                           std::span<double> out) const {
    for (std::size_t t = 0; t < cols.size(); ++t) out[t] = predict(row, cols[t]);
  }
};

struct QuintileBucket {
  std::size_t first_rank = 0;   // rank range of entities in the bucket (sorted by count)
  std::size_t last_rank = 0;    // exclusive
  std::size_t n_ratings = 0;    // test ratings covered
  double rmse = 0.0;
};

struct EvalReport {
  double rmse = 0.0;
  std::size_t n_ratings = 0;
  std::vector<QuintileBucket> quintiles;                 // empty unless requested
  std::vector<std::pair<double, double>> density_curve;  // (train ratio, rmse)
};

/// Root mean square error over the test entries, in original rating units.
/// Test values are stored normalized and mapped back through `scale`.
double rmse(const RatingEstimator& estimator, const SparseRatings& test,
            const RatingScale& scale);

enum class EntityAxis : std::uint8_t { kRows, kCols };

/// Per-quintile RMSE with entities (rows or columns of the evaluation
/// orientation) sorted ascending by their training rating count, ties by
/// index, and split into five equal-cardinality buckets.
EvalReport quintile_report(const RatingEstimator& estimator, const SparseRatings& test,
                           const RatingScale& scale, std::span<const std::uint32_t> train_counts,
                           EntityAxis axis);

/// Runs a full split+train+evaluate pipeline per ratio with fixed
/// hyperparameters; `pipeline` maps (train_fraction, seed) to a test RMSE.
EvalReport density_sweep(const std::function<double(double, std::uint64_t)>& pipeline,
                         std::span<const double> ratios, std::uint64_t seed);

void write_eval_report(const std::string& path, const EvalReport& report);

}  // namespace cfrec
