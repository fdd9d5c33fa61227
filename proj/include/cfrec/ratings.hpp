#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfrec/common.hpp"

namespace cfrec {

/// Affine map between the dataset's native rating interval and [-1, 1].
struct RatingScale {
  double min_rating = 1.0;
  double max_rating = 5.0;

  bool valid() const { return min_rating < max_rating; }
  double midpoint() const { return 0.5 * (min_rating + max_rating); }

  double to_unit(double r) const {
    return 2.0 * (r - min_rating) / (max_rating - min_rating) - 1.0;
  }
  double from_unit(double v) const {
    return (v + 1.0) * 0.5 * (max_rating - min_rating) + min_rating;
  }
};

/// Whether rows of the sparse store are user vectors or item vectors.
/// The same container backs both model orientations; transpose() flips it.
enum class Orientation : std::uint8_t { kUserRows = 0, kItemRows = 1 };

inline const char* orientation_name(Orientation o) {
  return o == Orientation::kUserRows ? "user-rows" : "item-rows";
}
inline Orientation flip(Orientation o) {
  return o == Orientation::kUserRows ? Orientation::kItemRows : Orientation::kUserRows;
}

struct RatingEntry {
  std::uint32_t col;
  double value;

  bool operator==(const RatingEntry&) const = default;
};

struct RatingTriplet {
  std::uint32_t row;
  std::uint32_t col;
  double value;

  bool operator==(const RatingTriplet&) const = default;
};

/// Row-indexed sparse rating matrix (CSR). Column indices within a row are
/// strictly increasing; duplicate (row, col) pairs are resolved at build
/// time by keeping the last occurrence. Immutable after construction.
class SparseRatings {
 public:
  SparseRatings() = default;
  SparseRatings(std::size_t n_rows, std::size_t n_cols, Orientation orientation);

  /// Builds from unordered triplets. Duplicates keep the last occurrence in
  /// input order and emit one warning with the duplicate count.
  static SparseRatings from_triplets(std::size_t n_rows, std::size_t n_cols,
                                     Orientation orientation,
                                     std::vector<RatingTriplet> triplets);

  std::size_t rows() const { return n_rows_; }
  std::size_t cols() const { return n_cols_; }
  std::size_t nnz() const { return entries_.size(); }
  Orientation orientation() const { return orientation_; }

  std::span<const RatingEntry> row(std::size_t i) const {
    return {entries_.data() + row_ptr_[i], entries_.data() + row_ptr_[i + 1]};
  }
  std::size_t row_nnz(std::size_t i) const { return row_ptr_[i + 1] - row_ptr_[i]; }

  std::vector<RatingTriplet> to_triplets() const;

  /// Value stored at (i, j) if (i, j) is a known entry.
  const double* find(std::size_t i, std::uint32_t j) const;

  template <typename F>
  void for_each(F&& f) const {  // f(row, col, value)
    for (std::size_t i = 0; i < n_rows_; ++i)
      for (const auto& e : row(i)) f(i, e.col, e.value);
  }

 private:
  friend SparseRatings map_values(const SparseRatings&, double (*)(double, const void*), const void*);
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  Orientation orientation_ = Orientation::kUserRows;
  std::vector<std::size_t> row_ptr_ = {0};
  std::vector<RatingEntry> entries_;
};

/// Per-row means learned on the training set, added back at evaluation.
/// Rows with no training entries fall back to a zero bias, i.e. the
/// midpoint of the normalized scale.
struct BiasModel {
  double global_mean = 0.0;
  std::vector<double> row_means;
  std::vector<std::uint32_t> row_counts;

  double bias_for(std::size_t row) const {
    return row < row_counts.size() && row_counts[row] > 0 ? row_means[row] : 0.0;
  }
};

struct SplitSpec {
  double train_fraction = 0.9;
  std::uint64_t rng_seed = 0;
};

/// Maps every stored value through the scale's affine [-1, 1] map.
/// Throws a data error naming (row, col) for values outside the scale.
SparseRatings normalize(const SparseRatings& ratings, const RatingScale& scale);

/// Inverse of normalize (used when writing canonical files).
SparseRatings denormalize(const SparseRatings& ratings, const RatingScale& scale);

/// Subtracts each row's training mean from its entries and returns the bias
/// model needed to re-add it at evaluation time.
std::pair<SparseRatings, BiasModel> unbias(const SparseRatings& train);

/// Assigns each known entry independently to train with probability
/// train_fraction; deterministic per seed, entries partitioned exactly.
std::pair<SparseRatings, SparseRatings> split(const SparseRatings& ratings,
                                              const SplitSpec& spec);

SparseRatings transpose(const SparseRatings& ratings);

}  // namespace cfrec
