#include "cfrec/ratings.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace cfrec {

SparseRatings::SparseRatings(std::size_t n_rows, std::size_t n_cols, Orientation orientation)
    : n_rows_(n_rows), n_cols_(n_cols), orientation_(orientation) {
  row_ptr_.assign(n_rows + 1, 0);
}

SparseRatings SparseRatings::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                           Orientation orientation,
                                           std::vector<RatingTriplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= n_rows || t.col >= n_cols) {
      std::ostringstream os;
      os << "rating index (" << t.row << ", " << t.col << ") outside " << n_rows
         << "x" << n_cols << " matrix";
      throw Error::data(os.str());
    }
  }
  // Stable sort keeps input order within a (row, col) group so the last
  // occurrence wins on duplicates.
  std::stable_sort(triplets.begin(), triplets.end(),
                   [](const RatingTriplet& a, const RatingTriplet& b) {
                     return a.row != b.row ? a.row < b.row : a.col < b.col;
                   });

  SparseRatings out(n_rows, n_cols, orientation);
  out.entries_.reserve(triplets.size());
  std::size_t duplicates = 0;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    while (i + 1 < triplets.size() && triplets[i + 1].row == triplets[i].row &&
           triplets[i + 1].col == triplets[i].col) {
      ++i;
      ++duplicates;
    }
    out.entries_.push_back({triplets[i].col, triplets[i].value});
    ++out.row_ptr_[triplets[i].row + 1];
  }
  for (std::size_t r = 0; r < n_rows; ++r) out.row_ptr_[r + 1] += out.row_ptr_[r];
  if (duplicates > 0) {
    warn(std::to_string(duplicates) +
         " duplicate (row, col) rating(s); kept the last occurrence of each");
  }
  return out;
}

std::vector<RatingTriplet> SparseRatings::to_triplets() const {
  std::vector<RatingTriplet> out;
  out.reserve(nnz());
  for_each([&](std::size_t i, std::uint32_t j, double v) {
    out.push_back({static_cast<std::uint32_t>(i), j, v});
  });
  return out;
}

const double* SparseRatings::find(std::size_t i, std::uint32_t j) const {
  auto r = row(i);
  auto it = std::lower_bound(r.begin(), r.end(), j,
                             [](const RatingEntry& e, std::uint32_t col) { return e.col < col; });
  if (it != r.end() && it->col == j) return &it->value;
  return nullptr;
}

namespace {

SparseRatings copy_structure(const SparseRatings& src) { return src; }

}  // namespace

SparseRatings normalize(const SparseRatings& ratings, const RatingScale& scale) {
  if (!scale.valid()) throw Error::usage("rating scale requires min_rating < max_rating");
  SparseRatings out = copy_structure(ratings);
  std::vector<RatingTriplet> triplets = out.to_triplets();
  for (auto& t : triplets) {
    if (t.value < scale.min_rating || t.value > scale.max_rating) {
      std::ostringstream os;
      os << "rating " << t.value << " at (" << t.row << ", " << t.col
         << ") outside scale [" << scale.min_rating << ", " << scale.max_rating << "]";
      throw Error::data(os.str());
    }
    t.value = scale.to_unit(t.value);
  }
  return SparseRatings::from_triplets(ratings.rows(), ratings.cols(), ratings.orientation(),
                                      std::move(triplets));
}

SparseRatings denormalize(const SparseRatings& ratings, const RatingScale& scale) {
  if (!scale.valid()) throw Error::usage("rating scale requires min_rating < max_rating");
  std::vector<RatingTriplet> triplets = ratings.to_triplets();
  for (auto& t : triplets) t.value = scale.from_unit(t.value);
  return SparseRatings::from_triplets(ratings.rows(), ratings.cols(), ratings.orientation(),
                                      std::move(triplets));
}

std::pair<SparseRatings, BiasModel> unbias(const SparseRatings& train) {
  BiasModel bias;
  bias.row_means.assign(train.rows(), 0.0);
  bias.row_counts.assign(train.rows(), 0);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < train.rows(); ++i) {
    double sum = 0.0;
    auto r = train.row(i);
    for (const auto& e : r) sum += e.value;
    bias.row_counts[i] = static_cast<std::uint32_t>(r.size());
    if (!r.empty()) bias.row_means[i] = sum / static_cast<double>(r.size());
    total += sum;
    count += r.size();
  }
  if (count == 0) throw Error::data("cannot unbias an empty rating matrix");
  bias.global_mean = total / static_cast<double>(count);

  std::vector<RatingTriplet> triplets = train.to_triplets();
  for (auto& t : triplets) t.value -= bias.row_means[t.row];
  auto unbiased = SparseRatings::from_triplets(train.rows(), train.cols(), train.orientation(),
                                               std::move(triplets));
  return {std::move(unbiased), std::move(bias)};
}

std::pair<SparseRatings, SparseRatings> split(const SparseRatings& ratings,
                                              const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
    throw Error::usage("train_fraction must be in (0, 1]");
  }
  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<RatingTriplet> train_t, test_t;
  train_t.reserve(ratings.nnz());
  ratings.for_each([&](std::size_t i, std::uint32_t j, double v) {
    RatingTriplet t{static_cast<std::uint32_t>(i), j, v};
    if (uniform(rng) < spec.train_fraction) {
      train_t.push_back(t);
    } else {
      test_t.push_back(t);
    }
  });
  auto train = SparseRatings::from_triplets(ratings.rows(), ratings.cols(),
                                            ratings.orientation(), std::move(train_t));
  auto test = SparseRatings::from_triplets(ratings.rows(), ratings.cols(),
                                           ratings.orientation(), std::move(test_t));
  return {std::move(train), std::move(test)};
}

SparseRatings transpose(const SparseRatings& ratings) {
  std::vector<RatingTriplet> triplets = ratings.to_triplets();
  for (auto& t : triplets) std::swap(t.row, t.col);
  return SparseRatings::from_triplets(ratings.cols(), ratings.rows(),
                                      flip(ratings.orientation()), std::move(triplets));
}

}  // namespace cfrec
