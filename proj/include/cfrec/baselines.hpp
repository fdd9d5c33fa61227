#pragma once

#include <cstdint>
#include <vector>

#include "cfrec/evaluator.hpp"
#include "cfrec/linalg.hpp"
#include "cfrec/model.hpp"
#include "cfrec/ratings.hpp"

namespace cfrec {

/// Low-rank factor pair; prediction is the row dot product.
struct MFModel {
  RowMajorMatrix row_factors;  // n_rows x rank
  RowMajorMatrix col_factors;  // n_cols x rank
  std::size_t rank = 0;
  double lambda = 0.0;
  // Objective after every half-step (row solve / column solve).
  std::vector<double> objective_trace;
};

/// Alternating least squares with weighted-lambda regularization: each
/// half-step solves exact per-row ridge regressions, with the ridge term
/// scaled by the row's rating count. Singular systems get a 1e-10 jitter
/// and a warning.
MFModel als_wr(const SparseRatings& train, std::size_t rank, double lambda,
               std::size_t iterations, std::uint64_t seed, int threads = 0);

double mf_predict(const MFModel& model, std::size_t row, std::size_t col);

/// Squared-error objective with the weighted-lambda ridge terms.
double mf_objective(const MFModel& model, const SparseRatings& train);

class FactorEstimator : public RatingEstimator {
 public:
  FactorEstimator(const MFModel& model, const BiasModel& bias, RatingScale scale)
      : model_(model), bias_(bias), scale_(scale) {}
  double predict(std::size_t row, std::uint32_t col) const override;

 private:
  const MFModel& model_;
  const BiasModel& bias_;
  RatingScale scale_;
};

/// Checks that a linear autoencoder is an explicit matrix factorization:
/// its predictions over `inputs` must be reproduced by the
/// [decoder | identity] factor applied to the per-row codes, and the
/// stacked prediction matrix must have numerical rank at most k+1.
struct EquivalenceReport {
  double max_deviation = 0.0;    // |factor * code - forward| over all inputs
  double sigma_ratio = 0.0;      // sigma_{k+2} / sigma_1 of stacked predictions
  bool passed = false;
};
EquivalenceReport equivalence_check(const AutoencoderModel& model, const SparseRatings& inputs,
                                    double deviation_tolerance = 1e-10,
                                    double sigma_tolerance = 1e-8);

}  // namespace cfrec
