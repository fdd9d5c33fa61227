#include "cfrec/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cfrec {

namespace {

// One half-step: solve every row of `out` against the fixed `other` factor
// using the known entries of `mat`. Ridge term scaled by the row count.
void solve_half_step(const SparseRatings& mat, const RowMajorMatrix& other, double lambda,
                     RowMajorMatrix& out, std::atomic<std::size_t>& jitter_count) {
  const Eigen::Index k = other.cols();
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
  for (std::size_t i = 0; i < mat.rows(); ++i) {
    auto row = mat.row(i);
    if (row.empty()) {
      out.row(static_cast<Eigen::Index>(i)).setZero();
      continue;
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (const auto& e : row) {
      const auto v = other.row(e.col);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(v.transpose(), 1.0);
      rhs.noalias() += v.transpose() * e.value;
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    gram.diagonal().array() += lambda * static_cast<double>(row.size());

    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      gram.diagonal().array() += 1e-10;
      ldlt.compute(gram);
      ++jitter_count;
    }
    out.row(static_cast<Eigen::Index>(i)) = ldlt.solve(rhs).transpose();
  }
}

}  // namespace

double mf_objective(const MFModel& model, const SparseRatings& train) {
  double obj = 0.0;
  train.for_each([&](std::size_t i, std::uint32_t j, double v) {
    const double err = v - model.row_factors.row(static_cast<Eigen::Index>(i))
                               .dot(model.col_factors.row(j));
    obj += err * err;
  });
  if (model.lambda > 0.0) {
    for (std::size_t i = 0; i < train.rows(); ++i) {
      obj += model.lambda * static_cast<double>(train.row_nnz(i)) *
             model.row_factors.row(static_cast<Eigen::Index>(i)).squaredNorm();
    }
    std::vector<std::size_t> col_counts(train.cols(), 0);
    train.for_each([&](std::size_t, std::uint32_t j, double) { ++col_counts[j]; });
    for (std::size_t j = 0; j < train.cols(); ++j) {
      obj += model.lambda * static_cast<double>(col_counts[j]) *
             model.col_factors.row(static_cast<Eigen::Index>(j)).squaredNorm();
    }
  }
  return obj;
}

MFModel als_wr(const SparseRatings& train, std::size_t rank, double lambda,
               std::size_t iterations, std::uint64_t seed, int threads) {
  if (rank < 1) throw Error::usage("als rank must be at least 1");
  if (lambda < 0.0) throw Error::usage("als lambda must be non-negative");
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  MFModel model;
  model.rank = rank;
  model.lambda = lambda;
  model.row_factors = RowMajorMatrix::Zero(static_cast<Eigen::Index>(train.rows()),
                                           static_cast<Eigen::Index>(rank));
  model.col_factors.resize(static_cast<Eigen::Index>(train.cols()),
                           static_cast<Eigen::Index>(rank));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-0.01, 0.01);
  for (Eigen::Index i = 0; i < model.col_factors.rows(); ++i)
    for (Eigen::Index j = 0; j < model.col_factors.cols(); ++j)
      model.col_factors(i, j) = uniform(rng);

  const SparseRatings transposed = transpose(train);
  std::atomic<std::size_t> jitter_count{0};
  for (std::size_t it = 0; it < iterations; ++it) {
    solve_half_step(train, model.col_factors, lambda, model.row_factors, jitter_count);
    model.objective_trace.push_back(mf_objective(model, train));
    solve_half_step(transposed, model.row_factors, lambda, model.col_factors, jitter_count);
    model.objective_trace.push_back(mf_objective(model, train));
  }
  if (jitter_count > 0) {
    warn("als: " + std::to_string(jitter_count.load()) +
         " singular normal system(s) stabilized with 1e-10 jitter");
  }
  return model;
}

double mf_predict(const MFModel& model, std::size_t row, std::size_t col) {
  if (row >= static_cast<std::size_t>(model.row_factors.rows()) ||
      col >= static_cast<std::size_t>(model.col_factors.rows())) {
    throw Error::usage("mf_predict index out of range");
  }
  return model.row_factors.row(static_cast<Eigen::Index>(row))
      .dot(model.col_factors.row(static_cast<Eigen::Index>(col)));
}

double FactorEstimator::predict(std::size_t row, std::uint32_t col) const {
  const double raw = mf_predict(model_, row, col) + bias_.bias_for(row);
  return scale_.from_unit(std::clamp(raw, -1.0, 1.0));
}

EquivalenceReport equivalence_check(const AutoencoderModel& model, const SparseRatings& inputs,
                                    double deviation_tolerance, double sigma_tolerance) {
  if (model.side_dim != 0 || model.hidden_transfer != Transfer::kIdentity ||
      model.output_transfer != Transfer::kIdentity) {
    throw Error::usage("equivalence check requires identity transfers and no side information");
  }
  if (inputs.cols() != model.input_dim) {
    throw Error::usage("equivalence check inputs do not match the model input dimension");
  }
  if (inputs.rows() < model.bottleneck + 2) {
    throw Error::usage("equivalence check needs at least bottleneck+2 input rows");
  }

  const LinearDecomposition dec = decompose_linear(model);
  EquivalenceReport report;
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(inputs.rows()),
                          static_cast<Eigen::Index>(model.input_dim));
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const Eigen::VectorXd prediction = forward(model, inputs.row(i));
    const Eigen::VectorXd via_factor = dec.factor * linear_code(model, inputs.row(i));
    report.max_deviation =
        std::max(report.max_deviation, (prediction - via_factor).cwiseAbs().maxCoeff());
    stacked.row(static_cast<Eigen::Index>(i)) = prediction.transpose();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked);
  const auto& sigma = svd.singularValues();
  const Eigen::Index k = static_cast<Eigen::Index>(model.bottleneck);
  if (sigma.size() > k + 1 && sigma[0] > 0.0) {
    report.sigma_ratio = sigma[k + 1] / sigma[0];
  }
  report.passed =
      report.max_deviation < deviation_tolerance && report.sigma_ratio < sigma_tolerance;
  return report;
}

}  // namespace cfrec
