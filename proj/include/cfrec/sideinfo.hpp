#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cfrec/ingest.hpp"
#include "cfrec/linalg.hpp"

namespace cfrec {

/// Dense per-entity feature vectors attached to autoencoder inputs.
/// The feature dimension must stay below the bottleneck when attached to a
/// model; that constraint is checked at model build time, not here.
struct SideFeatures {
  struct Block {
    std::string name;
    std::size_t dim = 0;
  };

  RowMajorMatrix values;  // n_entities x dim; rows are contiguous feature vectors
  std::vector<Block> provenance;

  std::size_t n_entities() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

/// Top-k eigenpairs of the positive semi-definite operator represented by
/// `apply` (dimension n), via power iteration with projection deflation.
/// Eigenvalues come out in non-increasing order; vectors are orthonormal and
/// sign-fixed so each vector's largest-magnitude component is positive.
/// Converged pairs whose eigenvalue is numerically zero are returned as
/// zero vectors with zero eigenvalue.
struct EigenResult {
  Eigen::MatrixXd vectors;   // n x k
  Eigen::VectorXd values;    // k
  std::size_t rank = 0;      // number of numerically nonzero eigenvalues
};
EigenResult top_eigenpairs(std::size_t n, std::size_t k,
                           const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply,
                           std::uint64_t seed = 7, double tol = 1e-10,
                           std::size_t max_iterations = 10000);

/// Compresses a tag-count matrix to `components` columns: column j of the
/// result is the j-th left singular direction of T scaled so its squared
/// norm equals the j-th eigenvalue of T*T'. Requests past the numerical
/// rank are padded with zero columns and warned about.
SideFeatures pca_compress(const TagMatrix& tags, std::size_t components);

SideFeatures from_categories(const CategoryMatrix& categories, const std::string& name = "categories");

/// One-hot gender/occupation plus min-max scaled age.
SideFeatures encode_demographics(const Demographics& demo);

/// Horizontal concatenation; all blocks must agree on n_entities.
SideFeatures assemble(const std::vector<SideFeatures>& blocks);

/// TSV persistence: `entity_index<TAB>v1,v2,...`.
void write_side_features(const std::string& path, const SideFeatures& features);
SideFeatures read_side_features(const std::string& path);

}  // namespace cfrec
