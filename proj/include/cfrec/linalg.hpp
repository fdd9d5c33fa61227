#pragma once

#include <Eigen/Core>

namespace cfrec {

// Row-major storage for matrices that are consumed one row at a time
// (decoder weights, per-entity feature vectors).
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace cfrec
