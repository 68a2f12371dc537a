#pragma once

#include <Eigen/Dense>

namespace dovf {

/// Dense row-major matrix used for all numeric work (one observation per row).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace dovf
