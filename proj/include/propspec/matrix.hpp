#pragma once

#include <Eigen/Dense>

namespace propspec {

/// Feature matrices are row-major: one row per sequence.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

} // namespace propspec
