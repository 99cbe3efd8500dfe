#pragma once

#include <Eigen/Dense>

namespace embedllm {

/// Row-major so that per-model and per-question rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace embedllm
