#pragma once

#include <Eigen/Core>

namespace fuselab {

/// Row-major float matrix used for per-point feature blocks (one row per
/// point), so a point's features are contiguous.
using MatrixXfR =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace fuselab
