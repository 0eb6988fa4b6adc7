#pragma once

#include <Eigen/Core>

namespace pdca {

using Index = Eigen::Index;

/// State-by-action table. Row-major so that the flattened index of
/// (s, a) is `s * n_actions + a`, which is the layout the LP, the
/// transition tensor and the serialized formats all share.
template <typename Scalar>
using Table = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Column-major dense matrix, used for linear solves.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline Index flat_index(Index s, Index a, Index n_actions) { return s * n_actions + a; }

}  // namespace pdca
