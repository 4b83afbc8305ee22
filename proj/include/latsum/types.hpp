#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>

namespace latsum {

using Index = Eigen::Index;
using Dims3 = std::array<Index, 3>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Array3 = Eigen::Array<Scalar, 3, 1>;

using Int3 = std::array<int, 3>;

inline Index total_size(const Dims3& d) { return d[0] * d[1] * d[2]; }

}  // namespace latsum
