#pragma once

#include <stdexcept>
#include <string>

#include "latsum/types.hpp"

namespace latsum {

/// Dense order-3 array with the first index fastest.  Used for Tucker cores
/// and as the materialized oracle carrier; never on the large virtual grids.
template <typename Scalar = double>
class Tensor3 {
 public:
  Tensor3() : dims_{0, 0, 0} {}
  explicit Tensor3(Dims3 dims) : dims_(dims), data_(VectorX<Scalar>::Zero(total_size(dims))) {}

  const Dims3& dims() const { return dims_; }
  Index dim(int mode) const { return dims_[mode]; }
  Index size() const { return data_.size(); }

  Scalar& operator()(Index i, Index j, Index k) { return data_[i + dims_[0] * (j + dims_[1] * k)]; }
  Scalar operator()(Index i, Index j, Index k) const {
    return data_[i + dims_[0] * (j + dims_[1] * k)];
  }

  VectorX<Scalar>& data() { return data_; }
  const VectorX<Scalar>& data() const { return data_; }

  /// View of the k-th mode-3 slab as an n1 x n2 matrix.
  Eigen::Map<MatrixX<Scalar>> slab(Index k) {
    return Eigen::Map<MatrixX<Scalar>>(data_.data() + dims_[0] * dims_[1] * k, dims_[0], dims_[1]);
  }
  Eigen::Map<const MatrixX<Scalar>> slab(Index k) const {
    return Eigen::Map<const MatrixX<Scalar>>(data_.data() + dims_[0] * dims_[1] * k, dims_[0],
                                             dims_[1]);
  }

  void setZero() { data_.setZero(); }

  Scalar fnorm() const { return data_.norm(); }
  Scalar fnorm2() const { return data_.squaredNorm(); }

  /// Mode-l unfolding: rows indexed by i_l, columns by the remaining indices
  /// with the lower-numbered mode fastest.
  MatrixX<Scalar> unfold(int mode) const {
    const Index n = dims_[mode];
    MatrixX<Scalar> out(n, size() / std::max<Index>(n, 1));
    Index col = 0;
    if (mode == 0) {
      for (Index k = 0; k < dims_[2]; ++k)
        for (Index j = 0; j < dims_[1]; ++j, ++col)
          for (Index i = 0; i < dims_[0]; ++i) out(i, col) = (*this)(i, j, k);
    } else if (mode == 1) {
      for (Index k = 0; k < dims_[2]; ++k)
        for (Index i = 0; i < dims_[0]; ++i, ++col)
          for (Index j = 0; j < dims_[1]; ++j) out(j, col) = (*this)(i, j, k);
    } else {
      for (Index j = 0; j < dims_[1]; ++j)
        for (Index i = 0; i < dims_[0]; ++i, ++col)
          for (Index k = 0; k < dims_[2]; ++k) out(k, col) = (*this)(i, j, k);
    }
    return out;
  }

  static Tensor3 fold(const MatrixX<Scalar>& mat, int mode, Dims3 dims) {
    Tensor3 out(dims);
    Index col = 0;
    if (mode == 0) {
      for (Index k = 0; k < dims[2]; ++k)
        for (Index j = 0; j < dims[1]; ++j, ++col)
          for (Index i = 0; i < dims[0]; ++i) out(i, j, k) = mat(i, col);
    } else if (mode == 1) {
      for (Index k = 0; k < dims[2]; ++k)
        for (Index i = 0; i < dims[0]; ++i, ++col)
          for (Index j = 0; j < dims[1]; ++j) out(i, j, k) = mat(j, col);
    } else {
      for (Index j = 0; j < dims[1]; ++j)
        for (Index i = 0; i < dims[0]; ++i, ++col)
          for (Index k = 0; k < dims[2]; ++k) out(i, j, k) = mat(k, col);
    }
    return out;
  }

  /// Tensor-times-matrix in the given mode: result has dim(mode) = mat.rows().
  Tensor3 ttm(const MatrixX<Scalar>& mat, int mode) const {
    if (mat.cols() != dims_[mode])
      throw std::invalid_argument("ttm: matrix columns must match mode dimension");
    Dims3 nd = dims_;
    nd[mode] = mat.rows();
    return fold(mat * unfold(mode), mode, nd);
  }

 private:
  Dims3 dims_;
  VectorX<Scalar> data_;
};

/// Guard against accidental materialization of virtual grids.  Default limit
/// 1e7 entries.
inline void ensure_dense_guard(const Dims3& dims, Index limit = 10'000'000) {
  if (total_size(dims) > limit)
    throw std::length_error("dense materialization of " + std::to_string(total_size(dims)) +
                            " entries exceeds the guard limit " + std::to_string(limit));
}

}  // namespace latsum
