#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "latsum/canonical.hpp"
#include "latsum/linalg.hpp"
#include "latsum/tensor3.hpp"
#include "latsum/types.hpp"

namespace latsum {

/// Rank-(r1,r2,r3) Tucker tensor: core B contracted with one factor matrix per
/// mode.  Factors are column-orthonormal in the canonical state (then
/// ||T||_F = ||B||_F); assembled lattice sums produce non-orthonormal factors
/// and are re-orthonormalized explicitly via orthonormalize().
template <typename Scalar = double>
class TuckerTensor {
 public:
  TuckerTensor() : dims_{0, 0, 0} {}
  TuckerTensor(Dims3 dims, Tensor3<Scalar> core, std::array<MatrixX<Scalar>, 3> factors)
      : dims_(dims), core_(std::move(core)), factors_(std::move(factors)) {
    for (int l = 0; l < 3; ++l) {
      if (factors_[l].rows() != dims_[l] || factors_[l].cols() != core_.dim(l))
        throw std::invalid_argument("TuckerTensor: factor shape mismatch");
    }
  }

  const Dims3& dims() const { return dims_; }
  Dims3 ranks() const { return core_.dims(); }
  const Tensor3<Scalar>& core() const { return core_; }
  Tensor3<Scalar>& core() { return core_; }
  const MatrixX<Scalar>& factor(int mode) const { return factors_[mode]; }
  MatrixX<Scalar>& factor(int mode) { return factors_[mode]; }

  Scalar entry(Index i, Index j, Index k) const {
    if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2])
      throw std::out_of_range("TuckerTensor::entry index out of range");
    const auto r = core_.dims();
    // contract mode by mode against the three factor rows
    Scalar v = 0;
    for (Index c = 0; c < r[2]; ++c) {
      Scalar vc = 0;
      for (Index b = 0; b < r[1]; ++b) {
        Scalar vb = 0;
        for (Index a = 0; a < r[0]; ++a) vb += core_(a, b, c) * factors_[0](i, a);
        vc += vb * factors_[1](j, b);
      }
      v += vc * factors_[2](k, c);
    }
    return v;
  }

  static Scalar default_orthonormal_tol() {
    return Scalar(1000) * std::numeric_limits<Scalar>::epsilon();
  }

  bool factors_orthonormal(Scalar tol = default_orthonormal_tol()) const {
    for (int l = 0; l < 3; ++l) {
      const MatrixX<Scalar> g = factors_[l].transpose() * factors_[l];
      if ((g - MatrixX<Scalar>::Identity(g.rows(), g.cols())).template lpNorm<Eigen::Infinity>() > tol)
        return false;
    }
    return true;
  }

 private:
  Dims3 dims_;
  Tensor3<Scalar> core_;
  std::array<MatrixX<Scalar>, 3> factors_;
};

/// Exact diagonal-core Tucker form of a canonical tensor (ranks (R,R,R)).
template <typename Scalar>
TuckerTensor<Scalar> as_diagonal_tucker(const CanonicalTensor<Scalar>& a) {
  const Index r = a.rank();
  Tensor3<Scalar> core(Dims3{r, r, r});
  for (Index q = 0; q < r; ++q) core(q, q, q) = a.weights()[q];
  return TuckerTensor<Scalar>(a.dims(), std::move(core), {a.factor(0), a.factor(1), a.factor(2)});
}

template <typename Scalar>
Scalar inner(const TuckerTensor<Scalar>& a, const TuckerTensor<Scalar>& b) {
  require_same_dims<Scalar>(a.dims(), b.dims(), "inner");
  Tensor3<Scalar> c = b.core();
  for (int l = 0; l < 3; ++l)
    c = c.ttm(MatrixX<Scalar>(a.factor(l).transpose() * b.factor(l)), l);
  return a.core().data().dot(c.data());
}

template <typename Scalar>
Scalar inner(const CanonicalTensor<Scalar>& a, const TuckerTensor<Scalar>& b) {
  require_same_dims<Scalar>(a.dims(), b.dims(), "inner");
  // project each canonical column through the factors, contract with the core
  std::array<MatrixX<Scalar>, 3> p;
  for (int l = 0; l < 3; ++l) p[l] = b.factor(l).transpose() * a.factor(l);  // r_l x R
  Scalar v = 0;
  const auto r = b.core().dims();
  for (Index q = 0; q < a.rank(); ++q) {
    Scalar s = 0;
    for (Index c = 0; c < r[2]; ++c) {
      Scalar sc = 0;
      for (Index bb = 0; bb < r[1]; ++bb) {
        Scalar sb = 0;
        for (Index aa = 0; aa < r[0]; ++aa) sb += b.core()(aa, bb, c) * p[0](aa, q);
        sc += sb * p[1](bb, q);
      }
      s += sc * p[2](c, q);
    }
    v += a.weights()[q] * s;
  }
  return v;
}

template <typename Scalar>
Scalar inner(const TuckerTensor<Scalar>& a, const CanonicalTensor<Scalar>& b) {
  return inner(b, a);
}

template <typename Scalar>
Scalar norm_f(const TuckerTensor<Scalar>& t) {
  const Scalar s = inner(t, t);
  return s > Scalar(0) ? std::sqrt(s) : Scalar(0);
}

/// QR-orthonormalize every factor, folding the triangular transforms into the
/// core.  Entries are preserved; rank may shrink if a factor was numerically
/// column-deficient.
template <typename Scalar>
TuckerTensor<Scalar> orthonormalize(const TuckerTensor<Scalar>& t) {
  Tensor3<Scalar> core = t.core();
  std::array<MatrixX<Scalar>, 3> f;
  for (int l = 0; l < 3; ++l) {
    QrResult<Scalar> qr = gram_schmidt<Scalar>(t.factor(l));
    f[l] = std::move(qr.q);
    core = core.ttm(qr.transform, l);
  }
  return TuckerTensor<Scalar>(t.dims(), std::move(core), std::move(f));
}

/// Structured sum: block cores, concatenated factors.  Rank adds per mode.
template <typename Scalar>
TuckerTensor<Scalar> tucker_concat(const TuckerTensor<Scalar>& a, const TuckerTensor<Scalar>& b) {
  require_same_dims<Scalar>(a.dims(), b.dims(), "tucker_concat");
  const Dims3 ra = a.ranks(), rb = b.ranks();
  Dims3 rc{ra[0] + rb[0], ra[1] + rb[1], ra[2] + rb[2]};
  Tensor3<Scalar> core(rc);
  for (Index k = 0; k < ra[2]; ++k)
    for (Index j = 0; j < ra[1]; ++j)
      for (Index i = 0; i < ra[0]; ++i) core(i, j, k) = a.core()(i, j, k);
  for (Index k = 0; k < rb[2]; ++k)
    for (Index j = 0; j < rb[1]; ++j)
      for (Index i = 0; i < rb[0]; ++i) core(ra[0] + i, ra[1] + j, ra[2] + k) = b.core()(i, j, k);
  std::array<MatrixX<Scalar>, 3> f;
  for (int l = 0; l < 3; ++l) {
    f[l].resize(a.dims()[l], rc[l]);
    f[l].leftCols(ra[l]) = a.factor(l);
    f[l].rightCols(rb[l]) = b.factor(l);
  }
  return TuckerTensor<Scalar>(a.dims(), std::move(core), std::move(f));
}

template <typename Scalar>
TuckerTensor<Scalar> scale(const TuckerTensor<Scalar>& t, Scalar c) {
  Tensor3<Scalar> core = t.core();
  core.data() *= c;
  return TuckerTensor<Scalar>(t.dims(), std::move(core), {t.factor(0), t.factor(1), t.factor(2)});
}

template <typename Scalar>
Tensor3<Scalar> to_dense(const TuckerTensor<Scalar>& t, Index guard = 10'000'000) {
  ensure_dense_guard(t.dims(), guard);
  Tensor3<Scalar> out = t.core();
  for (int l = 0; l < 3; ++l) out = out.ttm(t.factor(l), l);
  return out;
}

}  // namespace latsum
