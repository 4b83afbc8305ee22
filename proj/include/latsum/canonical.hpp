#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "latsum/tensor3.hpp"
#include "latsum/types.hpp"

namespace latsum {

/// Rank-R canonical tensor: sum_nu xi_nu a1_nu (x) a2_nu (x) a3_nu with the
/// mode vectors stored as unit-norm columns of three side matrices and the
/// scalar weights kept separate.  Keeping the weights out of the columns makes
/// the stability quantity sum xi^2 / ||A||^2 directly computable.
template <typename Scalar = double>
class CanonicalTensor {
 public:
  CanonicalTensor() : dims_{0, 0, 0} {}

  /// Takes columns as given: caller guarantees unit norms.
  CanonicalTensor(Dims3 dims, VectorX<Scalar> weights, std::array<MatrixX<Scalar>, 3> factors)
      : dims_(dims), weights_(std::move(weights)), factors_(std::move(factors)) {
    check_shapes();
  }

  /// Normalizes raw columns, folding their norms into the weights.  A zero
  /// column yields a zero weight and a unit placeholder column.
  static CanonicalTensor from_raw(Dims3 dims, VectorX<Scalar> weights,
                                  std::array<MatrixX<Scalar>, 3> factors) {
    const Index r = weights.size();
    for (int l = 0; l < 3; ++l) {
      for (Index q = 0; q < r; ++q) {
        const Scalar nrm = factors[l].col(q).norm();
        if (nrm == Scalar(0)) {
          weights[q] = Scalar(0);
          factors[l](0, q) = Scalar(1);
        } else {
          factors[l].col(q) /= nrm;
          weights[q] *= nrm;
        }
      }
    }
    return CanonicalTensor(dims, std::move(weights), std::move(factors));
  }

  static CanonicalTensor zero(Dims3 dims) {
    std::array<MatrixX<Scalar>, 3> f;
    for (int l = 0; l < 3; ++l) f[l] = MatrixX<Scalar>::Zero(dims[l], 0);
    return CanonicalTensor(dims, VectorX<Scalar>(), std::move(f));
  }

  const Dims3& dims() const { return dims_; }
  Index rank() const { return weights_.size(); }
  const VectorX<Scalar>& weights() const { return weights_; }
  const MatrixX<Scalar>& factor(int mode) const { return factors_[mode]; }
  MatrixX<Scalar>& factor(int mode) { return factors_[mode]; }
  VectorX<Scalar>& weights() { return weights_; }

  Scalar entry(Index i, Index j, Index k) const {
    if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2])
      throw std::out_of_range("CanonicalTensor::entry index out of range");
    Scalar v = 0;
    for (Index q = 0; q < rank(); ++q)
      v += weights_[q] * factors_[0](i, q) * factors_[1](j, q) * factors_[2](k, q);
    return v;
  }

 private:
  void check_shapes() const {
    for (int l = 0; l < 3; ++l) {
      if (factors_[l].rows() != dims_[l] || factors_[l].cols() != weights_.size())
        throw std::invalid_argument("CanonicalTensor: side matrix shape mismatch in mode " +
                                    std::to_string(l + 1));
    }
  }

  Dims3 dims_;
  VectorX<Scalar> weights_;
  std::array<MatrixX<Scalar>, 3> factors_;
};

template <typename Scalar>
void require_same_dims(const Dims3& a, const Dims3& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": mode size mismatch");
  (void)sizeof(Scalar);
}

/// Sum by concatenation: rank(out) = rank(a) + rank(b), entries add exactly.
template <typename Scalar>
CanonicalTensor<Scalar> add_concat(const CanonicalTensor<Scalar>& a, const CanonicalTensor<Scalar>& b) {
  require_same_dims<Scalar>(a.dims(), b.dims(), "add_concat");
  const Index ra = a.rank(), rb = b.rank();
  VectorX<Scalar> w(ra + rb);
  w.head(ra) = a.weights();
  w.tail(rb) = b.weights();
  std::array<MatrixX<Scalar>, 3> f;
  for (int l = 0; l < 3; ++l) {
    f[l].resize(a.dims()[l], ra + rb);
    f[l].leftCols(ra) = a.factor(l);
    f[l].rightCols(rb) = b.factor(l);
  }
  return CanonicalTensor<Scalar>(a.dims(), std::move(w), std::move(f));
}

template <typename Scalar>
CanonicalTensor<Scalar> scale(const CanonicalTensor<Scalar>& a, Scalar c) {
  VectorX<Scalar> w = a.weights() * c;
  return CanonicalTensor<Scalar>(a.dims(), std::move(w), {a.factor(0), a.factor(1), a.factor(2)});
}

/// Rank-preserving sum of two equal-rank tensors sharing the side matrices in
/// two modes: the free-mode columns (weights folded in) add pointwise.
/// Shared factors must agree columnwise within `tol`, including the pairing of
/// weights, or the precondition is violated.
template <typename Scalar>
CanonicalTensor<Scalar> add_shared_factors(const CanonicalTensor<Scalar>& a,
                                           const CanonicalTensor<Scalar>& b, int shared1, int shared2,
                                           Scalar tol = Scalar(1e-14)) {
  require_same_dims<Scalar>(a.dims(), b.dims(), "add_shared_factors");
  if (a.rank() != b.rank())
    throw std::invalid_argument("add_shared_factors: ranks must match");
  int free_mode = 3 - shared1 - shared2;
  if (shared1 == shared2 || free_mode < 0 || free_mode > 2)
    throw std::invalid_argument("add_shared_factors: invalid shared mode pair");
  for (int l : {shared1, shared2}) {
    const Scalar diff = (a.factor(l) - b.factor(l)).norm();
    const Scalar ref = std::max(a.factor(l).norm(), Scalar(1));
    if (diff > tol * ref)
      throw std::invalid_argument("add_shared_factors: shared side matrices differ in mode " +
                                  std::to_string(l + 1));
  }
  MatrixX<Scalar> free(a.dims()[free_mode], a.rank());
  for (Index q = 0; q < a.rank(); ++q)
    free.col(q) =
        a.weights()[q] * a.factor(free_mode).col(q) + b.weights()[q] * b.factor(free_mode).col(q);
  std::array<MatrixX<Scalar>, 3> f;
  f[shared1] = a.factor(shared1);
  f[shared2] = a.factor(shared2);
  f[free_mode] = std::move(free);
  return CanonicalTensor<Scalar>::from_raw(a.dims(), VectorX<Scalar>::Ones(a.rank()), std::move(f));
}

/// Frobenius inner product via 1D scalar products: xi_a^T [ (A1^T B1) o (A2^T B2) o (A3^T B3) ] xi_b.
template <typename Scalar>
Scalar inner(const CanonicalTensor<Scalar>& a, const CanonicalTensor<Scalar>& b) {
  require_same_dims<Scalar>(a.dims(), b.dims(), "inner");
  if (a.rank() == 0 || b.rank() == 0) return Scalar(0);
  MatrixX<Scalar> g = (a.factor(0).transpose() * b.factor(0))
                          .cwiseProduct(a.factor(1).transpose() * b.factor(1))
                          .cwiseProduct(a.factor(2).transpose() * b.factor(2));
  return a.weights().dot(g * b.weights());
}

template <typename Scalar>
Scalar norm_f(const CanonicalTensor<Scalar>& a) {
  const Scalar s = inner(a, a);
  return s > Scalar(0) ? std::sqrt(s) : Scalar(0);
}

/// Entrywise product of two rank-1 tensors: mode vectors multiply entrywise.
template <typename Scalar>
CanonicalTensor<Scalar> hadamard_rank1(const CanonicalTensor<Scalar>& g,
                                       const CanonicalTensor<Scalar>& h) {
  require_same_dims<Scalar>(g.dims(), h.dims(), "hadamard_rank1");
  if (g.rank() != 1 || h.rank() != 1)
    throw std::invalid_argument("hadamard_rank1: both operands must be rank 1");
  std::array<MatrixX<Scalar>, 3> f;
  for (int l = 0; l < 3; ++l) f[l] = g.factor(l).col(0).cwiseProduct(h.factor(l).col(0));
  return CanonicalTensor<Scalar>::from_raw(g.dims(), g.weights().cwiseProduct(h.weights()),
                                           std::move(f));
}

/// Sampled max-norm over a seeded random probe set.  The exact max-norm of a
/// virtual grid is infeasible; callers on small grids can take the exact max
/// of to_dense instead.
template <typename TensorT>
auto sampled_max_abs(const TensorT& t, int probes, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const auto d = t.dims();
  std::uniform_int_distribution<Index> di(0, d[0] - 1), dj(0, d[1] - 1), dk(0, d[2] - 1);
  auto best = std::abs(t.entry(0, 0, 0));
  for (int p = 0; p < probes; ++p)
    best = std::max(best, std::abs(t.entry(di(gen), dj(gen), dk(gen))));
  return best;
}

/// Guarded exact materialization; oracle use only.
template <typename Scalar>
Tensor3<Scalar> to_dense(const CanonicalTensor<Scalar>& a, Index guard = 10'000'000) {
  ensure_dense_guard(a.dims(), guard);
  Tensor3<Scalar> out(a.dims());
  for (Index q = 0; q < a.rank(); ++q) {
    const MatrixX<Scalar> g = a.factor(0).col(q) * a.factor(1).col(q).transpose();
    for (Index k = 0; k < a.dims()[2]; ++k)
      out.slab(k) += (a.weights()[q] * a.factor(2)(k, q)) * g;
  }
  return out;
}

}  // namespace latsum
