#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "latsum/canonical.hpp"
#include "latsum/tucker.hpp"
#include "latsum/types.hpp"

namespace latsum {

/// Truncation request: explicit mode ranks, a relative tolerance, or both
/// (rank caps dominate).  ALS controls apply to the refinement stage.
struct TruncationSpec {
  std::optional<Dims3> ranks;
  std::optional<double> tolerance;
  int max_als_sweeps = 30;
  double als_stagnation_tol = 1e-8;

  void validate() const {
    if (!ranks && !tolerance)
      throw std::invalid_argument("TruncationSpec: need ranks or tolerance");
    if (tolerance && !(*tolerance > 0.0 && *tolerance < 1.0))
      throw std::invalid_argument("TruncationSpec: tolerance must lie in (0,1)");
  }
  static TruncationSpec fixed_ranks(Index r1, Index r2, Index r3) {
    TruncationSpec s;
    s.ranks = Dims3{r1, r2, r3};
    return s;
  }
  static TruncationSpec tol(double eps) {
    TruncationSpec s;
    s.tolerance = eps;
    return s;
  }
};

/// Spectral diagnostics of a reduction: per-mode singular values of the
/// (agglomerated) side matrices, the chosen ranks, the discarded-tail error
/// bound ||xi|| * sum_l tail_l (or |B| * sum_l tail_l for Tucker sums), and
/// the stability quantity sum xi^2/||A||^2 resp. sum ||B_s||^2/||U||^2.
template <typename Scalar = double>
struct SpectralReport {
  std::array<VectorX<Scalar>, 3> singular_values;
  Dims3 chosen_ranks{0, 0, 0};
  Scalar bound_abs = 0;        // discarded-tail bound on the absolute error
  Scalar bound_rel = 0;        // sqrt(C_est) * ||input|| * sum tails, valid under stability
  Scalar weight_norm = 0;      // ||xi|| or |B-hat|
  Scalar input_norm = 0;       // ||A|| or ||U-hat||
  Scalar stability_constant = 0;
  bool stability_ok = false;
  std::array<bool, 3> tie_at_cutoff{false, false, false};

  Scalar tail(int mode) const {
    const auto& sv = singular_values[mode];
    Scalar s = 0;
    for (Index k = sv.size() - 1; k >= chosen_ranks[mode]; --k) s += sv[k] * sv[k];
    return std::sqrt(s);
  }
};

namespace detail {

// Rank from the tolerance rule: smallest r with tail <= eps * ||sigma|| / 3,
// the tolerance split evenly over the three additive mode contributions.
template <typename Scalar>
Index rank_for_tolerance(const VectorX<Scalar>& sv, double eps) {
  const Scalar target = Scalar(eps) * sv.norm() / Scalar(3);
  Scalar tail2 = 0;
  Index r = sv.size();
  for (Index k = sv.size() - 1; k >= 0; --k) {
    tail2 += sv[k] * sv[k];
    if (std::sqrt(tail2) > target) break;
    r = k;
  }
  return std::max<Index>(r, 1);
}

// Core of the projection of a canonical tensor onto orthonormal mode bases:
// C(i,j,k) = sum_q xi_q P1(i,q) P2(j,q) P3(k,q) with P_l = Z_l^T A_l.
template <typename Scalar>
Tensor3<Scalar> project_core(const CanonicalTensor<Scalar>& a,
                             const std::array<MatrixX<Scalar>, 3>& z) {
  std::array<MatrixX<Scalar>, 3> p;
  for (int l = 0; l < 3; ++l) p[l] = z[l].transpose() * a.factor(l);
  Dims3 r{z[0].cols(), z[1].cols(), z[2].cols()};
  Tensor3<Scalar> core(r);
  for (Index q = 0; q < a.rank(); ++q) {
    const MatrixX<Scalar> g = p[0].col(q) * p[1].col(q).transpose();
    for (Index k = 0; k < r[2]; ++k) core.slab(k) += (a.weights()[q] * p[2](k, q)) * g;
  }
  return core;
}

// Projected norm ||sum_q xi_q (Y1^T a1_q) x (Y2^T a2_q) x (Y3^T a3_q)|| via
// R x R Gram matrices; the ALS objective.
template <typename Scalar>
Scalar projected_norm(const CanonicalTensor<Scalar>& a, const std::array<MatrixX<Scalar>, 3>& y) {
  std::array<MatrixX<Scalar>, 3> p;
  for (int l = 0; l < 3; ++l) p[l] = y[l].transpose() * a.factor(l);
  MatrixX<Scalar> g = (p[0].transpose() * p[0])
                          .cwiseProduct(p[1].transpose() * p[1])
                          .cwiseProduct(p[2].transpose() * p[2]);
  const Scalar v = a.weights().dot(g * a.weights());
  return v > Scalar(0) ? std::sqrt(v) : Scalar(0);
}

template <typename Scalar>
TuckerTensor<Scalar> zero_tucker(const Dims3& dims) {
  std::array<MatrixX<Scalar>, 3> f;
  for (int l = 0; l < 3; ++l) {
    f[l] = MatrixX<Scalar>::Zero(dims[l], 1);
    f[l](0, 0) = Scalar(1);
  }
  return TuckerTensor<Scalar>(dims, Tensor3<Scalar>(Dims3{1, 1, 1}), std::move(f));
}

// Rotate the core so each mode's slice mass is ordered by a mode-wise HOSVD of
// the core, folding the rotations into the factors; then greedily drop
// trailing slices while the discarded mass stays within budget2.  Used to
// minimize tolerance-driven ranks against the measured (not bounded) error.
template <typename Scalar>
void shrink_core(Tensor3<Scalar>& core, std::array<MatrixX<Scalar>, 3>& factors, Scalar budget2) {
  for (int l = 0; l < 3; ++l) {
    const MatrixX<Scalar> u = core.unfold(l);
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(u * u.transpose());
    // eigenvectors come in ascending order; take descending
    MatrixX<Scalar> q = es.eigenvectors().rowwise().reverse();
    core = core.ttm(MatrixX<Scalar>(q.transpose()), l);
    factors[l] = factors[l] * q;
  }
  Dims3 r = core.dims();
  bool changed = true;
  while (changed && budget2 > Scalar(0)) {
    changed = false;
    for (int l = 0; l < 3; ++l) {
      if (r[l] <= 1) continue;
      Scalar mass = 0;
      for (Index k = 0; k < core.dim(2); ++k)
        for (Index j = 0; j < core.dim(1); ++j)
          for (Index i = 0; i < core.dim(0); ++i) {
            const Index idx[3] = {i, j, k};
            if (idx[l] == r[l] - 1 && i < r[0] && j < r[1] && k < r[2])
              mass += core(i, j, k) * core(i, j, k);
          }
      if (mass <= budget2) {
        budget2 -= mass;
        --r[l];
        changed = true;
      }
    }
  }
  if (!(r == core.dims())) {
    Tensor3<Scalar> nc(r);
    for (Index k = 0; k < r[2]; ++k)
      for (Index j = 0; j < r[1]; ++j)
        for (Index i = 0; i < r[0]; ++i) nc(i, j, k) = core(i, j, k);
    core = std::move(nc);
    for (int l = 0; l < 3; ++l) factors[l] = factors[l].leftCols(r[l]).eval();
  }
}

}  // namespace detail

/// Reduced HOSVD: project the canonical tensor onto the dominating left
/// singular vectors of its side matrices.  The returned report carries the
/// discarded-tail bound ||xi|| * sum_l (sum_{k>r_l} sigma_{l,k}^2)^{1/2}; the
/// dense tensor is never formed.
template <typename Scalar>
std::pair<TuckerTensor<Scalar>, SpectralReport<Scalar>> rhosvd(const CanonicalTensor<Scalar>& a,
                                                               const TruncationSpec& spec) {
  spec.validate();
  SpectralReport<Scalar> report;
  report.weight_norm = a.weights().norm();
  report.input_norm = norm_f(a);
  if (a.rank() == 0 || report.input_norm == Scalar(0)) {
    report.chosen_ranks = {1, 1, 1};
    for (int l = 0; l < 3; ++l) report.singular_values[l] = VectorX<Scalar>::Zero(1);
    return {detail::zero_tucker<Scalar>(a.dims()), report};
  }

  std::array<MatrixX<Scalar>, 3> z;
  for (int l = 0; l < 3; ++l) {
    Eigen::BDCSVD<MatrixX<Scalar>> svd(a.factor(l), Eigen::ComputeThinU);
    report.singular_values[l] = svd.singularValues();
    Index r;
    if (spec.ranks) {
      r = std::min<Index>((*spec.ranks)[l], svd.singularValues().size());
    } else {
      r = detail::rank_for_tolerance(report.singular_values[l], *spec.tolerance);
    }
    // drop numerically zero directions
    while (r > 1 && report.singular_values[l][r - 1] < Scalar(1e-14) * report.singular_values[l][0])
      --r;
    const auto& sv = report.singular_values[l];
    if (r < sv.size() && sv[r - 1] - sv[r] <= Scalar(1e-12) * sv[0])
      report.tie_at_cutoff[l] = true;  // deterministic SVD order decides the split
    report.chosen_ranks[l] = r;
    z[l] = svd.matrixU().leftCols(r);
  }

  Tensor3<Scalar> core = detail::project_core(a, z);
  Scalar tails = 0;
  for (int l = 0; l < 3; ++l) tails += report.tail(l);
  report.bound_abs = report.weight_norm * tails;
  const Scalar n2 = report.input_norm * report.input_norm;
  report.stability_constant = report.weight_norm * report.weight_norm / n2;
  report.stability_ok = report.stability_constant <= Scalar(1) + Scalar(1e-10);
  report.bound_rel = std::sqrt(report.stability_constant) * report.input_norm * tails;
  return {TuckerTensor<Scalar>(a.dims(), std::move(core), std::move(z)), report};
}

template <typename Scalar>
struct AlsResult {
  TuckerTensor<Scalar> tensor;
  bool converged = false;
  int sweeps = 0;
  std::vector<Scalar> fits;  // projected norm after each sweep, non-decreasing
};

/// Alternating refinement of the Tucker factors against the canonical input:
/// per mode, the orthonormal basis maximizing the projected norm with the
/// other modes fixed is the span of the top singular vectors of the contracted
/// unfolding.  Block coordinate ascent, so the fit never decreases.
template <typename Scalar>
AlsResult<Scalar> als_refine(const CanonicalTensor<Scalar>& a, const TuckerTensor<Scalar>& init,
                             const TruncationSpec& spec) {
  if (!init.factors_orthonormal(std::sqrt(std::numeric_limits<Scalar>::epsilon())))
    throw std::invalid_argument("als_refine: initial factors must be orthonormal");
  AlsResult<Scalar> res;
  std::array<MatrixX<Scalar>, 3> y{init.factor(0), init.factor(1), init.factor(2)};
  const Dims3 r = init.ranks();
  Scalar fit = detail::projected_norm(a, y);
  res.fits.push_back(fit);

  for (int sweep = 0; sweep < spec.max_als_sweeps; ++sweep) {
    for (int l = 0; l < 3; ++l) {
      const int m1 = (l + 1) % 3, m2 = (l + 2) % 3;
      const MatrixX<Scalar> p1 = y[m1].transpose() * a.factor(m1);  // r_{m1} x R
      const MatrixX<Scalar> p2 = y[m2].transpose() * a.factor(m2);
      // contracted mode-l unfolding: n_l x (r_{m1} r_{m2})
      MatrixX<Scalar> kr(p1.rows() * p2.rows(), a.rank());
      for (Index q = 0; q < a.rank(); ++q) {
        Eigen::Map<MatrixX<Scalar>> col(kr.col(q).data(), p1.rows(), p2.rows());
        // ordering consistent with the core layout is irrelevant here: only
        // the column space of the unfolding matters
        col = a.weights()[q] * (p1.col(q) * p2.col(q).transpose());
      }
      const MatrixX<Scalar> unf = a.factor(l) * kr.transpose();
      Eigen::BDCSVD<MatrixX<Scalar>> svd(unf, Eigen::ComputeThinU);
      const Index keep = std::min<Index>(r[l], svd.matrixU().cols());
      y[l] = svd.matrixU().leftCols(keep);
    }
    const Scalar next = detail::projected_norm(a, y);
    res.fits.push_back(next);
    ++res.sweeps;
    if (next - fit <= Scalar(spec.als_stagnation_tol) * std::max(next, Scalar(1))) {
      fit = next;
      res.converged = true;
      break;
    }
    fit = next;
  }
  Tensor3<Scalar> core = detail::project_core(a, y);
  res.tensor = TuckerTensor<Scalar>(a.dims(), std::move(core), std::move(y));
  return res;
}

/// Canonical-to-Tucker: RHOSVD initial guess, ALS refinement, orthogonal core
/// projection.  In tolerance mode the core is afterwards rotated and shrunk
/// while the measured error sqrt(||A||^2 - ||B||^2 + discarded) stays within
/// eps * ||A||, which reduces the bound-driven rank overshoot.
template <typename Scalar>
std::pair<TuckerTensor<Scalar>, SpectralReport<Scalar>> canonical_to_tucker(
    const CanonicalTensor<Scalar>& a, const TruncationSpec& spec) {
  auto [init, report] = rhosvd(a, spec);
  if (report.input_norm == Scalar(0)) return {std::move(init), std::move(report)};

  TuckerTensor<Scalar> t = std::move(init);
  if (spec.max_als_sweeps > 0) {
    AlsResult<Scalar> als = als_refine(a, t, spec);
    t = std::move(als.tensor);
  }
  if (spec.tolerance && !spec.ranks) {
    const Scalar n2 = report.input_norm * report.input_norm;
    const Scalar fit2 = t.core().fnorm2();
    const Scalar err2 = std::max(n2 - fit2, Scalar(0));
    const Scalar eps = Scalar(*spec.tolerance);
    Scalar budget2 = eps * eps * n2 - err2;
    if (budget2 > Scalar(0)) {
      Tensor3<Scalar> core = t.core();
      std::array<MatrixX<Scalar>, 3> f{t.factor(0), t.factor(1), t.factor(2)};
      detail::shrink_core(core, f, budget2);
      t = TuckerTensor<Scalar>(a.dims(), std::move(core), std::move(f));
    }
  }
  report.chosen_ranks = t.ranks();
  return {std::move(t), std::move(report)};
}

/// Exact canonical form of a Tucker tensor.  Diagonal cores map rank-r
/// directly; otherwise the core is unfolded along the cheapest mode pair and
/// the canonical rank is the product of the two remaining ranks.
template <typename Scalar>
CanonicalTensor<Scalar> tucker_to_canonical(const TuckerTensor<Scalar>& t) {
  const Dims3 r = t.ranks();
  const bool cubic = r[0] == r[1] && r[1] == r[2];
  if (cubic) {
    bool diagonal = true;
    for (Index k = 0; diagonal && k < r[2]; ++k)
      for (Index j = 0; diagonal && j < r[1]; ++j)
        for (Index i = 0; i < r[0]; ++i)
          if (t.core()(i, j, k) != Scalar(0) && !(i == j && j == k)) {
            diagonal = false;
            break;
          }
    if (diagonal) {
      VectorX<Scalar> w(r[0]);
      for (Index q = 0; q < r[0]; ++q) w[q] = t.core()(q, q, q);
      return CanonicalTensor<Scalar>::from_raw(t.dims(), std::move(w),
                                               {t.factor(0), t.factor(1), t.factor(2)});
    }
  }
  // free mode = the one whose complementary rank product is smallest
  int free_mode = 0;
  Index best = std::numeric_limits<Index>::max();
  for (int l = 0; l < 3; ++l) {
    const Index prod = r[(l + 1) % 3] * r[(l + 2) % 3];
    if (prod < best) {
      best = prod;
      free_mode = l;
    }
  }
  const int p = (free_mode + 1) % 3, q = (free_mode + 2) % 3;
  const Index rank = r[p] * r[q];
  std::array<MatrixX<Scalar>, 3> f;
  f[p].resize(t.dims()[p], rank);
  f[q].resize(t.dims()[q], rank);
  f[free_mode].resize(t.dims()[free_mode], rank);
  Index col = 0;
  for (Index kq = 0; kq < r[q]; ++kq)
    for (Index kp = 0; kp < r[p]; ++kp, ++col) {
      f[p].col(col) = t.factor(p).col(kp);
      f[q].col(col) = t.factor(q).col(kq);
      VectorX<Scalar> fiber(r[free_mode]);
      for (Index km = 0; km < r[free_mode]; ++km) {
        Index idx[3];
        idx[p] = kp;
        idx[q] = kq;
        idx[free_mode] = km;
        fiber[km] = t.core()(idx[0], idx[1], idx[2]);
      }
      f[free_mode].col(col) = t.factor(free_mode) * fiber;
    }
  return CanonicalTensor<Scalar>::from_raw(t.dims(), VectorX<Scalar>::Ones(rank), std::move(f));
}

/// Generalized RHOSVD for a sum of Tucker tensors: truncated SVD of the
/// agglomerated side matrices, then every term's core is projected onto the
/// common bases and accumulated.  Terms with non-orthonormal factors are
/// orthonormalized first so the |B-hat| bookkeeping of the error bound applies.
template <typename Scalar>
std::pair<TuckerTensor<Scalar>, SpectralReport<Scalar>> tucker_sum_to_tucker(
    std::span<const TuckerTensor<Scalar>> terms, const TruncationSpec& spec) {
  spec.validate();
  if (terms.empty()) throw std::invalid_argument("tucker_sum_to_tucker: empty term list");
  const Dims3 dims = terms.front().dims();
  for (const auto& t : terms) require_same_dims<Scalar>(dims, t.dims(), "tucker_sum_to_tucker");

  std::vector<TuckerTensor<Scalar>> ortho;
  ortho.reserve(terms.size());
  for (const auto& t : terms)
    ortho.push_back(t.factors_orthonormal() ? t : orthonormalize(t));

  SpectralReport<Scalar> report;
  Scalar b2 = 0;
  for (const auto& t : ortho) b2 += t.core().fnorm2();
  report.weight_norm = std::sqrt(b2);

  Scalar u2 = 0;
  for (const auto& s : ortho)
    for (const auto& t : ortho) u2 += inner(s, t);
  report.input_norm = u2 > Scalar(0) ? std::sqrt(u2) : Scalar(0);

  std::array<MatrixX<Scalar>, 3> z;
  for (int l = 0; l < 3; ++l) {
    Index cols = 0;
    for (const auto& t : ortho) cols += t.ranks()[l];
    MatrixX<Scalar> agg(dims[l], cols);
    Index at = 0;
    for (const auto& t : ortho) {
      agg.middleCols(at, t.ranks()[l]) = t.factor(l);
      at += t.ranks()[l];
    }
    Eigen::BDCSVD<MatrixX<Scalar>> svd(agg, Eigen::ComputeThinU);
    report.singular_values[l] = svd.singularValues();
    Index r;
    if (spec.ranks) {
      r = std::min<Index>((*spec.ranks)[l], svd.singularValues().size());
    } else {
      r = detail::rank_for_tolerance(report.singular_values[l], *spec.tolerance);
    }
    while (r > 1 && report.singular_values[l][r - 1] < Scalar(1e-14) * report.singular_values[l][0])
      --r;
    const auto& sv = report.singular_values[l];
    if (r < sv.size() && sv[r - 1] - sv[r] <= Scalar(1e-12) * sv[0]) report.tie_at_cutoff[l] = true;
    report.chosen_ranks[l] = r;
    z[l] = svd.matrixU().leftCols(r);
  }

  Tensor3<Scalar> core(report.chosen_ranks);
  for (const auto& t : ortho) {
    Tensor3<Scalar> g = t.core();
    for (int l = 0; l < 3; ++l) g = g.ttm(MatrixX<Scalar>(z[l].transpose() * t.factor(l)), l);
    core.data() += g.data();
  }

  Scalar tails = 0;
  for (int l = 0; l < 3; ++l) tails += report.tail(l);
  report.bound_abs = report.weight_norm * tails;
  if (report.input_norm > Scalar(0)) {
    report.stability_constant = b2 / (report.input_norm * report.input_norm);
    report.stability_ok = report.stability_constant <= Scalar(1) + Scalar(1e-10);
    report.bound_rel = std::sqrt(report.stability_constant) * report.input_norm * tails;
  }
  return {TuckerTensor<Scalar>(dims, std::move(core), std::move(z)), std::move(report)};
}

template <typename Scalar>
struct StabilityResult {
  Scalar constant = 0;
  bool satisfied = false;
  bool defined = true;
};

/// Lemma-style stability quantity sum xi_nu^2 / ||A||^2 and whether it passes
/// the configured constant.
template <typename Scalar>
StabilityResult<Scalar> stability_check(const CanonicalTensor<Scalar>& a, Scalar c_max = Scalar(1)) {
  StabilityResult<Scalar> r;
  const Scalar n = norm_f(a);
  if (n == Scalar(0)) {
    r.defined = false;
    return r;
  }
  r.constant = a.weights().squaredNorm() / (n * n);
  r.satisfied = r.constant <= c_max + Scalar(1e-10);
  return r;
}

/// Stability of a Tucker sum: sum_s ||B_s||^2 / ||sum_s U_s||^2.
template <typename Scalar>
StabilityResult<Scalar> stability_check(std::span<const TuckerTensor<Scalar>> terms,
                                        Scalar c_max = Scalar(1)) {
  StabilityResult<Scalar> r;
  Scalar b2 = 0, u2 = 0;
  for (const auto& t : terms) b2 += t.core().fnorm2();
  for (const auto& s : terms)
    for (const auto& t : terms) u2 += inner(s, t);
  if (!(u2 > Scalar(0))) {
    r.defined = false;
    return r;
  }
  r.constant = b2 / u2;
  r.satisfied = r.constant <= c_max + Scalar(1e-10);
  return r;
}

}  // namespace latsum
