#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "latsum/canonical.hpp"
#include "latsum/grid.hpp"
#include "latsum/kernel.hpp"
#include "latsum/quadrature.hpp"
#include "latsum/rank_reduction.hpp"
#include "latsum/tucker.hpp"

namespace latsum {

namespace detail {

// erf(hi) - erf(lo) without cancellation: route through erfc on the side of
// the axis where both arguments share a sign.
inline double erf_difference(double lo, double hi) {
  if (lo >= 0.0) return std::erfc(lo) - std::erfc(hi);
  if (hi <= 0.0) return std::erfc(-hi) - std::erfc(-lo);
  return std::erf(hi) - std::erf(lo);  // straddles zero: both terms add
}

}  // namespace detail

/// 1D Gaussian-box integrals of one rule against the grid's cells:
/// entry (i, k) = int over cell i of exp(-s_k x^2) dx, evaluated in closed
/// form as (sqrt(pi)/(2 sqrt(s_k))) [erf(sqrt(s_k) x_{i+1}) - erf(sqrt(s_k) x_i)],
/// with the cell width h for s_k = 0.
template <typename Scalar>
MatrixX<Scalar> mode_integrals(const QuadratureRule<Scalar>& rule, const UniformGrid<Scalar>& grid,
                               int mode) {
  const Index n = grid.points(mode);
  const Index r = rule.size();
  MatrixX<Scalar> out(n, r);
  const double h = double(grid.mesh(mode));
  for (Index k = 0; k < r; ++k) {
    const double s = double(rule.exponent(k));
    if (s == 0.0) {
      out.col(k).setConstant(Scalar(h));
      continue;
    }
    const double rs = std::sqrt(s);
    const double c = std::sqrt(M_PI) / (2.0 * rs);
    for (Index i = 0; i < n; ++i) {
      auto [lo, hi] = grid.cell_bounds(mode, i);
      out(i, k) = Scalar(c * detail::erf_difference(rs * double(lo), rs * double(hi)));
    }
  }
  return out;
}

struct ReferenceOptions {
  bool doubled = true;                  // build on the 2n grid (windowing margin)
  bool require_positive_weights = false;
  double step_constant = 0.0;           // <= 0: calibrated per-primitive sweep
};

/// Projection of one kernel onto the piecewise-constant basis of the (doubled)
/// grid, in canonical form of rank sum_p (2M+1).  For radial kernels on cubic
/// grids the three side matrices coincide.
template <typename Scalar = double>
struct ReferenceTensor {
  CanonicalTensor<Scalar> canonical;
  std::optional<TuckerTensor<Scalar>> tucker;
  KernelSpec kernel = KernelSpec::newton();
  SeparableExpansion<Scalar> expansion;
  UniformGrid<Scalar> grid;            // the grid the tensor lives on
  UniformGrid<Scalar> base_grid;       // the computational grid it windows onto
  int M = 0;
  std::vector<double> step_constants;  // per primitive term
  Shell shell;                         // calibration shell
  bool doubled = true;
  std::vector<std::string> warnings;

  ReferenceTensor() : grid(UniformGrid<Scalar>::cubic(1, 2)), base_grid(grid) {}
};

/// Shell on which a reference must track the kernel: radii from one mesh step
/// up to the diagonal of the (doubled) box.
template <typename Scalar>
Shell reference_shell(const UniformGrid<Scalar>& ref_grid) {
  double hmin = double(ref_grid.mesh(0));
  double bmax = 0.0;
  for (int l = 0; l < 3; ++l) {
    hmin = std::min(hmin, double(ref_grid.mesh(l)));
    bmax = std::max(bmax, double(ref_grid.box_width(l)));
  }
  return Shell{hmin, std::sqrt(3.0) * bmax / 2.0};
}

template <typename Scalar = double>
ReferenceTensor<Scalar> build_reference_canonical(const KernelSpec& kernel,
                                                  const UniformGrid<Scalar>& grid, int M,
                                                  const ReferenceOptions& opts = {}) {
  ReferenceTensor<Scalar> ref;
  ref.kernel = kernel;
  ref.base_grid = grid;
  ref.grid = opts.doubled ? grid.doubled() : grid;
  ref.doubled = opts.doubled;
  ref.M = M;
  ref.shell = reference_shell(ref.grid);

  for (const auto& term : kernel.terms()) {
    const double c0 = opts.step_constant > 0.0
                          ? opts.step_constant
                          : default_step_constant(term.primitive, M, ref.shell);
    ref.step_constants.push_back(c0);
    ref.expansion.terms.push_back(
        {Scalar(term.coefficient), build_quadrature<Scalar>(term.primitive, M, c0, ref.shell)});
  }

  const Index rank = ref.expansion.rank();
  VectorX<Scalar> weights(rank);
  std::array<MatrixX<Scalar>, 3> factors;
  for (int l = 0; l < 3; ++l) factors[l].resize(ref.grid.points(l), rank);

  Index at = 0;
  for (const auto& term : ref.expansion.terms) {
    const Index r = term.rule.size();
    for (Index k = 0; k < r; ++k) weights[at + k] = term.coefficient * term.rule.weights[k];
    // identical modes share one set of 1D integrals
    std::array<int, 3> same{-1, -1, -1};
    for (int l = 0; l < 3; ++l) {
      for (int m = 0; m < l; ++m) {
        if (ref.grid.points(l) == ref.grid.points(m) &&
            ref.grid.box_width(l) == ref.grid.box_width(m) &&
            ref.grid.origin()[l] == ref.grid.origin()[m]) {
          same[l] = m;
          break;
        }
      }
      if (same[l] >= 0)
        factors[l].middleCols(at, r) = factors[same[l]].middleCols(at, r);
      else
        factors[l].middleCols(at, r) = mode_integrals(term.rule, ref.grid, l);
    }
    at += r;
  }

  bool negative = false;
  for (Index q = 0; q < rank; ++q) negative = negative || weights[q] < Scalar(0);
  if (negative && opts.require_positive_weights)
    ref.warnings.push_back(
        "signed canonical weights: the non-negativity stability case does not apply");

  ref.canonical = CanonicalTensor<Scalar>::from_raw(ref.grid.points(), std::move(weights),
                                                    std::move(factors));
  return ref;
}

/// Tucker form of the reference through canonical-to-Tucker.  A rank request
/// exceeding the canonical rank is clamped (with a warning on the reference).
template <typename Scalar>
TuckerTensor<Scalar> build_reference_tucker(ReferenceTensor<Scalar>& ref,
                                            const TruncationSpec& spec) {
  TruncationSpec s = spec;
  if (s.ranks) {
    bool clamped = false;
    for (int l = 0; l < 3; ++l) {
      const Index cap = std::min<Index>(ref.canonical.rank(), ref.grid.points(l));
      if ((*s.ranks)[l] > cap) {
        (*s.ranks)[l] = cap;
        clamped = true;
      }
    }
    if (clamped) ref.warnings.push_back("requested Tucker rank clamped to the canonical rank");
  }
  auto [tucker, report] = canonical_to_tucker(ref.canonical, s);
  (void)report;
  ref.tucker = tucker;
  return *ref.tucker;
}

}  // namespace latsum
