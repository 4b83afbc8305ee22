#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <vector>

#include "latsum/kernel.hpp"
#include "latsum/types.hpp"

namespace latsum {

/// Mode-function variable of a separable rule.  A gauss rule contributes
/// exp(-t_k^2 x_l^2) per mode, a laplace rule exp(-t_k x_l^2); both become
/// rank-1 products under the additive substitution rho = x1^2 + x2^2 + x3^2.
enum class QuadVariable { gauss, laplace };

/// Radial interval [a, A] on which a separable approximation is required to
/// track the kernel.  Accuracy is not scale invariant, so every rule is built
/// against a concrete shell.
struct Shell {
  double a = 0.0;
  double A = 0.0;
  double ratio() const { return A / a; }
};

/// Sinc-quadrature nodes t_k and weights a_k, k = -M..M, realizing
/// p(||x||) ~ sum_k a_k prod_l m(t_k, x_l).  Step h_M = C0 log(M)/M.
/// Gauss-type rules have symmetric nodes (t_{-k} = -t_k, t_0 = 0) and even
/// weights; laplace-type rules live on t > 0.  M == -1 marks an explicit
/// Gaussian sum passed through verbatim rather than generated by a quadrature.
template <typename Scalar = double>
struct QuadratureRule {
  int M = 0;
  Scalar step = 0;
  Scalar step_constant = 0;
  QuadVariable variable = QuadVariable::gauss;
  VectorX<Scalar> nodes;
  VectorX<Scalar> weights;
  Scalar scale = 1;  // Z0 (gauss) or rho0 = A^2 (laplace) used in the substitution

  Index size() const { return nodes.size(); }
  /// Coefficient s_k of the per-mode Gaussian exp(-s_k x^2).
  Scalar exponent(Index k) const {
    return variable == QuadVariable::gauss ? nodes[k] * nodes[k] : nodes[k];
  }
};

/// One primitive's rule together with the combination coefficient it carries
/// in a composite kernel.
template <typename Scalar = double>
struct SeparableExpansion {
  struct Term {
    Scalar coefficient;
    QuadratureRule<Scalar> rule;
  };
  std::vector<Term> terms;
  Index rank() const {
    Index r = 0;
    for (const auto& t : terms) r += t.rule.size();
    return r;
  }
};

namespace detail {

inline double sqrt_pi() { return std::sqrt(M_PI); }

// Transform weight of a gauss-type primitive at node t >= 0, i.e. w(t) in
// p(z) = int_0^inf w(t) exp(-z^2 t^2) dt.
inline double gauss_weight(const KernelPrimitive& p, double t) {
  switch (p.family) {
    case KernelFamily::newton:
      return 2.0 / sqrt_pi();
    case KernelFamily::yukawa: {
      if (t == 0.0) return 0.0;
      const double kap = p.lambda / 2.0;
      return (2.0 / sqrt_pi()) * std::exp(-(kap * kap) / (t * t));
    }
    default:
      throw std::logic_error("gauss_weight: not a gauss-type kernel");
  }
}

// log of the laplace-type transform weight w(t) in
// p(z) = int_0^inf w(t) exp(-z^2 t) dt, for t > 0.
inline double laplace_log_weight(const KernelPrimitive& p, double t) {
  switch (p.family) {
    case KernelFamily::slater: {
      const double kap = p.lambda * p.lambda / 4.0;
      return 0.5 * std::log(kap) - 0.5 * std::log(M_PI) - 1.5 * std::log(t) - kap / t;
    }
    case KernelFamily::inverse_power: {
      const double beta = p.alpha / 2.0;
      return std::log(p.coefficient) + (beta - 1.0) * std::log(t) - std::lgamma(beta);
    }
    default:
      throw std::logic_error("laplace_log_weight: not a laplace-type kernel");
  }
}

inline bool is_gauss_family(KernelFamily f) {
  return f == KernelFamily::newton || f == KernelFamily::yukawa || f == KernelFamily::gaussian_sum;
}

}  // namespace detail

class NotImplementedError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Build the substituted sinc rule for one primitive kernel on the shell.
///
/// Gauss family (newton, yukawa): u_k = k h, t_k = sinh(u_k)/A,
///   a_k = (h/2) w(|t_k|) cosh(u_k)/A, from folding the even integrand of the
///   full-line form of the half-line Gauss transform.
/// Slater: t_k = exp(u_k)/A^2 with the Laplace weight in log space.
/// Inverse powers: t_k = exp(u_k - exp(-u_k))/A^2; the double-exponential map
///   compensates the merely algebraic t^{alpha/2-1} decay of the weight at 0.
///
/// Pre: M >= 2 (h_M = C0 log(M)/M degenerates at M = 1).
template <typename Scalar = double>
QuadratureRule<Scalar> build_quadrature(const KernelPrimitive& p, int M, double step_constant,
                                        const Shell& shell) {
  if (p.family == KernelFamily::gaussian_sum) {
    QuadratureRule<Scalar> rule;
    rule.M = -1;
    rule.variable = QuadVariable::gauss;
    rule.scale = 1;
    rule.nodes.resize(static_cast<Index>(p.gaussians.size()));
    rule.weights.resize(rule.nodes.size());
    for (Index i = 0; i < rule.nodes.size(); ++i) {
      rule.nodes[i] = std::sqrt(p.gaussians[static_cast<size_t>(i)].exponent);
      rule.weights[i] = p.gaussians[static_cast<size_t>(i)].weight;
    }
    return rule;
  }
  if (M < 2) throw std::invalid_argument("build_quadrature: M >= 2 required");
  if (!(shell.a > 0.0) || !(shell.A > shell.a))
    throw std::invalid_argument("build_quadrature: need 0 < a < A");
  if (!(step_constant > 0.0)) throw std::invalid_argument("build_quadrature: C0 > 0 required");

  QuadratureRule<Scalar> rule;
  rule.M = M;
  rule.step_constant = Scalar(step_constant);
  const double h = step_constant * std::log(double(M)) / double(M);
  rule.step = Scalar(h);
  const Index R = 2 * Index(M) + 1;
  rule.nodes.resize(R);
  rule.weights.resize(R);

  const bool gauss = detail::is_gauss_family(p.family);
  rule.variable = gauss ? QuadVariable::gauss : QuadVariable::laplace;
  rule.scale = gauss ? Scalar(shell.A) : Scalar(shell.A * shell.A);

  for (Index i = 0; i < R; ++i) {
    const double u = (double(i) - double(M)) * h;
    if (gauss) {
      const double t = std::sinh(u) / shell.A;
      rule.nodes[i] = Scalar(t);
      rule.weights[i] = Scalar(0.5 * h * detail::gauss_weight(p, std::abs(t)) * std::cosh(u) / shell.A);
    } else {
      const double rho0 = shell.A * shell.A;
      double arg, jac;
      if (p.family == KernelFamily::slater) {
        arg = u;
        jac = 1.0;
      } else {
        arg = u - std::exp(-u);
        jac = 1.0 + std::exp(-u);
      }
      if (arg < -700.0) {  // node underflows to 0; its weight is 0 too
        rule.nodes[i] = 0;
        rule.weights[i] = 0;
        continue;
      }
      const double t = std::exp(arg) / rho0;
      const double logw = detail::laplace_log_weight(p, t);
      const double loga = logw + std::log(h) + std::log(t) + std::log(jac);
      rule.nodes[i] = Scalar(t);
      rule.weights[i] = Scalar(loga < -700.0 ? 0.0 : std::exp(loga));
    }
  }
  return rule;
}

/// 2M+1-term separable sum at a point.  Evaluated as the product of 1D mode
/// factors, mirroring the tensor construction.
template <typename Scalar>
Scalar separable_eval(const QuadratureRule<Scalar>& rule, const Array3<Scalar>& x) {
  Scalar sum = 0;
  for (Index k = 0; k < rule.size(); ++k) {
    const Scalar s = rule.exponent(k);
    Scalar prod = rule.weights[k];
    for (int l = 0; l < 3; ++l) prod *= std::exp(-s * x[l] * x[l]);
    sum += prod;
  }
  return sum;
}

template <typename Scalar>
Scalar separable_eval(const SeparableExpansion<Scalar>& ex, const Array3<Scalar>& x) {
  Scalar sum = 0;
  for (const auto& t : ex.terms) sum += t.coefficient * separable_eval(t.rule, x);
  return sum;
}

/// Max errors of the radial separable sum against the closed-form kernel on a
/// log-spaced probe grid over the shell.
struct ShellError {
  double pointwise_rel = 0.0;  // max |S - p| / |p|
  double maxnorm_rel = 0.0;    // max |S - p| / max |p|
};

template <typename Scalar>
ShellError shell_error(const SeparableExpansion<Scalar>& ex, const KernelSpec& kernel,
                       const Shell& shell, int npts = 400) {
  ShellError err;
  double pmax = 0.0, emax = 0.0;
  const double la = std::log(shell.a), lA = std::log(shell.A);
  for (int i = 0; i < npts; ++i) {
    const double z = std::exp(la + (lA - la) * double(i) / double(npts - 1));
    const double exact = kernel_exact(kernel, z);
    const double approx = double(separable_eval(ex, Array3<Scalar>(Scalar(z), 0, 0)));
    const double e = std::abs(approx - exact);
    err.pointwise_rel = std::max(err.pointwise_rel, e / std::abs(exact));
    emax = std::max(emax, e);
    pmax = std::max(pmax, std::abs(exact));
  }
  err.maxnorm_rel = emax / pmax;
  return err;
}

/// Calibrated default for the step constant: a deterministic one-time sweep
/// minimizing the max pointwise-relative error on the shell.
inline double default_step_constant(const KernelPrimitive& p, int M, const Shell& shell,
                                    int npts = 320) {
  if (p.family == KernelFamily::gaussian_sum) return 1.0;
  std::vector<double> grid;
  if (detail::is_gauss_family(p.family)) {
    const double base = std::asinh(2.5 * shell.ratio()) / std::log(double(M));
    for (int i = 0; i < 53; ++i) grid.push_back(base * (0.5 + 1.3 * double(i) / 52.0));
  } else {
    for (int i = 0; i < 63; ++i) grid.push_back(0.8 + (7.0 - 0.8) * double(i) / 62.0);
  }
  KernelSpec k = [&] {
    switch (p.family) {
      case KernelFamily::newton: return KernelSpec::newton();
      case KernelFamily::yukawa: return KernelSpec::yukawa(p.lambda);
      case KernelFamily::slater: return KernelSpec::slater(p.lambda);
      case KernelFamily::inverse_power: return KernelSpec::inverse_power(p.alpha, p.coefficient);
      default: return KernelSpec::newton();
    }
  }();
  double best_err = std::numeric_limits<double>::infinity();
  double best_c0 = grid.front();
  for (double c0 : grid) {
    SeparableExpansion<double> ex;
    ex.terms.push_back({1.0, build_quadrature<double>(p, M, c0, shell)});
    const double e = shell_error(ex, k, shell, npts).pointwise_rel;
    if (std::isfinite(e) && e < best_err) {
      best_err = e;
      best_c0 = c0;
    }
  }
  return best_c0;
}

namespace detail {

// Fixed calibration table for the epsilon -> M choice, generated offline for
// the Newton transform with swept step constants: measured minimal M reaching
// the max-norm-relative tolerance on [A/ratio, A].  Rows: shell ratios;
// columns: eps = 1e-2 .. 1e-7.  The slower-decaying Newton kernel dominates
// the other supported transforms at equal shells, so the table is used for
// all families.
struct MTableRow {
  double ratio;
  int M[6];
};

inline constexpr MTableRow m_table[] = {
    {8.0, {4, 5, 8, 10, 12, 14}},      {16.0, {4, 6, 9, 12, 14, 17}},
    {32.0, {5, 8, 11, 13, 16, 19}},    {64.0, {6, 9, 12, 15, 18, 21}},
    {128.0, {6, 10, 13, 17, 20, 24}},  {256.0, {7, 11, 15, 19, 23, 27}},
    {512.0, {8, 12, 17, 20, 25, 29}},  {1024.0, {9, 13, 18, 22, 27, 32}},
    {2048.0, {10, 14, 20, 24, 29, 34}},{4096.0, {11, 15, 21, 26, 31, 36}},
    {8192.0, {11, 16, 23, 27, 33, 38}},{16384.0, {12, 17, 24, 29, 35, 41}},
};

}  // namespace detail

/// Number of one-sided quadrature points for a target relative accuracy on
/// the shell, from the shipped calibration table.  Tolerances round down to
/// the next decade; ratios interpolate linearly in log(ratio) between
/// calibration rows (the achieved tolerance tracks eps within a small factor
/// between rows).
inline int choose_M(const KernelPrimitive& p, double eps, const Shell& shell) {
  (void)p;
  if (!(eps > 0.0) || eps >= 1.0) throw std::invalid_argument("choose_M: eps in (0,1) required");
  const double ratio = shell.ratio();
  int col = static_cast<int>(std::ceil(-std::log10(eps) - 1e-9)) - 2;
  col = std::clamp(col, 0, 5);
  const auto& table = detail::m_table;
  const size_t last = std::size(table) - 1;
  if (ratio <= table[0].ratio) return table[0].M[col];
  if (ratio >= table[last].ratio) return table[last].M[col];
  size_t hi = 1;
  while (ratio > table[hi].ratio) ++hi;
  const auto& a = table[hi - 1];
  const auto& b = table[hi];
  const double w = std::log(ratio / a.ratio) / std::log(b.ratio / a.ratio);
  return int(std::floor(double(a.M[col]) + w * double(b.M[col] - a.M[col])));
}

/// Rules for every primitive of a kernel, sharing (M, C0 policy, shell).
/// Passing C0 <= 0 selects the calibrated default per primitive.
template <typename Scalar = double>
SeparableExpansion<Scalar> build_expansion(const KernelSpec& kernel, int M, double step_constant,
                                           const Shell& shell) {
  SeparableExpansion<Scalar> ex;
  for (const auto& t : kernel.terms()) {
    const double c0 = step_constant > 0.0 ? step_constant
                                          : default_step_constant(t.primitive, M, shell);
    ex.terms.push_back({Scalar(t.coefficient), build_quadrature<Scalar>(t.primitive, M, c0, shell)});
  }
  return ex;
}

}  // namespace latsum
