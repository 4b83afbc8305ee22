#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace latsum {

/// One explicit Gaussian e^{-exponent * ||x||^2} with a scalar weight.
struct GaussianTerm {
  double weight = 0.0;
  double exponent = 0.0;
};

enum class KernelFamily { newton, yukawa, slater, inverse_power, gaussian_sum };

/// A primitive radial kernel that owns a known separable integral transform.
///   newton          p(r) = 1/r
///   yukawa          p(r) = exp(-lambda r)/r,   lambda > 0
///   slater          p(r) = exp(-lambda r),     lambda > 0
///   inverse_power   p(r) = coefficient / r^alpha, alpha > 0
///   gaussian_sum    p(r) = sum_i w_i exp(-e_i r^2)  (already separable)
struct KernelPrimitive {
  KernelFamily family = KernelFamily::newton;
  double lambda = 0.0;       // yukawa / slater decay rate
  double alpha = 0.0;        // inverse_power exponent
  double coefficient = 1.0;  // inverse_power prefactor
  std::vector<GaussianTerm> gaussians;
};

/// A radial interaction kernel: a linear combination of primitives.  Composite
/// potentials (Lennard-Jones, Buckingham, dipole-dipole) are expressed this
/// way; each primitive keeps its own quadrature so signed combination weights
/// never contaminate the per-primitive positivity of the transform weights.
class KernelSpec {
 public:
  struct Term {
    double coefficient = 1.0;
    KernelPrimitive primitive;
  };

  static KernelSpec newton() {
    KernelPrimitive p;
    p.family = KernelFamily::newton;
    return single(p);
  }

  static KernelSpec yukawa(double lambda) {
    require_positive(lambda, "yukawa lambda");
    KernelPrimitive p;
    p.family = KernelFamily::yukawa;
    p.lambda = lambda;
    return single(p);
  }

  static KernelSpec slater(double lambda) {
    require_positive(lambda, "slater lambda");
    KernelPrimitive p;
    p.family = KernelFamily::slater;
    p.lambda = lambda;
    return single(p);
  }

  static KernelSpec inverse_power(double alpha, double coefficient = 1.0) {
    require_positive(alpha, "inverse_power alpha");
    KernelPrimitive p;
    p.family = KernelFamily::inverse_power;
    p.alpha = alpha;
    p.coefficient = coefficient;
    return single(p);
  }

  static KernelSpec gaussian_sum(std::vector<GaussianTerm> terms) {
    if (terms.empty()) throw std::invalid_argument("gaussian_sum: empty term list");
    KernelPrimitive p;
    p.family = KernelFamily::gaussian_sum;
    p.gaussians = std::move(terms);
    return single(p);
  }

  /// 4 eps [ (sigma/r)^12 - (sigma/r)^6 ]
  static KernelSpec lennard_jones(double eps, double sigma) {
    require_positive(eps, "lennard_jones eps");
    require_positive(sigma, "lennard_jones sigma");
    KernelSpec k;
    k.terms_.push_back({4.0 * eps * std::pow(sigma, 12.0), inverse_power(12.0).terms_[0].primitive});
    k.terms_.push_back({-4.0 * eps * std::pow(sigma, 6.0), inverse_power(6.0).terms_[0].primitive});
    return k;
  }

  /// A exp(-r/rho) - C / r^6  (decaying exp-6 form)
  static KernelSpec buckingham(double A, double rho, double C) {
    require_positive(rho, "buckingham rho");
    KernelSpec k;
    k.terms_.push_back({A, slater(1.0 / rho).terms_[0].primitive});
    k.terms_.push_back({-C, inverse_power(6.0).terms_[0].primitive});
    return k;
  }

  /// C0 / r^3
  static KernelSpec dipole_dipole(double C0) { return inverse_power(3.0, C0); }

  const std::vector<Term>& terms() const { return terms_; }
  bool is_primitive() const { return terms_.size() == 1 && terms_[0].coefficient == 1.0; }
  const KernelPrimitive& primitive() const {
    if (!is_primitive()) throw std::logic_error("KernelSpec: composite kernel has no single primitive");
    return terms_[0].primitive;
  }

  /// Canonical string form, used for cache keys and reference lookup.
  std::string key() const {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& t : terms_) {
      if (!first) os << "+";
      first = false;
      os << "(" << t.coefficient << ")*";
      const auto& p = t.primitive;
      switch (p.family) {
        case KernelFamily::newton: os << "newton"; break;
        case KernelFamily::yukawa: os << "yukawa[" << p.lambda << "]"; break;
        case KernelFamily::slater: os << "slater[" << p.lambda << "]"; break;
        case KernelFamily::inverse_power:
          os << "invpow[" << p.alpha << "," << p.coefficient << "]";
          break;
        case KernelFamily::gaussian_sum:
          os << "gsum[";
          for (const auto& g : p.gaussians) os << g.weight << ":" << g.exponent << ";";
          os << "]";
          break;
      }
    }
    return os.str();
  }

  bool operator==(const KernelSpec& o) const { return key() == o.key(); }

 private:
  static KernelSpec single(KernelPrimitive p) {
    KernelSpec k;
    k.terms_.push_back({1.0, std::move(p)});
    return k;
  }
  static void require_positive(double v, const char* what) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be positive");
  }

  std::vector<Term> terms_;
};

inline double primitive_exact(const KernelPrimitive& p, double r) {
  switch (p.family) {
    case KernelFamily::newton: return 1.0 / r;
    case KernelFamily::yukawa: return std::exp(-p.lambda * r) / r;
    case KernelFamily::slater: return std::exp(-p.lambda * r);
    case KernelFamily::inverse_power: return p.coefficient * std::pow(r, -p.alpha);
    case KernelFamily::gaussian_sum: {
      double v = 0.0;
      for (const auto& g : p.gaussians) v += g.weight * std::exp(-g.exponent * r * r);
      return v;
    }
  }
  throw std::logic_error("unreachable kernel family");
}

/// Closed-form kernel value at radius r > 0.  Test oracle; not used by the
/// tensor construction path.
inline double kernel_exact(const KernelSpec& kernel, double r) {
  if (!(r > 0.0)) throw std::domain_error("kernel_exact: requires r > 0");
  double v = 0.0;
  for (const auto& t : kernel.terms()) v += t.coefficient * primitive_exact(t.primitive, r);
  return v;
}

}  // namespace latsum
