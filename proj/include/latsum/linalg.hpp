#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "latsum/types.hpp"

namespace latsum {

template <typename Scalar>
struct QrResult {
  MatrixX<Scalar> q;          // orthonormal columns (numerical rank many)
  MatrixX<Scalar> transform;  // upper triangular, input = q * transform
  Index rank = 0;             // detected numerical column rank
};

/// Modified Gram-Schmidt with one reorthogonalization pass.  Columns whose
/// residual norm after projection falls below `drop_tol` are reported through
/// the reduced rank; their transform column is kept so A = Q * R still holds.
template <typename Scalar>
QrResult<Scalar> gram_schmidt(const MatrixX<Scalar>& a, Scalar drop_tol = Scalar(1e-13)) {
  const Index n = a.rows(), m = a.cols();
  QrResult<Scalar> res;
  res.q.resize(n, m);
  res.transform = MatrixX<Scalar>::Zero(m, m);
  Index r = 0;
  for (Index j = 0; j < m; ++j) {
    VectorX<Scalar> v = a.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (Index i = 0; i < r; ++i) {
        const Scalar c = res.q.col(i).dot(v);
        res.transform(i, j) += c;
        v -= c * res.q.col(i);
      }
    }
    const Scalar nv = v.norm();
    if (nv < drop_tol) continue;  // numerically dependent column
    res.q.col(r) = v / nv;
    res.transform(r, j) = nv;
    ++r;
  }
  res.rank = r;
  res.q.conservativeResize(n, r);
  res.transform = res.transform.topRows(r).eval();
  return res;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least-squares line through (x_i, y_i); used for scaling exponents and
/// convergence-slope checks.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need >= 2 points");
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / n;
  for (size_t i = 0; i < x.size(); ++i) {
    const double pred = f.slope * x[i] + f.intercept;
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

}  // namespace latsum
