#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "latsum/types.hpp"

namespace latsum {

/// Uniform tensor-product grid of cells on the box
/// [origin - b/2, origin + b/2] per mode.  Cell widths h_l = b_l / n_l are
/// derived from the stored (b_l, n_l) pair, so h_l * n_l == b_l holds exactly.
/// n_l must be even: the centered window of the doubled grid is only defined
/// for even cell counts.
template <typename Scalar = double>
class UniformGrid {
 public:
  UniformGrid(Array3<Scalar> box_width, Dims3 points, Array3<Scalar> origin = Array3<Scalar>::Zero())
      : box_(std::move(box_width)), n_(points), origin_(std::move(origin)) {
    for (int l = 0; l < 3; ++l) {
      if (n_[l] < 2) throw std::invalid_argument("UniformGrid: need at least 2 cells per mode");
      if (n_[l] % 2 != 0)
        throw std::invalid_argument("UniformGrid: odd cell count in mode " + std::to_string(l + 1) +
                                    " rejected; the centered window assumes even n");
      if (!(box_[l] > Scalar(0))) throw std::invalid_argument("UniformGrid: box width must be positive");
    }
  }

  static UniformGrid cubic(Scalar b, Index n) {
    return UniformGrid(Array3<Scalar>::Constant(b), Dims3{n, n, n});
  }

  const Dims3& points() const { return n_; }
  Index points(int mode) const { return n_[mode]; }
  Scalar box_width(int mode) const { return box_[mode]; }
  const Array3<Scalar>& box_widths() const { return box_; }
  Scalar mesh(int mode) const { return box_[mode] / Scalar(n_[mode]); }
  Array3<Scalar> mesh_sizes() const {
    return box_ / Array3<Scalar>(Scalar(n_[0]), Scalar(n_[1]), Scalar(n_[2]));
  }
  const Array3<Scalar>& origin() const { return origin_; }

  Scalar lower(int mode) const { return origin_[mode] - box_[mode] / Scalar(2); }
  Scalar upper(int mode) const { return origin_[mode] + box_[mode] / Scalar(2); }

  /// Bounds of 0-based cell i in the given mode.
  std::pair<Scalar, Scalar> cell_bounds(int mode, Index i) const {
    const Scalar h = mesh(mode);
    const Scalar lo = lower(mode) + Scalar(i) * h;
    return {lo, lo + h};
  }

  Scalar cell_center(int mode, Index i) const {
    auto [lo, hi] = cell_bounds(mode, i);
    return (lo + hi) / Scalar(2);
  }

  /// The reference grid covering twice the box with the same mesh size.
  UniformGrid doubled() const {
    return UniformGrid(Array3<Scalar>(2 * box_), Dims3{2 * n_[0], 2 * n_[1], 2 * n_[2]}, origin_);
  }

  bool operator==(const UniformGrid& o) const {
    return n_ == o.n_ && (box_ == o.box_).all() && (origin_ == o.origin_).all();
  }

 private:
  Array3<Scalar> box_;
  Dims3 n_;
  Array3<Scalar> origin_;
};

/// Integer window shift in mesh units, one entry per mode.
struct WindowShift {
  std::array<long, 3> s{0, 0, 0};
};

/// Contiguous 0-based index range [begin, begin + length).
struct IndexRange {
  Index begin = 0;
  Index length = 0;
  Index end() const { return begin + length; }
};

class WindowOverflowError : public std::out_of_range {
 public:
  WindowOverflowError(int mode, long shift, Index n)
      : std::out_of_range("window overflow in mode " + std::to_string(mode) + ": shift " +
                          std::to_string(shift) + " pushes the length-" + std::to_string(n) +
                          " window outside the doubled grid"),
        mode_(mode) {}
  int mode() const { return mode_; }

 private:
  int mode_;
};

/// Index ranges of the shifted window into the doubled grid.  The zero shift
/// returns the centered range, 0-based [n/2, 3n/2), i.e. 1-based [n/2+1, 3n/2];
/// a shift translates that range entry-wise.  External formats report the
/// 1-based convention, internal ranges are 0-based.
template <typename Scalar>
std::array<IndexRange, 3> window_indices(const WindowShift& shift, const UniformGrid<Scalar>& grid) {
  std::array<IndexRange, 3> out;
  for (int l = 0; l < 3; ++l) {
    const Index n = grid.points(l);
    const long begin = static_cast<long>(n / 2) + shift.s[l];
    if (begin < 0 || begin + n > 2 * n) throw WindowOverflowError(l + 1, shift.s[l], n);
    out[l] = IndexRange{static_cast<Index>(begin), n};
  }
  return out;
}

/// Nearest-grid-point shift of a position inside the computational box, plus
/// the sub-mesh residual (|residual_l| <= h_l/2).  Ties round half away from
/// zero.  The residual bounds the O(h) placement error a caller accepts when
/// snapping an off-grid source.
template <typename Scalar>
std::pair<WindowShift, Array3<Scalar>> snap_to_grid(const Array3<Scalar>& position,
                                                    const UniformGrid<Scalar>& grid) {
  WindowShift shift;
  Array3<Scalar> residual;
  for (int l = 0; l < 3; ++l) {
    const Scalar rel = position[l] - grid.origin()[l];
    if (rel < -grid.box_width(l) / Scalar(2) || rel > grid.box_width(l) / Scalar(2))
      throw std::domain_error("snap_to_grid: position outside the computational box in mode " +
                              std::to_string(l + 1));
    const Scalar h = grid.mesh(l);
    shift.s[l] = static_cast<long>(std::round(rel / h));  // round() is half-away-from-zero
    residual[l] = rel - Scalar(shift.s[l]) * h;
  }
  return {shift, residual};
}

}  // namespace latsum
