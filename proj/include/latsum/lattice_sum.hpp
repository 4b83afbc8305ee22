#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "latsum/canonical.hpp"
#include "latsum/geometry.hpp"
#include "latsum/grid.hpp"
#include "latsum/parallel.hpp"
#include "latsum/rank_reduction.hpp"
#include "latsum/reference.hpp"
#include "latsum/tucker.hpp"

namespace latsum {

/// Point sources with arbitrary positions inside the computational box.
template <typename Scalar = double>
struct ChargeEntry {
  Array3<Scalar> position = Array3<Scalar>::Zero();
  Scalar charge = 1;
  KernelSpec kernel = KernelSpec::newton();
};
template <typename Scalar = double>
using ChargeList = std::vector<ChargeEntry<Scalar>>;

/// Accumulation policy for the 1D assembled sums.  `sliding` reuses the
/// overlap of consecutive windows (cost O(N_L + L n) per vector instead of
/// O(L N_L)) and is entry-equal to the direct order up to roundoff;
/// `ascending` is the fixed reproducible order; `compensated` adds Kahan
/// correction on top of the ascending order.
enum class Accumulation { sliding, ascending, compensated };

struct SumOptions {
  Accumulation accumulation = Accumulation::sliding;
};

/// One summand of a lattice sum, for provenance reporting.
struct Summand {
  std::string label;
  Index canonical_rank = 0;
  Dims3 tucker_ranks{0, 0, 0};
  Index sites = 0;
};

template <typename Scalar = double>
struct LatticeSumResult {
  std::variant<CanonicalTensor<Scalar>, TuckerTensor<Scalar>> tensor;
  LatticeGeometry geometry;
  UniformGrid<Scalar> grid;  // the N_L computational grid
  std::vector<Summand> provenance;
  std::optional<SpectralReport<Scalar>> report;

  LatticeSumResult() : grid(UniformGrid<Scalar>::cubic(1, 2)) {}

  bool is_canonical() const { return std::holds_alternative<CanonicalTensor<Scalar>>(tensor); }
  const CanonicalTensor<Scalar>& canonical() const {
    return std::get<CanonicalTensor<Scalar>>(tensor);
  }
  const TuckerTensor<Scalar>& tucker_tensor() const {
    return std::get<TuckerTensor<Scalar>>(tensor);
  }
  Scalar entry(Index i, Index j, Index k) const {
    return is_canonical() ? canonical().entry(i, j, k) : tucker_tensor().entry(i, j, k);
  }
};

/// N_L grid of an L1 x L2 x L3 lattice resolved with n (even) points per cell.
template <typename Scalar = double>
UniformGrid<Scalar> lattice_grid(const LatticeGeometry& geom, Index n_per_cell) {
  if (n_per_cell < 2 || n_per_cell % 2 != 0)
    throw std::invalid_argument("lattice_grid: points per cell must be even and >= 2");
  Array3<Scalar> box;
  Dims3 pts;
  for (int l = 0; l < 3; ++l) {
    box[l] = Scalar(geom.cell_width) * Scalar(geom.cells[l]);
    pts[l] = n_per_cell * geom.cells[l];
  }
  return UniformGrid<Scalar>(box, pts);
}

namespace detail {

// A source shifted by +c mesh units reads the reference at indices shifted by
// -c: the window translates opposite to the source.
template <typename Scalar>
std::array<IndexRange, 3> source_window(const std::array<long, 3>& c,
                                        const UniformGrid<Scalar>& grid) {
  WindowShift w;
  for (int l = 0; l < 3; ++l) w.s[l] = -c[l];
  return window_indices(w, grid);
}

// v[i] = sum_{k in K} ref[N/2 - (n k + off) + i], i = 0..N-1.
template <typename Scalar>
VectorX<Scalar> assembled_vector(const VectorX<Scalar>& ref, std::span<const int> kset, Index n,
                                 long off, Index nl, Accumulation acc, int mode) {
  if (kset.empty()) throw std::invalid_argument("assembled_vector: empty active set");
  std::vector<int> ks(kset.begin(), kset.end());
  std::sort(ks.begin(), ks.end());
  auto start0 = [&](long k) { return nl / 2 - (n * k + off); };
  for (int k : {ks.front(), ks.back()}) {
    const long s = start0(k);
    if (s < 0 || s + nl > ref.size()) throw WindowOverflowError(mode + 1, -(n * k + off), nl);
  }
  bool contiguous = true;
  for (size_t i = 1; i < ks.size(); ++i) contiguous = contiguous && ks[i] == ks[i - 1] + 1;

  VectorX<Scalar> v = VectorX<Scalar>::Zero(nl);
  if (acc == Accumulation::sliding && contiguous && Index(ks.size()) > 1 && nl > n) {
    const long cmin = start0(ks.front());  // largest start (k ascending shrinks start)
    for (Index i = 0; i < n; ++i) {
      Scalar s = 0;
      for (int k : ks) s += ref[start0(k) + i];
      v[i] = s;
    }
    const long hi = start0(ks.front());          // term entering for k = kmin
    const long lo = start0(ks.back() + 1);       // term leaving past k = kmax
    (void)cmin;
    for (Index i = n; i < nl; ++i) v[i] = v[i - n] + ref[hi + i] - ref[lo + i];
    return v;
  }
  if (acc == Accumulation::compensated) {
    VectorX<Scalar> comp = VectorX<Scalar>::Zero(nl);
    for (int k : ks) {
      const long s = start0(k);
      for (Index i = 0; i < nl; ++i) {
        const Scalar y = ref[s + i] - comp[i];
        const Scalar t = v[i] + y;
        comp[i] = (t - v[i]) - y;
        v[i] = t;
      }
    }
    return v;
  }
  for (int k : ks) v += ref.segment(start0(k), nl);
  return v;
}

// Window of the reference canonical placed at a single source shift, as a
// canonical tensor on the base grid (weights pick up the window norms).
template <typename Scalar>
CanonicalTensor<Scalar> windowed_canonical(const ReferenceTensor<Scalar>& ref,
                                           const std::array<long, 3>& c, Scalar charge) {
  const auto win = source_window(c, ref.base_grid);
  std::array<MatrixX<Scalar>, 3> f;
  for (int l = 0; l < 3; ++l)
    f[l] = ref.canonical.factor(l).middleRows(win[l].begin, win[l].length);
  VectorX<Scalar> w = charge * ref.canonical.weights();
  return CanonicalTensor<Scalar>::from_raw(ref.base_grid.points(), std::move(w), std::move(f));
}

inline std::array<long, 3> defect_grid_shift(const Int3& site, const Array3<double>& grid_offset,
                                             Index n) {
  std::array<long, 3> c;
  for (int l = 0; l < 3; ++l) c[l] = long(site[l]) * long(n) + std::lround(grid_offset[l]);
  return c;
}

}  // namespace detail

/// Direct sum of shifted reference windows, one per charge.  Rank grows to
/// M0 * R; entries equal the weighted window sum exactly.  Every charge must
/// carry the reference's kernel.
template <typename Scalar>
CanonicalTensor<Scalar> direct_sum(const ChargeList<Scalar>& charges,
                                   const ReferenceTensor<Scalar>& ref) {
  if (charges.empty()) return CanonicalTensor<Scalar>::zero(ref.base_grid.points());
  CanonicalTensor<Scalar> out = CanonicalTensor<Scalar>::zero(ref.base_grid.points());
  for (size_t nu = 0; nu < charges.size(); ++nu) {
    const auto& ch = charges[nu];
    if (!(ch.kernel == ref.kernel))
      throw std::invalid_argument("direct_sum: charge " + std::to_string(nu) +
                                  " kernel differs from the reference kernel");
    if (ch.charge == Scalar(0))
      throw std::invalid_argument("direct_sum: charge " + std::to_string(nu) + " is zero");
    auto [shift, residual] = snap_to_grid(ch.position, ref.base_grid);
    (void)residual;  // O(h) placement error accepted by snapping
    try {
      out = add_concat(out, detail::windowed_canonical(ref, shift.s, ch.charge));
    } catch (const WindowOverflowError& e) {
      throw std::invalid_argument("direct_sum: charge " + std::to_string(nu) + ": " + e.what());
    }
  }
  return out;
}

/// Theorem-level assembled lattice sum in canonical form: every mode vector is
/// the 1D sum of its shifted windows, so the output rank equals the reference
/// rank exactly.  Requires a full rectangular geometry; defects go through
/// defected_sum.
template <typename Scalar>
CanonicalTensor<Scalar> assembled_sum_canonical(const ReferenceTensor<Scalar>& ref,
                                                const LatticeGeometry& geom,
                                                const SumOptions& opts = {}) {
  if (!geom.defects.empty())
    throw std::invalid_argument(
        "assembled_sum_canonical: geometry carries defects; use defected_sum");
  const Dims3 nl = ref.base_grid.points();
  std::array<Index, 3> n;
  for (int l = 0; l < 3; ++l) {
    if (nl[l] % geom.cells[l] != 0)
      throw std::invalid_argument("assembled_sum_canonical: grid does not tile the lattice");
    n[l] = nl[l] / geom.cells[l];
  }
  const Index r = ref.canonical.rank();
  VectorX<Scalar> w = Scalar(geom.base_charge) * ref.canonical.weights();
  std::array<MatrixX<Scalar>, 3> f;
  for (int l = 0; l < 3; ++l) {
    const auto kset = geom.active_set(l);
    f[l].resize(nl[l], r);
    for (Index q = 0; q < r; ++q)
      f[l].col(q) = detail::assembled_vector<Scalar>(ref.canonical.factor(l).col(q), kset, n[l], 0,
                                                     nl[l], opts.accumulation, l);
  }
  return CanonicalTensor<Scalar>::from_raw(nl, std::move(w), std::move(f));
}

/// Tucker analogue of the assembled sum: factor columns are assembled per
/// mode, the core is reused.  Assembled factors are not orthonormal; callers
/// wanting the orthonormal form apply orthonormalize() and absorb the
/// transforms into the core.
template <typename Scalar>
TuckerTensor<Scalar> assembled_sum_tucker(const ReferenceTensor<Scalar>& ref,
                                          const LatticeGeometry& geom, const SumOptions& opts = {}) {
  if (!ref.tucker)
    throw std::invalid_argument("assembled_sum_tucker: reference has no Tucker form");
  if (!geom.defects.empty())
    throw std::invalid_argument(
        "assembled_sum_tucker: geometry carries defects; use defected_sum");
  const Dims3 nl = ref.base_grid.points();
  std::array<MatrixX<Scalar>, 3> f;
  for (int l = 0; l < 3; ++l) {
    const Index n = nl[l] / geom.cells[l];
    const auto kset = geom.active_set(l);
    const auto& tf = ref.tucker->factor(l);
    f[l].resize(nl[l], tf.cols());
    for (Index q = 0; q < tf.cols(); ++q)
      f[l].col(q) =
          detail::assembled_vector<Scalar>(tf.col(q), kset, n, 0, nl[l], opts.accumulation, l);
  }
  Tensor3<Scalar> core = ref.tucker->core();
  core.data() *= Scalar(geom.base_charge);
  return TuckerTensor<Scalar>(nl, std::move(core), std::move(f));
}

/// Lookup table of reference tensors by kernel.
template <typename Scalar = double>
class ReferenceSet {
 public:
  void add(ReferenceTensor<Scalar> ref) { refs_.push_back(std::move(ref)); }
  const ReferenceTensor<Scalar>& find(const KernelSpec& kernel) const {
    for (const auto& r : refs_)
      if (r.kernel == kernel) return r;
    throw std::invalid_argument("no reference tensor built for kernel " + kernel.key());
  }
  bool has(const KernelSpec& kernel) const {
    for (const auto& r : refs_)
      if (r.kernel == kernel) return true;
    return false;
  }

 private:
  std::vector<ReferenceTensor<Scalar>> refs_;
};

namespace detail {

// If the sites form a full Cartesian product of per-mode index sets, return
// those sets: the cluster can then be assembled at reference rank instead of
// site-by-site concatenation.
inline std::optional<std::array<std::vector<int>, 3>> product_structure(
    const std::vector<Int3>& sites) {
  std::array<std::set<int>, 3> axes;
  for (const auto& s : sites)
    for (int l = 0; l < 3; ++l) axes[l].insert(s[l]);
  size_t prod = 1;
  for (int l = 0; l < 3; ++l) prod *= axes[l].size();
  if (prod != sites.size()) return std::nullopt;
  std::set<Int3> have(sites.begin(), sites.end());
  for (int a : axes[0])
    for (int b : axes[1])
      for (int c : axes[2])
        if (!have.count(Int3{a, b, c})) return std::nullopt;
  std::array<std::vector<int>, 3> out;
  for (int l = 0; l < 3; ++l) out[l].assign(axes[l].begin(), axes[l].end());
  return out;
}

// Canonical tensor of one defect cluster on the N_L grid.
template <typename Scalar>
CanonicalTensor<Scalar> defect_cluster_canonical(const DefectSpec& defect,
                                                 const KernelSpec& base_kernel,
                                                 const ReferenceSet<Scalar>& refs,
                                                 const UniformGrid<Scalar>& grid, Index n_per_cell,
                                                 const SumOptions& opts) {
  const KernelSpec kernel = defect.kernel ? *defect.kernel : base_kernel;
  const ReferenceTensor<Scalar>& ref = refs.find(kernel);
  const Dims3 nl = grid.points();
  const Scalar z = Scalar(defect.charge);

  std::array<long, 3> off{std::lround(defect.grid_offset[0]), std::lround(defect.grid_offset[1]),
                          std::lround(defect.grid_offset[2])};

  if (auto axes = product_structure(defect.sites)) {
    // assembled cluster (multi-level reuse): rank stays at the reference rank
    VectorX<Scalar> w = z * ref.canonical.weights();
    std::array<MatrixX<Scalar>, 3> f;
    for (int l = 0; l < 3; ++l) {
      f[l].resize(nl[l], ref.canonical.rank());
      for (Index q = 0; q < ref.canonical.rank(); ++q)
        f[l].col(q) = assembled_vector<Scalar>(ref.canonical.factor(l).col(q), (*axes)[l],
                                               n_per_cell, off[l], nl[l], opts.accumulation, l);
    }
    return CanonicalTensor<Scalar>::from_raw(nl, std::move(w), std::move(f));
  }

  CanonicalTensor<Scalar> sum = CanonicalTensor<Scalar>::zero(nl);
  for (const auto& site : defect.sites) {
    const auto c = defect_grid_shift(site, defect.grid_offset, n_per_cell);
    sum = add_concat(sum, windowed_canonical(ref, c, z));
  }
  return sum;
}

}  // namespace detail

/// Adds defect cluster tensors to a base lattice sum.  Without a truncation
/// spec the result keeps the exact structured sum (rank r0 + sum r_s); with
/// one, the canonical route compresses through canonical_to_tucker and the
/// Tucker route through tucker_sum_to_tucker, and the spectral report records
/// the discarded-tail bound.
template <typename Scalar>
LatticeSumResult<Scalar> defected_sum(const LatticeSumResult<Scalar>& base,
                                      const std::vector<DefectSpec>& defects,
                                      const ReferenceSet<Scalar>& refs,
                                      const std::optional<TruncationSpec>& spec,
                                      const SumOptions& opts = {}) {
  LatticeSumResult<Scalar> out;
  out.geometry = base.geometry;
  out.grid = base.grid;
  out.provenance = base.provenance;
  const Index n_per_cell = base.grid.points()[0] / base.geometry.cells[0];

  if (defects.empty()) {
    out.tensor = base.tensor;
    out.report = base.report;
    return out;
  }
  for (const auto& d : defects) {
    if (d.sites.empty()) throw std::invalid_argument("defected_sum: defect with no sites");
    const KernelSpec k = d.kernel ? *d.kernel : base.geometry.kernel;
    if (!refs.has(k))
      throw std::invalid_argument("defected_sum: no reference tensor for kernel " + k.key());
  }

  std::vector<CanonicalTensor<Scalar>> clusters;
  clusters.reserve(defects.size());
  for (const auto& d : defects) {
    clusters.push_back(detail::defect_cluster_canonical(d, base.geometry.kernel, refs, base.grid,
                                                        n_per_cell, opts));
    out.provenance.push_back({d.kind == DefectKind::vacancy ? "vacancy cluster" : "impurity cluster",
                              clusters.back().rank(),
                              Dims3{0, 0, 0},
                              Index(d.sites.size())});
    out.geometry.defects.push_back(d);
  }

  if (base.is_canonical()) {
    CanonicalTensor<Scalar> total = base.canonical();
    for (const auto& c : clusters) total = add_concat(total, c);
    if (spec) {
      auto [t, report] = canonical_to_tucker(total, *spec);
      out.tensor = std::move(t);
      out.report = std::move(report);
    } else {
      out.tensor = std::move(total);
    }
  } else {
    std::vector<TuckerTensor<Scalar>> terms;
    terms.push_back(base.tucker_tensor());
    for (const auto& c : clusters) terms.push_back(as_diagonal_tucker(c));
    if (spec) {
      auto [t, report] = tucker_sum_to_tucker<Scalar>(terms, *spec);
      out.tensor = std::move(t);
      out.report = std::move(report);
    } else {
      TuckerTensor<Scalar> total = terms.front();
      for (size_t i = 1; i < terms.size(); ++i) total = tucker_concat(total, terms[i]);
      out.tensor = std::move(total);
    }
  }
  return out;
}

/// A rectangular sub-lattice placed at a (possibly fractional) cell offset
/// inside the parent box.
struct SublatticePlacement {
  LatticeGeometry geom;
  Array3<double> offset_cells = Array3<double>::Zero();
};

/// Union of disjoint rectangular sub-lattices: assembled per sub-lattice on
/// the shared N_L grid, then summed by concatenation and optionally truncated.
template <typename Scalar>
LatticeSumResult<Scalar> sublattice_union_sum(const std::vector<SublatticePlacement>& subs,
                                              const ReferenceTensor<Scalar>& ref,
                                              const LatticeGeometry& parent,
                                              const std::optional<TruncationSpec>& spec,
                                              const SumOptions& opts = {}) {
  if (subs.empty()) throw std::invalid_argument("sublattice_union_sum: no sublattices");
  const Dims3 nl = ref.base_grid.points();
  const Index n_per_cell = nl[0] / parent.cells[0];

  // disjointness in grid coordinates
  std::set<std::array<long, 3>> seen;
  for (const auto& s : subs) {
    if (!s.geom.full_rectangular())
      throw std::invalid_argument("sublattice_union_sum: sublattices must be rectangular");
    for (const auto& cell : active_cells(s.geom)) {
      std::array<long, 3> g;
      for (int l = 0; l < 3; ++l)
        g[l] = long(cell[l]) * n_per_cell + std::lround(s.offset_cells[l] * double(n_per_cell));
      if (!seen.insert(g).second)
        throw std::invalid_argument("sublattice_union_sum: sublattices overlap");
    }
  }

  LatticeSumResult<Scalar> out;
  out.geometry = parent;
  out.grid = ref.base_grid;
  CanonicalTensor<Scalar> total = CanonicalTensor<Scalar>::zero(nl);
  for (const auto& s : subs) {
    std::array<long, 3> off;
    VectorX<Scalar> w = Scalar(s.geom.base_charge) * ref.canonical.weights();
    std::array<MatrixX<Scalar>, 3> f;
    for (int l = 0; l < 3; ++l) {
      off[l] = std::lround(s.offset_cells[l] * double(n_per_cell));
      const auto kset = s.geom.active_set(l);
      f[l].resize(nl[l], ref.canonical.rank());
      for (Index q = 0; q < ref.canonical.rank(); ++q)
        f[l].col(q) = detail::assembled_vector<Scalar>(ref.canonical.factor(l).col(q), kset,
                                                       n_per_cell, off[l], nl[l],
                                                       opts.accumulation, l);
    }
    auto part = CanonicalTensor<Scalar>::from_raw(nl, std::move(w), std::move(f));
    out.provenance.push_back({"sublattice", part.rank(), Dims3{0, 0, 0},
                              Index(active_cells(s.geom).size())});
    total = add_concat(total, part);
  }
  if (spec) {
    auto [t, report] = canonical_to_tucker(total, *spec);
    out.tensor = std::move(t);
    out.report = std::move(report);
  } else {
    out.tensor = std::move(total);
  }
  return out;
}

/// One line of an axis-assembled plan: the lattice coordinates in the
/// non-assembled modes plus a real offset (cell units) applied to the whole
/// line's placement.
struct LineShift {
  Int3 cell{0, 0, 0};
  Array3<double> offset_cells = Array3<double>::Zero();
};

struct AxisPlan {
  std::array<bool, 3> assembled{true, true, true};
  std::vector<LineShift> lines;
};

/// Partially assembled sum for geometries with tensor structure in a subset of
/// modes (parallelogram-type lattices): assembled 1D sums in the declared
/// modes, direct concatenation over the supplied lines elsewhere.  Lines whose
/// assembled-mode offsets coincide are merged rank-preservingly through the
/// shared-factor sum, so zero offsets recover the fully assembled result at
/// reference rank.
template <typename Scalar>
LatticeSumResult<Scalar> axis_assembled_sum(const LatticeGeometry& geom,
                                            const ReferenceTensor<Scalar>& ref,
                                            const AxisPlan& plan,
                                            const std::optional<TruncationSpec>& spec,
                                            const SumOptions& opts = {}) {
  const Dims3 nl = ref.base_grid.points();
  std::array<Index, 3> n;
  std::vector<int> free_modes;
  for (int l = 0; l < 3; ++l) {
    if (nl[l] % geom.cells[l] != 0)
      throw std::invalid_argument("axis_assembled_sum: grid does not tile the lattice");
    n[l] = nl[l] / geom.cells[l];
    if (!plan.assembled[l]) free_modes.push_back(l);
  }
  if (free_modes.empty())
    throw std::invalid_argument("axis_assembled_sum: all modes assembled; use assembled_sum");

  // the lines must enumerate the Cartesian product of the free-mode sets once
  std::set<std::vector<int>> expected;
  {
    std::vector<std::vector<int>> sets;
    for (int m : free_modes) sets.push_back(geom.active_set(m));
    std::vector<int> idx(sets.size(), 0);
    while (true) {
      std::vector<int> combo;
      for (size_t i = 0; i < sets.size(); ++i) combo.push_back(sets[i][idx[i]]);
      expected.insert(combo);
      size_t carry = 0;
      while (carry < sets.size() && ++idx[carry] == int(sets[carry].size()) &&
             (idx[carry] = 0, true))
        ++carry;
      if (carry == sets.size()) break;
    }
  }
  std::set<std::vector<int>> got;
  for (const auto& line : plan.lines) {
    std::vector<int> combo;
    for (int m : free_modes) combo.push_back(line.cell[m]);
    if (!got.insert(combo).second)
      throw std::invalid_argument("axis_assembled_sum: inconsistent shift table (duplicate line)");
  }
  if (got != expected)
    throw std::invalid_argument(
        "axis_assembled_sum: inconsistent shift table (lines do not cover the lattice)");

  // group lines sharing the assembled-mode offsets; members of a group share
  // their assembled factors and merge at constant rank
  auto line_term = [&](const LineShift& line) {
    VectorX<Scalar> w = Scalar(geom.base_charge) * ref.canonical.weights();
    std::array<MatrixX<Scalar>, 3> f;
    for (int l = 0; l < 3; ++l) {
      const long off = std::lround(line.offset_cells[l] * double(n[l]));
      f[l].resize(nl[l], ref.canonical.rank());
      if (plan.assembled[l]) {
        const auto kset = geom.active_set(l);
        for (Index q = 0; q < ref.canonical.rank(); ++q)
          f[l].col(q) = detail::assembled_vector<Scalar>(ref.canonical.factor(l).col(q), kset,
                                                         n[l], off, nl[l], opts.accumulation, l);
      } else {
        const long shift = long(line.cell[l]) * long(n[l]) + off;
        const std::vector<int> single{0};
        for (Index q = 0; q < ref.canonical.rank(); ++q)
          f[l].col(q) = detail::assembled_vector<Scalar>(ref.canonical.factor(l).col(q), single,
                                                         n[l], shift, nl[l],
                                                         Accumulation::ascending, l);
      }
    }
    return CanonicalTensor<Scalar>::from_raw(nl, std::move(w), std::move(f));
  };

  std::map<std::array<double, 3>, std::vector<const LineShift*>> groups;
  for (const auto& line : plan.lines) {
    std::array<double, 3> key{0, 0, 0};
    for (int l = 0; l < 3; ++l)
      if (plan.assembled[l]) key[l] = line.offset_cells[l];
    groups[key].push_back(&line);
  }

  LatticeSumResult<Scalar> out;
  out.geometry = geom;
  out.grid = ref.base_grid;
  CanonicalTensor<Scalar> total = CanonicalTensor<Scalar>::zero(nl);
  const bool mergeable = free_modes.size() == 1;  // two shared modes needed
  for (const auto& [key, lines] : groups) {
    (void)key;
    CanonicalTensor<Scalar> group_sum = line_term(*lines.front());
    for (size_t i = 1; i < lines.size(); ++i) {
      CanonicalTensor<Scalar> term = line_term(*lines[i]);
      if (mergeable) {
        const int shared1 = plan.assembled[0] ? 0 : 1;
        const int shared2 = plan.assembled[2] ? 2 : 1;
        group_sum = add_shared_factors(group_sum, term, shared1, shared2);
      } else {
        group_sum = add_concat(group_sum, term);
      }
    }
    total = add_concat(total, group_sum);
    out.provenance.push_back({"axis group", group_sum.rank(), Dims3{0, 0, 0},
                              Index(lines.size())});
  }
  if (spec) {
    auto [t, report] = canonical_to_tucker(total, *spec);
    out.tensor = std::move(t);
    out.report = std::move(report);
  } else {
    out.tensor = std::move(total);
  }
  return out;
}

/// Galerkin projection onto a separable rank-1 basis via 1D Hadamard and
/// scalar products; the matrix is symmetric by construction.
template <typename Scalar, typename TensorT>
MatrixX<Scalar> galerkin_matrix(const TensorT& v, const std::vector<CanonicalTensor<Scalar>>& basis) {
  const Index nb = Index(basis.size());
  MatrixX<Scalar> g(nb, nb);
  for (Index k = 0; k < nb; ++k) {
    for (Index m = k; m < nb; ++m) {
      const CanonicalTensor<Scalar> prod = hadamard_rank1(basis[size_t(k)], basis[size_t(m)]);
      const Scalar val = inner(prod, v);
      g(k, m) = val;
      g(m, k) = val;
    }
  }
  return g;
}

template <typename Scalar>
MatrixX<Scalar> galerkin_matrix(const LatticeSumResult<Scalar>& v,
                                const std::vector<CanonicalTensor<Scalar>>& basis) {
  return v.is_canonical() ? galerkin_matrix<Scalar>(v.canonical(), basis)
                          : galerkin_matrix<Scalar>(v.tucker_tensor(), basis);
}

/// One grid-shifted source of a lattice configuration.
template <typename Scalar = double>
struct GridSource {
  std::array<long, 3> shift{0, 0, 0};  // mesh units
  Scalar weight = 1;
  KernelSpec kernel = KernelSpec::newton();
};

/// The brute-force enumeration behind the oracle: every active base cell plus
/// every defect site, each as an additive source.
template <typename Scalar = double>
std::vector<GridSource<Scalar>> enumerate_sources(const LatticeGeometry& geom, Index n_per_cell) {
  std::vector<GridSource<Scalar>> out;
  LatticeGeometry base = geom;
  base.defects.clear();
  for (const auto& cell : active_cells(base)) {
    GridSource<Scalar> s;
    for (int l = 0; l < 3; ++l) s.shift[l] = long(cell[l]) * long(n_per_cell);
    s.weight = Scalar(geom.base_charge);
    s.kernel = geom.kernel;
    out.push_back(std::move(s));
  }
  for (const auto& d : geom.defects) {
    for (const auto& site : d.sites) {
      GridSource<Scalar> s;
      s.shift = detail::defect_grid_shift(site, d.grid_offset, n_per_cell);
      s.weight = Scalar(d.charge);
      s.kernel = d.kernel ? *d.kernel : geom.kernel;
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// Single entry of the windowed-sum oracle at (i, j, k).
template <typename Scalar>
Scalar oracle_entry(const std::vector<GridSource<Scalar>>& sources, const ReferenceSet<Scalar>& refs,
                    Index i, Index j, Index k) {
  Scalar v = 0;
  for (const auto& s : sources) {
    const ReferenceTensor<Scalar>& ref = refs.find(s.kernel);
    const auto win = detail::source_window(s.shift, ref.base_grid);
    Scalar e = 0;
    const auto& c = ref.canonical;
    for (Index q = 0; q < c.rank(); ++q)
      e += c.weights()[q] * c.factor(0)(win[0].begin + i, q) * c.factor(1)(win[1].begin + j, q) *
           c.factor(2)(win[2].begin + k, q);
    v += s.weight * e;
  }
  return v;
}

/// Materialized brute-force oracle: the direct sum over all sources of their
/// windowed reference tensors.  Shares the projection with the fast path, so
/// comparisons isolate the summation error.  Guarded against virtual grids.
/// Worker threads own disjoint slab ranges, so the result is independent of
/// the thread count.
template <typename Scalar>
Tensor3<Scalar> dense_oracle(const std::vector<GridSource<Scalar>>& sources,
                             const ReferenceSet<Scalar>& refs, const UniformGrid<Scalar>& grid,
                             Index guard = 10'000'000, int threads = 1) {
  ensure_dense_guard(grid.points(), guard);
  Tensor3<Scalar> out(grid.points());
  parallel_for_chunks(grid.points()[2], threads, [&](Index klo, Index khi) {
    for (const auto& s : sources) {
      const ReferenceTensor<Scalar>& ref = refs.find(s.kernel);
      const auto win = detail::source_window(s.shift, ref.base_grid);
      const auto& c = ref.canonical;
      for (Index q = 0; q < c.rank(); ++q) {
        const auto f0 = c.factor(0).col(q).segment(win[0].begin, win[0].length);
        const auto f1 = c.factor(1).col(q).segment(win[1].begin, win[1].length);
        const auto f2 = c.factor(2).col(q).segment(win[2].begin, win[2].length);
        const MatrixX<Scalar> g = f0 * f1.transpose();
        for (Index k = klo; k < khi; ++k)
          out.slab(k) += (s.weight * c.weights()[q] * f2[k]) * g;
      }
    }
  });
  return out;
}

}  // namespace latsum
