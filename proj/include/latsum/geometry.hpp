#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "latsum/kernel.hpp"
#include "latsum/types.hpp"

namespace latsum {

enum class DefectKind { vacancy, impurity };

/// A cluster of perturbed lattice sites sharing kind, charge and kernel.
/// Vacancies carry the negated base charge so every defect is an additive
/// correction; `grid_offset` (mesh units) places clusters that do not sit on
/// lattice points — such positions are snapped, the residual is the caller's
/// O(h) placement error.
struct DefectSpec {
  std::vector<Int3> sites;
  DefectKind kind = DefectKind::vacancy;
  double charge = 0.0;
  std::optional<KernelSpec> kernel;  // impurities may carry their own kernel
  Array3<double> grid_offset = Array3<double>::Zero();

  bool on_lattice() const {
    return grid_offset[0] == 0.0 && grid_offset[1] == 0.0 && grid_offset[2] == 0.0;
  }
};

/// Per-mode active index set K = {-floor(L/2), ..., ceil(L/2)-1}; for even L
/// this is the K- u K+ convention kept verbatim (asymmetric about zero).
inline std::vector<int> default_active_set(int cells) {
  std::vector<int> k;
  for (int i = -(cells / 2); i <= (cells + 1) / 2 - 1; ++i) k.push_back(i);
  return k;
}

/// A rectangular sub-block of the lattice, offset in (possibly fractional)
/// cell units; used to compose unions such as hexagonal packings.
struct Sublattice {
  Int3 cells{1, 1, 1};
  Array3<double> offset_cells = Array3<double>::Zero();
};

/// Active lattice cells in a box of L1 x L2 x L3 unit cells of width b.
struct LatticeGeometry {
  Int3 cells{1, 1, 1};
  double cell_width = 1.0;
  double base_charge = 1.0;
  KernelSpec kernel = KernelSpec::newton();
  std::array<std::vector<int>, 3> active;  // empty = default K sets
  std::vector<DefectSpec> defects;
  std::vector<Sublattice> sublattices;

  std::vector<int> active_set(int mode) const {
    if (!active[mode].empty()) {
      for (int k : active[mode]) {
        if (k < -(cells[mode] / 2) || k > (cells[mode] + 1) / 2 - 1)
          throw std::invalid_argument("LatticeGeometry: active index " + std::to_string(k) +
                                      " outside K range in mode " + std::to_string(mode + 1));
      }
      return active[mode];
    }
    return default_active_set(cells[mode]);
  }

  bool full_rectangular() const {
    if (!defects.empty()) return false;
    for (int l = 0; l < 3; ++l) {
      if (!active[l].empty() &&
          active[l] != default_active_set(cells[l]))
        return false;
    }
    return true;
  }

  void validate() const {
    for (int l = 0; l < 3; ++l)
      if (cells[l] < 1) throw std::invalid_argument("LatticeGeometry: cells must be positive");
    if (!(cell_width > 0.0)) throw std::invalid_argument("LatticeGeometry: cell_width must be positive");
    for (const auto& d : defects) {
      if (d.sites.empty()) throw std::invalid_argument("DefectSpec: empty site list");
      if (d.kind == DefectKind::vacancy) {
        for (const auto& s : d.sites) {
          bool ok = true;
          for (int l = 0; l < 3; ++l) {
            const auto ks = active_set(l);
            ok = ok && std::find(ks.begin(), ks.end(), s[l]) != ks.end();
          }
          if (!ok)
            throw std::invalid_argument("DefectSpec: vacancy site not on the active lattice");
        }
      }
    }
  }
};

/// Enumerates the Cartesian product of the active sets minus on-lattice
/// vacancy sites, in ascending (k3, k2, k1) order.
inline std::vector<Int3> active_cells(const LatticeGeometry& geom) {
  std::set<Int3> removed;
  for (const auto& d : geom.defects)
    if (d.kind == DefectKind::vacancy && d.on_lattice())
      for (const auto& s : d.sites) removed.insert(s);
  const auto k1 = geom.active_set(0), k2 = geom.active_set(1), k3 = geom.active_set(2);
  std::vector<Int3> out;
  out.reserve(k1.size() * k2.size() * k3.size());
  for (int c : k3)
    for (int b : k2)
      for (int a : k1) {
        Int3 cell{a, b, c};
        if (!removed.count(cell)) out.push_back(cell);
      }
  return out;
}

}  // namespace latsum
