#include "latsum/report.hpp"

#include <ostream>

namespace latsum {

namespace {

void set_format(std::ostream& os) {
  os.precision(17);
  os.unsetf(std::ios::floatfield);
}

Dims3 variant_dims(const TensorVariant& t) {
  return std::holds_alternative<CanonicalTensor<double>>(t)
             ? std::get<CanonicalTensor<double>>(t).dims()
             : std::get<TuckerTensor<double>>(t).dims();
}

double variant_entry(const TensorVariant& t, Index i, Index j, Index k) {
  return std::holds_alternative<CanonicalTensor<double>>(t)
             ? std::get<CanonicalTensor<double>>(t).entry(i, j, k)
             : std::get<TuckerTensor<double>>(t).entry(i, j, k);
}

}  // namespace

void write_spectral_report(std::ostream& os, const SpectralReport<double>& report) {
  set_format(os);
  os << "# spectral report\n";
  os << "chosen_ranks " << report.chosen_ranks[0] << " " << report.chosen_ranks[1] << " "
     << report.chosen_ranks[2] << "\n";
  os << "bound_abs " << report.bound_abs << "\n";
  os << "bound_rel " << report.bound_rel << "\n";
  os << "weight_norm " << report.weight_norm << "\n";
  os << "input_norm " << report.input_norm << "\n";
  os << "stability_constant " << report.stability_constant << "\n";
  os << "stability_ok " << (report.stability_ok ? 1 : 0) << "\n";
  for (int l = 0; l < 3; ++l) {
    os << "sigma_mode" << (l + 1);
    if (report.tie_at_cutoff[l]) os << " (tie at cutoff)";
    for (Index k = 0; k < report.singular_values[l].size(); ++k)
      os << " " << report.singular_values[l][k];
    os << "\n";
  }
}

void write_provenance(std::ostream& os, const LatticeSumResult<double>& result, std::uint64_t seed,
                      const std::vector<std::string>& extra_lines) {
  set_format(os);
  os << "# lattice sum provenance\n";
  os << "seed " << seed << "\n";
  os << "grid " << result.grid.points()[0] << " " << result.grid.points()[1] << " "
     << result.grid.points()[2] << "\n";
  os << "cells " << result.geometry.cells[0] << " " << result.geometry.cells[1] << " "
     << result.geometry.cells[2] << "\n";
  if (result.is_canonical()) {
    os << "format canonical\n";
    os << "rank " << result.canonical().rank() << "\n";
  } else {
    const auto r = result.tucker_tensor().ranks();
    os << "format tucker\n";
    os << "ranks " << r[0] << " " << r[1] << " " << r[2] << "\n";
  }
  os << "summands " << result.provenance.size() << "\n";
  for (const auto& s : result.provenance)
    os << "summand \"" << s.label << "\" rank " << s.canonical_rank << " sites " << s.sites << "\n";
  if (result.report) {
    os << "truncation_bound_abs " << result.report->bound_abs << "\n";
    os << "truncation_bound_rel " << result.report->bound_rel << "\n";
  }
  for (const auto& line : extra_lines) os << line << "\n";
}

void export_plane(std::ostream& os, const TensorVariant& tensor, int mode, Index index) {
  const Dims3 d = variant_dims(tensor);
  if (mode < 0 || mode > 2) throw std::out_of_range("export_plane: mode must be 1..3");
  if (index < 0 || index >= d[mode])
    throw std::out_of_range("export_plane: index " + std::to_string(index + 1) +
                            " outside mode size " + std::to_string(d[mode]));
  set_format(os);
  const int a = mode == 0 ? 1 : 0;
  const int b = mode == 2 ? 1 : 2;
  os << "# plane mode=" << (mode + 1) << " index=" << (index + 1) << "\n";
  os << "# columns: i_mode" << (a + 1) << " i_mode" << (b + 1) << " value\n";
  Index idx[3];
  idx[mode] = index;
  for (Index ib = 0; ib < d[b]; ++ib) {
    for (Index ia = 0; ia < d[a]; ++ia) {
      idx[a] = ia;
      idx[b] = ib;
      os << (ia + 1) << "\t" << (ib + 1) << "\t" << variant_entry(tensor, idx[0], idx[1], idx[2])
         << "\n";
    }
  }
}

void export_line(std::ostream& os, const TensorVariant& tensor, int mode, Index fixed_a,
                 Index fixed_b) {
  const Dims3 d = variant_dims(tensor);
  if (mode < 0 || mode > 2) throw std::out_of_range("export_line: mode must be 1..3");
  const int a = mode == 0 ? 1 : 0;
  const int b = mode == 2 ? 1 : 2;
  if (fixed_a < 0 || fixed_a >= d[a] || fixed_b < 0 || fixed_b >= d[b])
    throw std::out_of_range("export_line: fixed index outside the grid");
  set_format(os);
  os << "# line mode=" << (mode + 1) << " fixed i_mode" << (a + 1) << "=" << (fixed_a + 1)
     << " i_mode" << (b + 1) << "=" << (fixed_b + 1) << "\n";
  os << "# columns: i value\n";
  Index idx[3];
  idx[a] = fixed_a;
  idx[b] = fixed_b;
  for (Index i = 0; i < d[mode]; ++i) {
    idx[mode] = i;
    os << (i + 1) << "\t" << variant_entry(tensor, idx[0], idx[1], idx[2]) << "\n";
  }
}

}  // namespace latsum
