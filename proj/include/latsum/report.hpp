#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "latsum/lattice_sum.hpp"
#include "latsum/rank_reduction.hpp"
#include "latsum/tensor_io.hpp"

namespace latsum {

/// Text writers share one fixed formatting: 17 significant digits, so reruns
/// diff byte-identically.
void write_spectral_report(std::ostream& os, const SpectralReport<double>& report);

void write_provenance(std::ostream& os, const LatticeSumResult<double>& result, std::uint64_t seed,
                      const std::vector<std::string>& extra_lines = {});

/// Axis-aligned plane of a stored tensor as a text table (1-based indices).
void export_plane(std::ostream& os, const TensorVariant& tensor, int mode, Index index);

/// Axis-aligned line: values along `mode` with the two other indices fixed
/// (1-based in the emitted table).
void export_line(std::ostream& os, const TensorVariant& tensor, int mode, Index fixed_a,
                 Index fixed_b);

}  // namespace latsum
