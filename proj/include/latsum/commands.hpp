#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "latsum/config.hpp"
#include "latsum/lattice_sum.hpp"

namespace latsum {

/// Failed verification (exit code 1 at the CLI).
class VerificationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Builds (or loads from cache) the reference tensor for the config's kernel
/// on the config grid, stores it in the cache and writes the calibration
/// report.  Returns the reference.
ReferenceTensor<double> cmd_build_reference(const RunConfig& cfg, std::ostream& log);

/// Builds the lattice sum the config describes (assembled, defected,
/// sublattice union, axis plan, or direct charge sum) and writes the tensor
/// file plus the provenance sidecar.
LatticeSumResult<double> cmd_sum(const RunConfig& cfg, std::ostream& log);

struct VerifyOptions {
  std::string tensor_path;
  std::string provenance_path;  // optional: recorded truncation bound is read from it
  int probes = 500;
  double tolerance = 1e-10;
  double bound_abs = -1.0;  // optional explicit truncation bound to check against
};

/// Probes a stored tensor against the windowed-sum oracle; throws
/// VerificationError when the probe error exceeds the tolerance (untruncated
/// runs) or the recorded bound (truncated runs).
void cmd_verify(const RunConfig& cfg, const VerifyOptions& opts, std::ostream& log);

struct BenchRow {
  int L = 0;
  Index grid_points = 0;
  double assembled_seconds = 0.0;
  double oracle_seconds = -1.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double assembled_exponent = 0.0;
  double oracle_exponent = 0.0;
};

/// Times the assembled sum over the L list (and the dense oracle over
/// `oracle_L`) on cubic lattices, then fits log-log scaling exponents.
BenchResult cmd_bench(const RunConfig& cfg, const std::vector<int>& L_list,
                      const std::vector<int>& oracle_L, int repetitions, std::ostream& log);

}  // namespace latsum
