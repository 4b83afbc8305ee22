#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latsum/geometry.hpp"
#include "latsum/kernel.hpp"
#include "latsum/lattice_sum.hpp"
#include "latsum/rank_reduction.hpp"

namespace latsum {

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parsed run configuration.  One JSON file drives every subcommand; CLI
/// flags override keys one-to-one.
struct RunConfig {
  KernelSpec kernel = KernelSpec::newton();

  // grid block: n grid points per unit cell (per box for reference-only runs)
  Index n = 16;
  double b = 1.0;

  // quadrature block: M <= 0 selects by epsilon from the calibration table,
  // C0 <= 0 selects the swept default
  int quad_M = 0;
  double quad_C0 = 0.0;
  double quad_eps = 1e-6;

  LatticeGeometry geometry;
  bool has_geometry = false;
  std::optional<AxisPlan> axis_plan;
  std::vector<SublatticePlacement> sublattices;
  std::vector<ChargeEntry<double>> charges;  // direct-sum sources, optional

  std::optional<TruncationSpec> truncation;

  std::string output_tensor;
  std::string output_provenance;
  std::string output_report;

  std::string format = "canonical";  // or "tucker"
  Accumulation accumulation = Accumulation::sliding;
  std::uint64_t seed = 0;
  std::optional<std::string> cache_dir;
  int threads = 1;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config_json(const std::string& text, const std::string& origin = "<config>");

}  // namespace latsum
