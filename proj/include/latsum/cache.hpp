#pragma once

#include <optional>
#include <string>

#include "latsum/reference.hpp"

namespace latsum {

/// Cache directory resolution: LATSUM_CACHE_DIR env var, then the config
/// override, then ./latsum_cache.
std::string resolve_cache_dir(const std::optional<std::string>& config_override);

/// Key of a reference tensor build: kernel, base grid, M, configured C0 and
/// doubling.  Changing any of them changes the file name.
std::string reference_cache_key(const KernelSpec& kernel, const UniformGrid<double>& base_grid,
                                int M, double step_constant, bool doubled);

/// Loads a cached reference if the sidecar matches the requested build
/// exactly.  A present but corrupt cache entry is an error, not a rebuild.
std::optional<ReferenceTensor<double>> try_load_reference(const std::string& dir,
                                                          const KernelSpec& kernel,
                                                          const UniformGrid<double>& base_grid,
                                                          int M, double step_constant, bool doubled);

void store_reference(const std::string& dir, const ReferenceTensor<double>& ref,
                     double step_constant_config);

}  // namespace latsum
