#include "latsum/cache.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "latsum/tensor_io.hpp"

namespace latsum {

namespace fs = std::filesystem;
using nlohmann::json;

std::string resolve_cache_dir(const std::optional<std::string>& config_override) {
  if (const char* env = std::getenv("LATSUM_CACHE_DIR"); env && *env) return env;
  if (config_override && !config_override->empty()) return *config_override;
  return "latsum_cache";
}

std::string reference_cache_key(const KernelSpec& kernel, const UniformGrid<double>& base_grid,
                                int M, double step_constant, bool doubled) {
  std::ostringstream os;
  os.precision(17);
  os << kernel.key() << "|";
  for (int l = 0; l < 3; ++l) os << base_grid.points(l) << "," << base_grid.box_width(l) << ";";
  os << "M=" << M << "|C0=" << step_constant << "|doubled=" << doubled << "|v"
     << int(kTensorFormatVersion);
  const std::string s = os.str();
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(s.data(), s.size());
  return hex.str();
}

namespace {

json sidecar_json(const ReferenceTensor<double>& ref, double step_constant_config) {
  json j;
  j["kernel"] = ref.kernel.key();
  j["base_n"] = {ref.base_grid.points(0), ref.base_grid.points(1), ref.base_grid.points(2)};
  j["base_b"] = {ref.base_grid.box_width(0), ref.base_grid.box_width(1),
                 ref.base_grid.box_width(2)};
  j["M"] = ref.M;
  j["C0_config"] = step_constant_config;
  j["step_constants"] = ref.step_constants;
  j["shell"] = {ref.shell.a, ref.shell.A};
  j["doubled"] = ref.doubled;
  j["rank"] = ref.canonical.rank();
  return j;
}

}  // namespace

void store_reference(const std::string& dir, const ReferenceTensor<double>& ref,
                     double step_constant_config) {
  fs::create_directories(dir);
  const std::string key =
      reference_cache_key(ref.kernel, ref.base_grid, ref.M, step_constant_config, ref.doubled);
  write_tensor(dir + "/" + key + ".ref.tns", TensorVariant(ref.canonical));
  std::ofstream os(dir + "/" + key + ".ref.json");
  os << sidecar_json(ref, step_constant_config).dump(2) << "\n";
}

std::optional<ReferenceTensor<double>> try_load_reference(const std::string& dir,
                                                          const KernelSpec& kernel,
                                                          const UniformGrid<double>& base_grid,
                                                          int M, double step_constant,
                                                          bool doubled) {
  const std::string key = reference_cache_key(kernel, base_grid, M, step_constant, doubled);
  const std::string tns = dir + "/" + key + ".ref.tns";
  const std::string side = dir + "/" + key + ".ref.json";
  if (!fs::exists(tns) || !fs::exists(side)) return std::nullopt;

  std::ifstream is(side);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw TensorIoError("corrupt cache sidecar " + side + ": " + e.what());
  }
  if (j.value("kernel", std::string()) != kernel.key() || j.value("M", -1) != M ||
      j.value("doubled", !doubled) != doubled)
    return std::nullopt;  // hash collision; treat as a miss

  ReferenceTensor<double> ref;
  ref.kernel = kernel;
  ref.base_grid = base_grid;
  ref.grid = doubled ? base_grid.doubled() : base_grid;
  ref.doubled = doubled;
  ref.M = M;
  ref.shell = Shell{j["shell"][0].get<double>(), j["shell"][1].get<double>()};
  ref.step_constants = j["step_constants"].get<std::vector<double>>();

  TensorVariant t = read_tensor(tns);  // throws on checksum mismatch
  ref.canonical = std::get<CanonicalTensor<double>>(std::move(t));

  if (ref.M > 0) {
    size_t i = 0;
    for (const auto& term : kernel.terms()) {
      const double c0 = ref.step_constants.at(i++);
      ref.expansion.terms.push_back(
          {term.coefficient, build_quadrature<double>(term.primitive, M, c0, ref.shell)});
    }
  }
  return ref;
}

}  // namespace latsum
