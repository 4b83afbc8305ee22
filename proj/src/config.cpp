#include "latsum/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace latsum {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + key + "': " + what);
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) fail(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

template <typename T>
T as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail(path, "has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& path, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return as<T>(*it, path + "." + key);
}

std::array<int, 3> int3(const json& j, const std::string& path) {
  auto v = as<std::vector<int>>(j, path);
  if (v.size() != 3) fail(path, "expected an array of 3 integers");
  return {v[0], v[1], v[2]};
}

Array3<double> real3(const json& j, const std::string& path) {
  auto v = as<std::vector<double>>(j, path);
  if (v.size() != 3) fail(path, "expected an array of 3 numbers");
  return Array3<double>(v[0], v[1], v[2]);
}

KernelSpec parse_kernel(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  const std::string type = as<std::string>(require(j, "type", path), path + ".type");
  try {
    if (type == "newton") return KernelSpec::newton();
    if (type == "yukawa")
      return KernelSpec::yukawa(as<double>(require(j, "lambda", path), path + ".lambda"));
    if (type == "slater")
      return KernelSpec::slater(as<double>(require(j, "lambda", path), path + ".lambda"));
    if (type == "inverse_power")
      return KernelSpec::inverse_power(as<double>(require(j, "alpha", path), path + ".alpha"),
                                       get_or<double>(j, "coefficient", path, 1.0));
    if (type == "dipole_dipole")
      return KernelSpec::dipole_dipole(get_or<double>(j, "C0", path, 1.0));
    if (type == "lennard_jones")
      return KernelSpec::lennard_jones(as<double>(require(j, "epsilon", path), path + ".epsilon"),
                                       as<double>(require(j, "sigma", path), path + ".sigma"));
    if (type == "buckingham")
      return KernelSpec::buckingham(as<double>(require(j, "A", path), path + ".A"),
                                    as<double>(require(j, "rho", path), path + ".rho"),
                                    as<double>(require(j, "C", path), path + ".C"));
    if (type == "gaussian_sum") {
      std::vector<GaussianTerm> terms;
      const auto& arr = require(j, "terms", path);
      if (!arr.is_array()) fail(path + ".terms", "expected an array");
      for (size_t i = 0; i < arr.size(); ++i) {
        const std::string p = path + ".terms[" + std::to_string(i) + "]";
        terms.push_back({as<double>(require(arr[i], "weight", p), p + ".weight"),
                         as<double>(require(arr[i], "exponent", p), p + ".exponent")});
      }
      return KernelSpec::gaussian_sum(std::move(terms));
    }
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
  fail(path + ".type", "unknown kernel type '" + type + "'");
}

DefectSpec parse_defect(const json& j, const std::string& path, const LatticeGeometry& geom) {
  DefectSpec d;
  const std::string kind = as<std::string>(require(j, "kind", path), path + ".kind");
  if (kind == "vacancy")
    d.kind = DefectKind::vacancy;
  else if (kind == "impurity")
    d.kind = DefectKind::impurity;
  else
    fail(path + ".kind", "expected 'vacancy' or 'impurity'");

  const auto& pos = require(j, "positions", path);
  if (!pos.is_array() || pos.empty()) fail(path + ".positions", "expected a non-empty array");
  for (size_t i = 0; i < pos.size(); ++i)
    d.sites.push_back(int3(pos[i], path + ".positions[" + std::to_string(i) + "]"));

  if (j.contains("charge"))
    d.charge = as<double>(j["charge"], path + ".charge");
  else if (d.kind == DefectKind::vacancy)
    d.charge = -geom.base_charge;  // vacancy removes one base source
  else
    fail(path + ".charge", "missing (impurities must state their charge)");

  if (j.contains("kernel")) d.kernel = parse_kernel(j["kernel"], path + ".kernel");
  if (j.contains("grid_offset")) d.grid_offset = real3(j["grid_offset"], path + ".grid_offset");
  return d;
}

}  // namespace

RunConfig parse_config_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": not valid JSON: " + e.what());
  }

  RunConfig cfg;
  if (j.contains("kernel")) cfg.kernel = parse_kernel(j["kernel"], "kernel");

  if (j.contains("grid")) {
    const auto& g = j["grid"];
    cfg.n = get_or<Index>(g, "n", "grid", cfg.n);
    cfg.b = get_or<double>(g, "b", "grid", cfg.b);
    if (cfg.n < 2 || cfg.n % 2 != 0) fail("grid.n", "must be even and >= 2");
    if (!(cfg.b > 0.0)) fail("grid.b", "must be positive");
  }

  if (j.contains("quadrature")) {
    const auto& q = j["quadrature"];
    cfg.quad_M = get_or<int>(q, "M", "quadrature", 0);
    cfg.quad_C0 = get_or<double>(q, "C0", "quadrature", 0.0);
    cfg.quad_eps = get_or<double>(q, "epsilon", "quadrature", cfg.quad_eps);
    if (!(cfg.quad_eps > 0.0 && cfg.quad_eps < 1.0)) fail("quadrature.epsilon", "must lie in (0,1)");
  }

  if (j.contains("geometry")) {
    cfg.has_geometry = true;
    const auto& g = j["geometry"];
    cfg.geometry.cells = int3(require(g, "cells", "geometry"), "geometry.cells");
    cfg.geometry.cell_width = get_or<double>(g, "cell_width", "geometry", cfg.b);
    cfg.geometry.base_charge = get_or<double>(g, "base_charge", "geometry", 1.0);
    cfg.geometry.kernel = cfg.kernel;
    if (g.contains("active_sets")) {
      const auto& a = g["active_sets"];
      if (!a.is_array() || a.size() != 3) fail("geometry.active_sets", "expected 3 arrays");
      for (int l = 0; l < 3; ++l)
        cfg.geometry.active[l] =
            as<std::vector<int>>(a[size_t(l)], "geometry.active_sets[" + std::to_string(l) + "]");
    }
    if (g.contains("defects")) {
      const auto& arr = g["defects"];
      if (!arr.is_array()) fail("geometry.defects", "expected an array");
      for (size_t i = 0; i < arr.size(); ++i)
        cfg.geometry.defects.push_back(
            parse_defect(arr[i], "geometry.defects[" + std::to_string(i) + "]", cfg.geometry));
    }
    if (g.contains("sublattices")) {
      const auto& arr = g["sublattices"];
      if (!arr.is_array()) fail("geometry.sublattices", "expected an array");
      for (size_t i = 0; i < arr.size(); ++i) {
        const std::string p = "geometry.sublattices[" + std::to_string(i) + "]";
        SublatticePlacement s;
        s.geom.cells = int3(require(arr[i], "cells", p), p + ".cells");
        s.geom.cell_width = cfg.geometry.cell_width;
        s.geom.base_charge = get_or<double>(arr[i], "base_charge", p, cfg.geometry.base_charge);
        s.geom.kernel = cfg.kernel;
        if (arr[i].contains("offset_cells"))
          s.offset_cells = real3(arr[i]["offset_cells"], p + ".offset_cells");
        cfg.sublattices.push_back(std::move(s));
      }
    }
    if (g.contains("axis_plan")) {
      const auto& a = g["axis_plan"];
      AxisPlan plan;
      const auto m = as<std::vector<bool>>(require(a, "assembled_modes", "geometry.axis_plan"),
                                           "geometry.axis_plan.assembled_modes");
      if (m.size() != 3) fail("geometry.axis_plan.assembled_modes", "expected 3 booleans");
      for (int l = 0; l < 3; ++l) plan.assembled[l] = m[size_t(l)];
      const auto& lines = require(a, "lines", "geometry.axis_plan");
      if (!lines.is_array()) fail("geometry.axis_plan.lines", "expected an array");
      for (size_t i = 0; i < lines.size(); ++i) {
        const std::string p = "geometry.axis_plan.lines[" + std::to_string(i) + "]";
        LineShift ls;
        ls.cell = int3(require(lines[i], "cell", p), p + ".cell");
        if (lines[i].contains("offset_cells"))
          ls.offset_cells = real3(lines[i]["offset_cells"], p + ".offset_cells");
        plan.lines.push_back(std::move(ls));
      }
      cfg.axis_plan = std::move(plan);
    }
    try {
      cfg.geometry.validate();
    } catch (const std::invalid_argument& e) {
      fail("geometry", e.what());
    }
  }

  if (j.contains("charges")) {
    const auto& arr = j["charges"];
    if (!arr.is_array()) fail("charges", "expected an array");
    for (size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "charges[" + std::to_string(i) + "]";
      ChargeEntry<double> c;
      c.position = real3(require(arr[i], "position", p), p + ".position");
      c.charge = as<double>(require(arr[i], "charge", p), p + ".charge");
      if (c.charge == 0.0) fail(p + ".charge", "must be nonzero");
      c.kernel = arr[i].contains("kernel") ? parse_kernel(arr[i]["kernel"], p + ".kernel") : cfg.kernel;
      cfg.charges.push_back(std::move(c));
    }
  }

  if (j.contains("truncation")) {
    const auto& t = j["truncation"];
    TruncationSpec spec;
    if (t.contains("ranks")) {
      const auto r = int3(t["ranks"], "truncation.ranks");
      spec.ranks = Dims3{r[0], r[1], r[2]};
    }
    if (t.contains("epsilon")) spec.tolerance = as<double>(t["epsilon"], "truncation.epsilon");
    spec.max_als_sweeps = get_or<int>(t, "max_als_sweeps", "truncation", spec.max_als_sweeps);
    spec.als_stagnation_tol =
        get_or<double>(t, "als_stagnation_tol", "truncation", spec.als_stagnation_tol);
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      fail("truncation", e.what());
    }
    cfg.truncation = spec;
  }

  if (j.contains("output")) {
    const auto& o = j["output"];
    cfg.output_tensor = get_or<std::string>(o, "tensor", "output", "");
    cfg.output_provenance = get_or<std::string>(o, "provenance", "output", "");
    cfg.output_report = get_or<std::string>(o, "report", "output", "");
  }

  cfg.format = get_or<std::string>(j, "format", "", cfg.format);
  if (cfg.format != "canonical" && cfg.format != "tucker")
    fail("format", "expected 'canonical' or 'tucker'");

  const std::string acc = get_or<std::string>(j, "accumulation", "", "sliding");
  if (acc == "sliding")
    cfg.accumulation = Accumulation::sliding;
  else if (acc == "ascending")
    cfg.accumulation = Accumulation::ascending;
  else if (acc == "compensated")
    cfg.accumulation = Accumulation::compensated;
  else
    fail("accumulation", "expected 'sliding', 'ascending' or 'compensated'");

  cfg.seed = get_or<std::uint64_t>(j, "seed", "", 0);
  cfg.threads = get_or<int>(j, "threads", "", 1);
  if (j.contains("cache_dir")) cfg.cache_dir = as<std::string>(j["cache_dir"], "cache_dir");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_json(ss.str(), path);
}

}  // namespace latsum
