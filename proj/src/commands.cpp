#include "latsum/commands.hpp"

#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>

#include "latsum/cache.hpp"
#include "latsum/linalg.hpp"
#include "latsum/report.hpp"
#include "latsum/tensor_io.hpp"

namespace latsum {

namespace {

UniformGrid<double> config_grid(const RunConfig& cfg) {
  if (cfg.has_geometry) return lattice_grid<double>(cfg.geometry, cfg.n);
  return UniformGrid<double>::cubic(cfg.b, cfg.n);
}

int config_M(const RunConfig& cfg, const UniformGrid<double>& base_grid) {
  if (cfg.quad_M > 0) return cfg.quad_M;
  const Shell shell = reference_shell(base_grid.doubled());
  int m = 2;
  for (const auto& term : cfg.kernel.terms())
    m = std::max(m, choose_M(term.primitive, cfg.quad_eps, shell));
  return m;
}

ReferenceTensor<double> obtain_reference(const RunConfig& cfg, const KernelSpec& kernel,
                                         const UniformGrid<double>& base_grid, std::ostream& log,
                                         bool* from_cache = nullptr) {
  const int M = config_M(cfg, base_grid);
  const std::string dir = resolve_cache_dir(cfg.cache_dir);
  if (auto cached = try_load_reference(dir, kernel, base_grid, M, cfg.quad_C0, true)) {
    log << "reference " << kernel.key() << ": cache hit (rank " << cached->canonical.rank()
        << ")\n";
    if (from_cache) *from_cache = true;
    return std::move(*cached);
  }
  ReferenceOptions opts;
  opts.doubled = true;
  opts.step_constant = cfg.quad_C0;
  ReferenceTensor<double> ref = build_reference_canonical<double>(kernel, base_grid, M, opts);
  store_reference(dir, ref, cfg.quad_C0);
  log << "reference " << kernel.key() << ": built rank " << ref.canonical.rank() << ", cached\n";
  if (from_cache) *from_cache = false;
  return ref;
}

void write_outputs(const RunConfig& cfg, const LatticeSumResult<double>& result,
                   std::ostream& log) {
  if (!cfg.output_tensor.empty()) {
    write_tensor(cfg.output_tensor, result.tensor);
    log << "wrote tensor " << cfg.output_tensor << "\n";
  }
  if (!cfg.output_provenance.empty()) {
    std::ofstream os(cfg.output_provenance);
    write_provenance(os, result, cfg.seed);
    log << "wrote provenance " << cfg.output_provenance << "\n";
  }
  if (!cfg.output_report.empty() && result.report) {
    std::ofstream os(cfg.output_report);
    write_spectral_report(os, *result.report);
    log << "wrote report " << cfg.output_report << "\n";
  }
}

}  // namespace

ReferenceTensor<double> cmd_build_reference(const RunConfig& cfg, std::ostream& log) {
  const UniformGrid<double> base = config_grid(cfg);
  bool from_cache = false;
  ReferenceTensor<double> ref = obtain_reference(cfg, cfg.kernel, base, log, &from_cache);

  if (!cfg.output_report.empty()) {
    std::ofstream os(cfg.output_report);
    os.precision(17);
    os << "# reference report\n";
    os << "kernel " << ref.kernel.key() << "\n";
    os << "M " << ref.M << "\n";
    os << "rank " << ref.canonical.rank() << "\n";
    os << "cache_hit " << (from_cache ? 1 : 0) << "\n";
    os << "step_constants";
    for (double c : ref.step_constants) os << " " << c;
    os << "\n";
    os << "shell " << ref.shell.a << " " << ref.shell.A << "\n";
    const ShellError err = shell_error(ref.expansion, ref.kernel, ref.shell);
    os << "shell_error_pointwise_rel " << err.pointwise_rel << "\n";
    os << "shell_error_maxnorm_rel " << err.maxnorm_rel << "\n";
    for (int l = 0; l < 3; ++l) {
      Eigen::BDCSVD<MatrixX<double>> svd(ref.canonical.factor(l));
      os << "sigma_mode" << (l + 1);
      for (Index k = 0; k < svd.singularValues().size(); ++k)
        os << " " << svd.singularValues()[k];
      os << "\n";
    }
    log << "wrote report " << cfg.output_report << "\n";
  }
  return ref;
}

LatticeSumResult<double> cmd_sum(const RunConfig& cfg, std::ostream& log) {
  SumOptions opts;
  opts.accumulation = cfg.accumulation;

  // direct charge sums live on the single-cell grid
  if (!cfg.charges.empty()) {
    const UniformGrid<double> base = UniformGrid<double>::cubic(cfg.b, cfg.n);
    RunConfig rc = cfg;
    rc.has_geometry = false;
    ReferenceTensor<double> ref = obtain_reference(rc, cfg.kernel, base, log);
    LatticeSumResult<double> result;
    result.grid = base;
    result.tensor = direct_sum(cfg.charges, ref);
    result.provenance.push_back(
        {"direct charge sum", std::get<CanonicalTensor<double>>(result.tensor).rank(),
         Dims3{0, 0, 0}, Index(cfg.charges.size())});
    if (cfg.truncation) {
      auto [t, report] = canonical_to_tucker(std::get<CanonicalTensor<double>>(result.tensor),
                                             *cfg.truncation);
      result.tensor = std::move(t);
      result.report = std::move(report);
    }
    write_outputs(cfg, result, log);
    return result;
  }

  if (!cfg.has_geometry) throw ConfigError("config key 'geometry': missing (nothing to sum)");
  const UniformGrid<double> base = lattice_grid<double>(cfg.geometry, cfg.n);
  ReferenceTensor<double> ref = obtain_reference(cfg, cfg.geometry.kernel, base, log);

  LatticeSumResult<double> result;
  result.geometry = cfg.geometry;
  result.grid = base;

  if (cfg.axis_plan) {
    result = axis_assembled_sum(cfg.geometry, ref, *cfg.axis_plan, cfg.truncation, opts);
  } else if (!cfg.sublattices.empty()) {
    result = sublattice_union_sum(cfg.sublattices, ref, cfg.geometry, cfg.truncation, opts);
  } else {
    LatticeGeometry rect = cfg.geometry;
    rect.defects.clear();
    LatticeSumResult<double> base_sum;
    base_sum.geometry = rect;
    base_sum.grid = base;
    if (cfg.format == "tucker") {
      TruncationSpec ref_spec = cfg.truncation ? *cfg.truncation : TruncationSpec::tol(cfg.quad_eps);
      build_reference_tucker(ref, ref_spec);
      TuckerTensor<double> t = orthonormalize(assembled_sum_tucker(ref, rect, opts));
      base_sum.tensor = std::move(t);
      base_sum.provenance.push_back({"assembled lattice sum (tucker)", 0,
                                     base_sum.tucker_tensor().ranks(),
                                     Index(active_cells(rect).size())});
    } else {
      base_sum.tensor = assembled_sum_canonical(ref, rect, opts);
      base_sum.provenance.push_back({"assembled lattice sum", base_sum.canonical().rank(),
                                     Dims3{0, 0, 0}, Index(active_cells(rect).size())});
    }
    if (cfg.geometry.defects.empty()) {
      result = std::move(base_sum);
    } else {
      ReferenceSet<double> refs;
      refs.add(ref);
      for (const auto& d : cfg.geometry.defects) {
        const KernelSpec k = d.kernel ? *d.kernel : cfg.geometry.kernel;
        if (!refs.has(k)) refs.add(obtain_reference(cfg, k, base, log));
      }
      result = defected_sum(base_sum, cfg.geometry.defects, refs, cfg.truncation, opts);
    }
  }
  write_outputs(cfg, result, log);
  return result;
}

namespace {

// recorded truncation bound, if the provenance sidecar carries one
double bound_from_provenance(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw VerificationError("cannot open provenance file " + path);
  std::string key;
  while (is >> key) {
    if (key == "truncation_bound_abs") {
      double v;
      if (is >> v) return v;
    }
    is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  }
  return -1.0;
}

}  // namespace

void cmd_verify(const RunConfig& cfg, const VerifyOptions& opts, std::ostream& log) {
  TensorVariant stored = read_tensor(opts.tensor_path);  // checksum-guarded
  const Dims3 dims = std::holds_alternative<CanonicalTensor<double>>(stored)
                         ? std::get<CanonicalTensor<double>>(stored).dims()
                         : std::get<TuckerTensor<double>>(stored).dims();

  if (!cfg.has_geometry) throw ConfigError("config key 'geometry': missing (needed to verify)");
  const UniformGrid<double> base = lattice_grid<double>(cfg.geometry, cfg.n);
  if (!(base.points() == dims))
    throw VerificationError("stored tensor grid does not match the config geometry");

  ReferenceSet<double> refs;
  refs.add(obtain_reference(cfg, cfg.geometry.kernel, base, log));
  for (const auto& d : cfg.geometry.defects) {
    const KernelSpec k = d.kernel ? *d.kernel : cfg.geometry.kernel;
    if (!refs.has(k)) refs.add(obtain_reference(cfg, k, base, log));
  }
  std::vector<GridSource<double>> sources;
  if (!cfg.sublattices.empty()) {
    const Index n = cfg.n;
    for (const auto& s : cfg.sublattices) {
      for (const auto& cell : active_cells(s.geom)) {
        GridSource<double> src;
        for (int l = 0; l < 3; ++l)
          src.shift[l] = long(cell[l]) * long(n) + std::lround(s.offset_cells[l] * double(n));
        src.weight = s.geom.base_charge;
        src.kernel = s.geom.kernel;
        sources.push_back(std::move(src));
      }
    }
  } else if (cfg.axis_plan) {
    const Index n = cfg.n;
    std::vector<int> free_modes;
    for (int l = 0; l < 3; ++l)
      if (!cfg.axis_plan->assembled[l]) free_modes.push_back(l);
    for (const auto& line : cfg.axis_plan->lines) {
      LatticeGeometry lg = cfg.geometry;
      for (int m : free_modes) lg.active[m] = {line.cell[m]};
      LatticeGeometry clean = lg;
      clean.defects.clear();
      for (const auto& cell : active_cells(clean)) {
        GridSource<double> src;
        for (int l = 0; l < 3; ++l)
          src.shift[l] =
              long(cell[l]) * long(n) + std::lround(line.offset_cells[l] * double(n));
        src.weight = cfg.geometry.base_charge;
        src.kernel = cfg.geometry.kernel;
        sources.push_back(std::move(src));
      }
    }
  } else {
    sources = enumerate_sources<double>(cfg.geometry, cfg.n);
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<Index> di(0, dims[0] - 1), dj(0, dims[1] - 1), dk(0, dims[2] - 1);
  double max_abs = 0.0, max_mag = 0.0;
  for (int p = 0; p < opts.probes; ++p) {
    const Index i = di(rng), j = dj(rng), k = dk(rng);
    const double oracle = oracle_entry(sources, refs, i, j, k);
    const double got = std::holds_alternative<CanonicalTensor<double>>(stored)
                           ? std::get<CanonicalTensor<double>>(stored).entry(i, j, k)
                           : std::get<TuckerTensor<double>>(stored).entry(i, j, k);
    max_abs = std::max(max_abs, std::abs(got - oracle));
    max_mag = std::max(max_mag, std::abs(oracle));
  }
  const double rel = max_mag > 0 ? max_abs / max_mag : max_abs;
  log.precision(17);
  log << "verify: " << opts.probes << " probes, max abs error " << max_abs
      << ", max |oracle| " << max_mag << ", normalized error " << rel << "\n";

  double bound = opts.bound_abs;
  if (bound < 0.0 && !opts.provenance_path.empty())
    bound = bound_from_provenance(opts.provenance_path);
  if (bound >= 0.0) {
    log << "verify: bound-vs-actual: recorded " << bound << ", measured " << max_abs << " ("
        << (max_abs <= bound ? "within" : "EXCEEDS") << " bound)\n";
    if (max_abs > bound)
      throw VerificationError("probe error " + std::to_string(max_abs) +
                              " exceeds the recorded truncation bound");
  } else if (rel > opts.tolerance) {
    throw VerificationError("normalized probe error exceeds tolerance");
  }
  log << "verify: ok\n";
}

BenchResult cmd_bench(const RunConfig& cfg, const std::vector<int>& L_list,
                      const std::vector<int>& oracle_L, int repetitions, std::ostream& log) {
  using clock = std::chrono::steady_clock;
  BenchResult res;
  SumOptions opts;
  opts.accumulation = cfg.accumulation;
  log << "L  N_L  assembled_s  oracle_s\n";
  std::vector<double> lx, ly, ox, oy;
  auto all_L = L_list;
  for (int L : oracle_L)
    if (std::find(all_L.begin(), all_L.end(), L) == all_L.end()) all_L.push_back(L);
  std::sort(all_L.begin(), all_L.end());

  for (int L : all_L) {
    LatticeGeometry geom = cfg.geometry;
    geom.cells = {L, L, L};
    geom.cell_width = cfg.geometry.cell_width > 0 ? cfg.geometry.cell_width : cfg.b;
    geom.defects.clear();
    const UniformGrid<double> base = lattice_grid<double>(geom, cfg.n);
    ReferenceTensor<double> ref = obtain_reference(cfg, cfg.kernel, base, log);

    BenchRow row;
    row.L = L;
    row.grid_points = base.points()[0];

    const bool timed = std::find(L_list.begin(), L_list.end(), L) != L_list.end();
    if (timed) {
      double best = 1e300;
      for (int r = 0; r < repetitions; ++r) {
        const auto t0 = clock::now();
        auto sum = assembled_sum_canonical(ref, geom, opts);
        const auto t1 = clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
        if (sum.rank() != ref.canonical.rank())
          throw std::logic_error("bench: assembled rank drifted");
      }
      row.assembled_seconds = best;
      lx.push_back(std::log(double(L)));
      ly.push_back(std::log(best));
    }

    if (std::find(oracle_L.begin(), oracle_L.end(), L) != oracle_L.end()) {
      ReferenceSet<double> refs;
      refs.add(ref);
      const auto sources = enumerate_sources<double>(geom, cfg.n);
      const auto t0 = clock::now();
      auto dense = dense_oracle(sources, refs, base, 10'000'000, cfg.threads);
      const auto t1 = clock::now();
      row.oracle_seconds = std::chrono::duration<double>(t1 - t0).count();
      ox.push_back(std::log(double(L)));
      oy.push_back(std::log(row.oracle_seconds));
      (void)dense;
    }
    if (timed || row.oracle_seconds >= 0) {
      log << row.L << "  " << row.grid_points << "  " << row.assembled_seconds << "  "
          << row.oracle_seconds << "\n";
      res.rows.push_back(row);
    }
  }
  if (lx.size() >= 2) res.assembled_exponent = fit_line(lx, ly).slope;
  if (ox.size() >= 2) res.oracle_exponent = fit_line(ox, oy).slope;
  log << "assembled exponent " << res.assembled_exponent << ", oracle exponent "
      << res.oracle_exponent << "\n";
  return res;
}

}  // namespace latsum
