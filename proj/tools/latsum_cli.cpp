// latsum: assemble sums of long-range interaction potentials on 3D lattices
// in low-rank canonical/Tucker form.
//
// Exit codes: 0 ok, 1 verification failure, 2 usage/config error.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latsum/commands.hpp"
#include "latsum/report.hpp"
#include "latsum/tensor_io.hpp"

namespace {

struct Overrides {
  long n = 0;
  double b = 0.0;
  int M = 0;
  double C0 = 0.0;
  double eps = 0.0;
  long long seed = -1;
  int threads = 0;
  std::string cache_dir;
  std::string format;
  std::string accumulation;
  std::string out_tensor, out_provenance, out_report;
};

void add_override_flags(CLI::App* app, Overrides& ov) {
  app->add_option("--n", ov.n, "grid points per unit cell (overrides grid.n)");
  app->add_option("--b", ov.b, "cell/box width (overrides grid.b)");
  app->add_option("--M", ov.M, "quadrature parameter M (overrides quadrature.M)");
  app->add_option("--C0", ov.C0, "sinc step constant (overrides quadrature.C0)");
  app->add_option("--epsilon", ov.eps, "quadrature tolerance (overrides quadrature.epsilon)");
  app->add_option("--seed", ov.seed, "rng seed (overrides seed)");
  app->add_option("--threads", ov.threads, "worker cap for parallel sections");
  app->add_option("--cache-dir", ov.cache_dir, "reference cache directory");
  app->add_option("--format", ov.format, "output tensor format: canonical|tucker");
  app->add_option("--accumulation", ov.accumulation,
                  "assembled accumulation: sliding|ascending|compensated");
  app->add_option("--output-tensor", ov.out_tensor, "tensor output path");
  app->add_option("--output-provenance", ov.out_provenance, "provenance output path");
  app->add_option("--output-report", ov.out_report, "report output path");
}

latsum::RunConfig load_with_overrides(const std::string& config_path, const Overrides& ov) {
  latsum::RunConfig cfg = latsum::load_config(config_path);
  if (ov.n > 0) cfg.n = ov.n;
  if (ov.b > 0.0) cfg.b = ov.b;
  if (ov.M > 0) cfg.quad_M = ov.M;
  if (ov.C0 > 0.0) cfg.quad_C0 = ov.C0;
  if (ov.eps > 0.0) cfg.quad_eps = ov.eps;
  if (ov.seed >= 0) cfg.seed = std::uint64_t(ov.seed);
  if (ov.threads > 0) cfg.threads = ov.threads;
  if (!ov.cache_dir.empty()) cfg.cache_dir = ov.cache_dir;
  if (!ov.format.empty()) {
    if (ov.format != "canonical" && ov.format != "tucker")
      throw latsum::ConfigError("--format: expected 'canonical' or 'tucker'");
    cfg.format = ov.format;
  }
  if (!ov.accumulation.empty()) {
    if (ov.accumulation == "sliding")
      cfg.accumulation = latsum::Accumulation::sliding;
    else if (ov.accumulation == "ascending")
      cfg.accumulation = latsum::Accumulation::ascending;
    else if (ov.accumulation == "compensated")
      cfg.accumulation = latsum::Accumulation::compensated;
    else
      throw latsum::ConfigError("--accumulation: expected sliding|ascending|compensated");
  }
  if (!ov.out_tensor.empty()) cfg.output_tensor = ov.out_tensor;
  if (!ov.out_provenance.empty()) cfg.output_provenance = ov.out_provenance;
  if (!ov.out_report.empty()) cfg.output_report = ov.out_report;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-rank lattice summation of long-range potentials"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  auto* build = app.add_subcommand("build-reference",
                                   "build and cache the reference tensor of the config kernel");
  build->add_option("--config", config_path, "JSON config file")->required();
  add_override_flags(build, ov);

  auto* sum = app.add_subcommand("sum", "compute the lattice sum described by the config");
  sum->add_option("--config", config_path, "JSON config file")->required();
  add_override_flags(sum, ov);

  auto* verify =
      app.add_subcommand("verify", "probe a stored tensor against the windowed-sum oracle");
  std::string verify_tensor, verify_provenance;
  double verify_tol = 1e-10;
  int verify_probes = 500;
  double verify_bound = -1.0;
  verify->add_option("--config", config_path, "JSON config file")->required();
  verify->add_option("--tensor", verify_tensor, "tensor file to verify")->required();
  verify->add_option("--provenance", verify_provenance,
                     "provenance sidecar; its recorded truncation bound gates the probe error");
  verify->add_option("--tolerance", verify_tol, "normalized probe error tolerance");
  verify->add_option("--probes", verify_probes, "number of random probes");
  verify->add_option("--bound", verify_bound,
                     "explicit truncation bound: probe error must stay below it");
  add_override_flags(verify, ov);

  auto* bench = app.add_subcommand("bench", "scaling benchmark of assembled sum vs dense oracle");
  std::vector<int> bench_L{8, 16, 32, 64};
  std::vector<int> bench_oracle_L{2, 4, 8};
  int bench_reps = 5;
  bench->add_option("--config", config_path, "JSON config file")->required();
  bench->add_option("--L", bench_L, "lattice sizes for the assembled timing");
  bench->add_option("--oracle-L", bench_oracle_L, "lattice sizes for the oracle timing");
  bench->add_option("--reps", bench_reps, "repetitions per size (best time kept)");
  add_override_flags(bench, ov);

  auto* slice = app.add_subcommand("export-slice", "write a plane or line of a stored tensor");
  std::string slice_tensor, slice_out;
  std::vector<long> plane_spec, line_spec;
  slice->add_option("--tensor", slice_tensor, "tensor file")->required();
  slice->add_option("--plane", plane_spec, "mode index (1-based): plane through the tensor")
      ->expected(2);
  slice->add_option("--line", line_spec, "mode i j (1-based): line along mode at fixed (i, j)")
      ->expected(3);
  slice->add_option("--out", slice_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (build->parsed()) {
      cmd_build_reference(load_with_overrides(config_path, ov), std::cout);
      return 0;
    }
    if (sum->parsed()) {
      cmd_sum(load_with_overrides(config_path, ov), std::cout);
      return 0;
    }
    if (verify->parsed()) {
      latsum::VerifyOptions vo;
      vo.tensor_path = verify_tensor;
      vo.provenance_path = verify_provenance;
      vo.tolerance = verify_tol;
      vo.probes = verify_probes;
      vo.bound_abs = verify_bound;
      try {
        cmd_verify(load_with_overrides(config_path, ov), vo, std::cout);
      } catch (const latsum::VerificationError& e) {
        std::cerr << "verification failed: " << e.what() << "\n";
        return 1;
      } catch (const latsum::TensorIoError& e) {
        std::cerr << "verification failed: " << e.what() << "\n";
        return 1;
      }
      return 0;
    }
    if (bench->parsed()) {
      cmd_bench(load_with_overrides(config_path, ov), bench_L, bench_oracle_L, bench_reps,
                std::cout);
      return 0;
    }
    if (slice->parsed()) {
      const latsum::TensorVariant tensor = latsum::read_tensor(slice_tensor);
      std::ofstream file;
      std::ostream* os = &std::cout;
      if (!slice_out.empty()) {
        file.open(slice_out);
        if (!file) throw std::runtime_error("cannot open " + slice_out);
        os = &file;
      }
      if (!plane_spec.empty())
        latsum::export_plane(*os, tensor, int(plane_spec[0]) - 1, latsum::Index(plane_spec[1]) - 1);
      else if (!line_spec.empty())
        latsum::export_line(*os, tensor, int(line_spec[0]) - 1, latsum::Index(line_spec[1]) - 1,
                            latsum::Index(line_spec[2]) - 1);
      else
        throw latsum::ConfigError("export-slice: need --plane or --line");
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
