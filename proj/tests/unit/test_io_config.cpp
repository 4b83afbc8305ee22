#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "latsum/cache.hpp"
#include "latsum/config.hpp"
#include "latsum/report.hpp"
#include "latsum/tensor_io.hpp"
#include "test_helpers.hpp"

using namespace latsum;
using namespace latsum::testing;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("latsum_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("tensor files round-trip both formats") {
  TempDir tmp;
  auto gen = rng(71);

  auto c = random_canonical(Dims3{12, 10, 8}, 5, gen);
  write_tensor(tmp.file("c.tns"), TensorVariant(c));
  auto rc = std::get<CanonicalTensor<double>>(read_tensor(tmp.file("c.tns")));
  CHECK(rc.rank() == 5);
  CHECK((rc.weights() - c.weights()).norm() == 0.0);
  for (int l = 0; l < 3; ++l) CHECK((rc.factor(l) - c.factor(l)).norm() == 0.0);

  auto t = random_tucker(Dims3{9, 9, 9}, Dims3{3, 2, 4}, gen);
  write_tensor(tmp.file("t.tns"), TensorVariant(t));
  auto rt = std::get<TuckerTensor<double>>(read_tensor(tmp.file("t.tns")));
  CHECK(rt.ranks() == t.ranks());
  CHECK((rt.core().data() - t.core().data()).norm() == 0.0);
  for (int l = 0; l < 3; ++l) CHECK((rt.factor(l) - t.factor(l)).norm() == 0.0);
}

TEST_CASE("corrupt and truncated tensor files are rejected") {
  TempDir tmp;
  auto gen = rng(72);
  auto c = random_canonical(Dims3{6, 6, 6}, 2, gen);
  const std::string path = tmp.file("x.tns");
  write_tensor(path, TensorVariant(c));

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    const char junk = 0x5a;
    f.write(&junk, 1);
  }
  CHECK_THROWS_AS(read_tensor(path), TensorIoError);

  std::ofstream(tmp.file("short.tns"), std::ios::binary) << "LTSTNSR";
  CHECK_THROWS_AS(read_tensor(tmp.file("short.tns")), TensorIoError);
  CHECK_THROWS_AS(read_tensor(tmp.file("missing.tns")), TensorIoError);
}

TEST_CASE("config parsing: full example") {
  const std::string text = R"json({
    "kernel": {"type": "newton"},
    "grid": {"n": 8, "b": 2.0},
    "quadrature": {"M": 12, "epsilon": 1e-5},
    "geometry": {
      "cells": [4, 4, 1],
      "cell_width": 2.0,
      "base_charge": 1.5,
      "defects": [
        {"kind": "vacancy", "positions": [[0, 0, 0]]},
        {"kind": "impurity", "positions": [[1, 1, 0]], "charge": 2.0,
         "kernel": {"type": "slater", "lambda": 1.5}, "grid_offset": [1, 0, 0]}
      ],
      "sublattices": [{"cells": [2, 2, 1], "offset_cells": [0.5, 0.5, 0]}]
    },
    "truncation": {"epsilon": 1e-6, "max_als_sweeps": 10},
    "output": {"tensor": "out.tns"},
    "format": "tucker",
    "accumulation": "ascending",
    "seed": 99
  })json";
  RunConfig cfg = parse_config_json(text);
  CHECK(cfg.n == 8);
  CHECK(cfg.b == 2.0);
  CHECK(cfg.quad_M == 12);
  CHECK(cfg.has_geometry);
  CHECK(cfg.geometry.cells == Int3{4, 4, 1});
  CHECK(cfg.geometry.base_charge == 1.5);
  REQUIRE(cfg.geometry.defects.size() == 2);
  CHECK(cfg.geometry.defects[0].charge == -1.5);  // vacancy inherits -base_charge
  CHECK(cfg.geometry.defects[1].kernel.has_value());
  CHECK(cfg.sublattices.size() == 1);
  REQUIRE(cfg.truncation.has_value());
  CHECK(cfg.truncation->max_als_sweeps == 10);
  CHECK(cfg.format == "tucker");
  CHECK(cfg.accumulation == Accumulation::ascending);
  CHECK(cfg.seed == 99);
}

TEST_CASE("config errors name the offending key") {
  auto expect_mentions = [](const std::string& text, const std::string& key) {
    try {
      parse_config_json(text);
      CHECK(false);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(key) != std::string::npos);
    }
  };
  expect_mentions(R"({"geometry": {}})", "geometry.cells");
  expect_mentions(R"({"geometry": {"cells": [1, 2]}})", "geometry.cells");
  expect_mentions(R"({"kernel": {"type": "warp"}})", "kernel.type");
  expect_mentions(R"({"kernel": {"type": "yukawa"}})", "kernel.lambda");
  expect_mentions(R"({"grid": {"n": 7}})", "grid.n");
  expect_mentions(R"({"format": "sparse"})", "format");
  expect_mentions(R"({"truncation": {"max_als_sweeps": 3}})", "truncation");
  expect_mentions(
      R"({"geometry": {"cells": [2,2,1], "defects": [{"kind": "impurity", "positions": [[0,0,0]]}]}})",
      "charge");
  CHECK_THROWS_AS(parse_config_json("{nope"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/latsum.json"), ConfigError);
}

TEST_CASE("reference cache: store, hit, collision safety, corruption") {
  TempDir tmp;
  auto grid = UniformGrid<double>::cubic(2.0, 8);
  auto ref = build_reference_canonical<double>(KernelSpec::newton(), grid, 5);
  store_reference(tmp.path.string(), ref, 0.0);

  auto hit = try_load_reference(tmp.path.string(), KernelSpec::newton(), grid, 5, 0.0, true);
  REQUIRE(hit.has_value());
  CHECK(hit->canonical.rank() == ref.canonical.rank());
  CHECK((hit->canonical.factor(0) - ref.canonical.factor(0)).norm() == 0.0);
  CHECK(hit->expansion.terms.size() == 1);

  auto miss = try_load_reference(tmp.path.string(), KernelSpec::newton(), grid, 6, 0.0, true);
  CHECK(!miss.has_value());

  // flip a payload byte: the checksum must catch it
  const std::string key = reference_cache_key(KernelSpec::newton(), grid, 5, 0.0, true);
  {
    std::fstream f(tmp.file(key + ".ref.tns"), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(64);
    const char junk = 0x11;
    f.write(&junk, 1);
  }
  CHECK_THROWS_AS(try_load_reference(tmp.path.string(), KernelSpec::newton(), grid, 5, 0.0, true),
                  TensorIoError);
}

TEST_CASE("cache directory resolution order") {
  // env var wins over the config override
  setenv("LATSUM_CACHE_DIR", "/tmp/latsum_env_cache", 1);
  CHECK(resolve_cache_dir(std::string("cfg_dir")) == "/tmp/latsum_env_cache");
  unsetenv("LATSUM_CACHE_DIR");
  CHECK(resolve_cache_dir(std::string("cfg_dir")) == "cfg_dir");
  CHECK(resolve_cache_dir(std::nullopt) == "latsum_cache");
}

TEST_CASE("slice export emits the tensor entries") {
  TempDir tmp;
  auto gen = rng(74);
  auto c = random_canonical(Dims3{4, 4, 4}, 2, gen);
  std::ostringstream os;
  export_line(os, TensorVariant(c), 0, 1, 2);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);  // header
  std::getline(is, line);  // header
  for (Index i = 0; i < 4; ++i) {
    Index idx;
    double value;
    is >> idx >> value;
    CHECK(idx == i + 1);
    CHECK(value == doctest::Approx(c.entry(i, 1, 2)).epsilon(1e-15));
  }
  std::ostringstream op;
  export_plane(op, TensorVariant(c), 2, 0);
  CHECK(op.str().find("plane mode=3") != std::string::npos);
  CHECK_THROWS_AS(export_plane(op, TensorVariant(c), 2, 9), std::out_of_range);
}

TEST_CASE("report writers are deterministic") {
  auto gen = rng(75);
  auto c = random_canonical(Dims3{8, 8, 8}, 3, gen);
  auto [t, rep] = rhosvd(c, TruncationSpec::fixed_ranks(2, 2, 2));
  (void)t;
  std::ostringstream a, b;
  write_spectral_report(a, rep);
  write_spectral_report(b, rep);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("stability_constant") != std::string::npos);
}
