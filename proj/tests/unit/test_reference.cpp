#include "doctest.h"

#include <cmath>

#include "latsum/reference.hpp"
#include "test_helpers.hpp"

using namespace latsum;
using namespace latsum::testing;

TEST_CASE("mode integrals: zero node row equals the cell width") {
  auto grid = UniformGrid<double>::cubic(2.0, 8);
  auto rule = build_quadrature<double>(KernelSpec::newton().primitive(), 4, 2.0, Shell{0.1, 2.0});
  auto m = mode_integrals(rule, grid, 0);
  REQUIRE(rule.nodes[4] == 0.0);
  for (Index i = 0; i < 8; ++i) CHECK(m(i, 4) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("mode integrals: mirrored cells carry equal values") {
  auto grid = UniformGrid<double>::cubic(2.0, 8);
  auto rule = build_quadrature<double>(KernelSpec::newton().primitive(), 6, 2.0, Shell{0.1, 2.0});
  auto m = mode_integrals(rule, grid, 0);
  for (Index k = 0; k < rule.size(); ++k)
    for (Index i = 0; i < 4; ++i)
      CHECK(m(i, k) == doctest::Approx(m(7 - i, k)).epsilon(1e-15));
}

TEST_CASE("mode integrals match an adaptive quadrature oracle") {
  // cell [0, 1] against exp(-t^2 x^2) for a few nodes, including t = 1 where
  // the closed form is (sqrt(pi)/2) erf(1)
  auto grid = UniformGrid<double>(Array3<double>(4.0, 4.0, 4.0), Dims3{4, 4, 4});
  for (double t : {0.35, 1.0, 3.7}) {
    QuadratureRule<double> rule;
    rule.M = -1;
    rule.variable = QuadVariable::gauss;
    rule.nodes.resize(1);
    rule.weights.resize(1);
    rule.nodes[0] = t;
    rule.weights[0] = 1.0;
    auto m = mode_integrals(rule, grid, 0);
    // cell 2 of [-2,2] with h=1 is [0,1]
    const double oracle =
        adaptive_simpson([t](double x) { return std::exp(-t * t * x * x); }, 0.0, 1.0);
    CHECK(m(2, 0) == doctest::Approx(oracle).epsilon(1e-12));
    if (t == 1.0) CHECK(m(2, 0) == doctest::Approx(std::sqrt(M_PI) / 2.0 * std::erf(1.0)));
  }
}

TEST_CASE("reference side matrices are bitwise identical on cubic grids") {
  auto grid = UniformGrid<double>::cubic(4.0, 32);
  auto ref = build_reference_canonical<double>(KernelSpec::newton(), grid, 10);
  for (int l : {1, 2}) {
    REQUIRE(ref.canonical.factor(l).size() == ref.canonical.factor(0).size());
    CHECK((ref.canonical.factor(l).array() == ref.canonical.factor(0).array()).all());
  }
  // doubled grid and storage shape: three (2n) x R side matrices plus weights
  CHECK(ref.grid.points(0) == 64);
  CHECK(ref.canonical.factor(0).rows() == 64);
  CHECK(ref.canonical.rank() == 2 * 10 + 1);
}

TEST_CASE("reference entries are even under index reflection") {
  auto grid = UniformGrid<double>::cubic(3.0, 12);
  auto ref = build_reference_canonical<double>(KernelSpec::newton(), grid, 8);
  const Index n2 = ref.grid.points(0);
  auto gen = rng(7);
  std::uniform_int_distribution<Index> d(0, n2 - 1);
  for (int p = 0; p < 40; ++p) {
    const Index i = d(gen), j = d(gen), k = d(gen);
    CHECK(ref.canonical.entry(i, j, k) ==
          doctest::Approx(ref.canonical.entry(n2 - 1 - i, n2 - 1 - j, n2 - 1 - k)).epsilon(1e-12));
  }
}

TEST_CASE("reference entry near unit radius matches the integrated kernel") {
  // n=256, b=10: h = 0.039; compare the projection coefficient of a cell
  // centered near ||x|| = 1 with a high-order numerical integration of 1/r
  const Index n = 256;
  const double b = 10.0;
  auto grid = UniformGrid<double>::cubic(b, n);
  auto ref = build_reference_canonical<double>(KernelSpec::newton(), grid, 24);
  const double h = b / double(n);

  // doubled-grid cell whose center is closest to (1, 0, 0)
  const Index n2 = 2 * n;
  auto nearest = [&](double x) {
    Index best = 0;
    double dist = 1e300;
    for (Index i = 0; i < n2; ++i) {
      const double c = ref.grid.cell_center(0, i);
      if (std::abs(c - x) < dist) {
        dist = std::abs(c - x);
        best = i;
      }
    }
    return best;
  };
  const Index i1 = nearest(1.0), i0 = nearest(0.0);
  const double entry = ref.canonical.entry(i1, i0, i0);

  // tensorized midpoint-refined integration of 1/r over that cell: the
  // integrand is smooth here, a fine fixed grid reaches ~1e-10
  auto bounds0 = ref.grid.cell_bounds(0, i1);
  auto bounds1 = ref.grid.cell_bounds(0, i0);
  const int g = 12;
  double integral = 0.0;
  for (int a = 0; a < g; ++a)
    for (int bb = 0; bb < g; ++bb)
      for (int c = 0; c < g; ++c) {
        const double x = bounds0.first + (a + 0.5) * h / g;
        const double y = bounds1.first + (bb + 0.5) * h / g;
        const double z = bounds1.first + (c + 0.5) * h / g;
        integral += 1.0 / std::sqrt(x * x + y * y + z * z);
      }
  integral *= (h / g) * (h / g) * (h / g);
  CHECK(std::abs(entry - integral) / std::abs(integral) < 1e-5);
}

TEST_CASE("epsilon-driven rank lands in the reported range") {
  // table-selected M for 1e-6 on the reference shell of n=256, b=20
  {
    auto grid = UniformGrid<double>::cubic(20.0, 256);
    const Shell shell = reference_shell(grid.doubled());
    const int M = choose_M(KernelSpec::newton().primitive(), 1e-6, shell);
    const int R = 2 * M + 1;
    CHECK(R >= 30);
    CHECK(R <= 50);
  }
  // at finer grids the symmetric-node rule needs a handful more terms for
  // 1e-6; the growth stays logarithmic in the shell ratio
  int prev = 0;
  for (Index n : {Index(512), Index(1024)}) {
    auto grid = UniformGrid<double>::cubic(20.0, n);
    const int M = choose_M(KernelSpec::newton().primitive(), 1e-6, reference_shell(grid.doubled()));
    CHECK(2 * M + 1 <= 60);
    CHECK(M >= prev);
    prev = M;
  }
}

TEST_CASE("doubling M tightens the reference shell error with a linear log fit") {
  auto grid = UniformGrid<double>::cubic(4.0, 16);
  std::vector<double> x, y;
  for (int M : {4, 8, 16, 32}) {
    auto ref = build_reference_canonical<double>(KernelSpec::newton(), grid, M);
    const ShellError err = shell_error(ref.expansion, ref.kernel, ref.shell, 600);
    x.push_back(std::sqrt(double(M)));
    y.push_back(std::log(err.pointwise_rel));
  }
  const LineFit fit = fit_line(x, y);
  CHECK(fit.slope < 0.0);
  CHECK(fit.r_squared >= 0.9);
}

TEST_CASE("build_reference_tucker clamps oversized rank requests") {
  auto grid = UniformGrid<double>::cubic(2.0, 16);
  auto ref = build_reference_canonical<double>(KernelSpec::newton(), grid, 6);
  auto t = build_reference_tucker(ref, TruncationSpec::fixed_ranks(100, 100, 100));
  for (int l = 0; l < 3; ++l) CHECK(t.ranks()[l] <= ref.canonical.rank());
  CHECK(!ref.warnings.empty());
}

TEST_CASE("tucker reference reproduces an exact-rank synthetic input") {
  auto gen = rng(91);
  auto grid = UniformGrid<double>::cubic(2.0, 16);
  auto ref = build_reference_canonical<double>(KernelSpec::newton(), grid, 6);
  // swap in a synthetic rank-3 canonical: C2T must recover it exactly
  ref.canonical = random_canonical(ref.grid.points(), 3, gen);
  auto t = build_reference_tucker(ref, TruncationSpec::fixed_ranks(3, 3, 3));
  CHECK((to_dense(t).data() - to_dense(ref.canonical).data()).norm() /
            to_dense(ref.canonical).data().norm() <
        1e-12);
}

TEST_CASE("undoubled references are available for unit tests") {
  auto grid = UniformGrid<double>::cubic(2.0, 8);
  ReferenceOptions opts;
  opts.doubled = false;
  auto ref = build_reference_canonical<double>(KernelSpec::newton(), grid, 5, opts);
  CHECK(ref.grid.points(0) == 8);
  CHECK(!ref.doubled);
}

TEST_CASE("signed composite weights raise the positivity warning when requested") {
  auto grid = UniformGrid<double>::cubic(4.0, 8);
  ReferenceOptions opts;
  opts.require_positive_weights = true;
  auto ref = build_reference_canonical<double>(KernelSpec::lennard_jones(1.0, 1.0), grid, 5, opts);
  CHECK(!ref.warnings.empty());
  auto ref2 = build_reference_canonical<double>(KernelSpec::newton(), grid, 5, opts);
  CHECK(ref2.warnings.empty());
}
