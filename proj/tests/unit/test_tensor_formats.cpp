#include "doctest.h"

#include <random>

#include "latsum/canonical.hpp"
#include "latsum/lattice_sum.hpp"
#include "latsum/linalg.hpp"
#include "latsum/tucker.hpp"
#include "test_helpers.hpp"

using namespace latsum;
using namespace latsum::testing;

TEST_CASE("canonical entry: rank-1 delta tensor") {
  const Dims3 d{4, 4, 4};
  std::array<MatrixX<double>, 3> f;
  for (int l = 0; l < 3; ++l) {
    f[l] = MatrixX<double>::Zero(4, 1);
    f[l](0, 0) = 1.0;
  }
  VectorX<double> w(1);
  w[0] = 2.0;
  CanonicalTensor<double> t(d, w, f);
  CHECK(t.entry(0, 0, 0) == 2.0);
  CHECK(t.entry(1, 0, 0) == 0.0);
  CHECK_THROWS_AS(t.entry(4, 0, 0), std::out_of_range);
}

TEST_CASE("tucker entries match dense reconstruction at random probes") {
  auto gen = rng(101);
  auto t = random_tucker(Dims3{9, 7, 8}, Dims3{3, 2, 4}, gen);
  auto dense = to_dense(t);
  std::uniform_int_distribution<Index> di(0, 8), dj(0, 6), dk(0, 7);
  for (int p = 0; p < 20; ++p) {
    const Index i = di(gen), j = dj(gen), k = dk(gen);
    CHECK(t.entry(i, j, k) == doctest::Approx(dense(i, j, k)).epsilon(1e-14));
  }
}

TEST_CASE("canonical-as-diagonal-tucker roundtrip is exact") {
  auto gen = rng(5);
  auto c = random_canonical(Dims3{6, 6, 6}, 4, gen);
  auto t = as_diagonal_tucker(c);
  for (Index i = 0; i < 6; ++i)
    CHECK(t.entry(i, (i * 2) % 6, (i + 1) % 6) ==
          doctest::Approx(c.entry(i, (i * 2) % 6, (i + 1) % 6)).epsilon(1e-15));
}

TEST_CASE("add_concat sums entries and ranks") {
  auto gen = rng(7);
  const Dims3 d{8, 8, 8};
  auto a = random_canonical(d, 3, gen);
  auto b = random_canonical(d, 4, gen);
  auto c = add_concat(a, b);
  CHECK(c.rank() == 7);
  auto da = to_dense(a), db = to_dense(b), dc = to_dense(c);
  std::uniform_int_distribution<Index> di(0, 7);
  for (int p = 0; p < 50; ++p) {
    const Index i = di(gen), j = di(gen), k = di(gen);
    CHECK(dc(i, j, k) == doctest::Approx(da(i, j, k) + db(i, j, k)).epsilon(1e-13));
  }

  auto z = CanonicalTensor<double>::zero(d);
  auto az = add_concat(a, z);
  CHECK(az.rank() == 3);
  CHECK(max_abs_diff(to_dense(az), da) == 0.0);

  // summand order does not change entries
  auto c2 = add_concat(b, a);
  CHECK(rel_fnorm_diff(to_dense(c2), dc) < 1e-13);

  auto bad = random_canonical(Dims3{4, 8, 8}, 2, gen);
  CHECK_THROWS_AS(add_concat(a, bad), std::invalid_argument);
}

TEST_CASE("add_shared_factors keeps the rank and doubles a self-sum") {
  auto gen = rng(13);
  const Dims3 d{10, 10, 10};
  auto a = random_canonical(d, 5, gen);
  auto sum = add_shared_factors(a, a, 0, 1);
  CHECK(sum.rank() == 5);
  auto da = to_dense(a), ds = to_dense(sum);
  CHECK((ds.data() - 2.0 * da.data()).cwiseAbs().maxCoeff() < 1e-12);

  // agreement with concatenation where both preconditions hold
  auto cc = add_concat(a, a);
  CHECK(rel_fnorm_diff(ds, to_dense(cc)) < 1e-13);

  // a perturbed shared column is rejected
  auto b = a;
  b.factor(0)(0, 0) += 1e-9;
  CHECK_THROWS_AS(add_shared_factors(a, b, 0, 1), std::invalid_argument);
}

TEST_CASE("inner products agree with the dense contraction") {
  auto gen = rng(17);
  const Dims3 d{8, 8, 8};
  auto a = random_canonical(d, 2, gen);
  auto b = random_canonical(d, 3, gen);
  const double dense = to_dense(a).data().dot(to_dense(b).data());
  CHECK(inner(a, b) == doctest::Approx(dense).epsilon(1e-13));

  CHECK(inner(a, a) >= 0.0);
  CHECK(norm_f(a) == doctest::Approx(std::sqrt(inner(a, a))));

  auto t = random_tucker(d, Dims3{3, 3, 3}, gen);
  const double dt = to_dense(a).data().dot(to_dense(t).data());
  CHECK(inner(a, t) == doctest::Approx(dt).epsilon(1e-12));

  auto t2 = random_tucker(d, Dims3{2, 4, 3}, gen);
  const double tt = to_dense(t).data().dot(to_dense(t2).data());
  CHECK(inner(t, t2) == doctest::Approx(tt).epsilon(1e-12));
}

TEST_CASE("orthonormal-factor tucker norm equals core norm") {
  auto gen = rng(19);
  auto t = random_tucker(Dims3{12, 10, 8}, Dims3{4, 3, 2}, gen);
  REQUIRE(t.factors_orthonormal());
  CHECK(norm_f(t) == doctest::Approx(t.core().fnorm()).epsilon(1e-12));
}

TEST_CASE("hadamard_rank1: units, self, dense probes") {
  auto gen = rng(23);
  const Dims3 d{6, 6, 6};
  auto t = random_canonical(d, 1, gen);

  std::array<MatrixX<double>, 3> ones;
  for (int l = 0; l < 3; ++l) ones[l] = MatrixX<double>::Ones(6, 1);
  auto one = CanonicalTensor<double>::from_raw(d, VectorX<double>::Ones(1), ones);
  auto prod = hadamard_rank1(one, t);
  CHECK(rel_fnorm_diff(to_dense(prod), to_dense(t)) < 1e-14);

  auto s = random_canonical(d, 1, gen);
  auto p2 = hadamard_rank1(t, s);
  auto dt = to_dense(t), dsx = to_dense(s), dp = to_dense(p2);
  std::uniform_int_distribution<Index> di(0, 5);
  for (int i = 0; i < 30; ++i) {
    const Index a = di(gen), b = di(gen), c = di(gen);
    CHECK(dp(a, b, c) == doctest::Approx(dt(a, b, c) * dsx(a, b, c)).epsilon(1e-13));
  }

  auto r2 = random_canonical(d, 2, gen);
  CHECK_THROWS_AS(hadamard_rank1(t, r2), std::invalid_argument);
}

TEST_CASE("gram_schmidt: identity, orthonormal input, random input, rank deficiency") {
  auto id = MatrixX<double>::Identity(5, 5).eval();
  auto r1 = gram_schmidt<double>(id);
  CHECK(r1.rank == 5);
  CHECK((r1.q - id).norm() < 1e-14);
  CHECK((r1.transform - id).norm() < 1e-14);

  auto gen = rng(29);
  std::normal_distribution<double> dist;
  MatrixX<double> m(64, 8);
  for (Index j = 0; j < 8; ++j)
    for (Index i = 0; i < 64; ++i) m(i, j) = dist(gen);
  auto r2 = gram_schmidt<double>(m);
  CHECK(r2.rank == 8);
  CHECK((r2.q.transpose() * r2.q - MatrixX<double>::Identity(8, 8)).norm() < 1e-12);
  CHECK((r2.q * r2.transform - m).norm() < 1e-12 * m.norm());
  // already-orthonormal input reproduces itself with a unit transform
  auto r3 = gram_schmidt<double>(r2.q);
  CHECK((r3.transform - MatrixX<double>::Identity(8, 8)).norm() < 1e-12);

  MatrixX<double> dep(6, 3);
  dep.col(0) = VectorX<double>::LinSpaced(6, 1.0, 6.0);
  dep.col(1) = 2.0 * dep.col(0);
  dep.col(2) = VectorX<double>::Ones(6);
  auto r4 = gram_schmidt<double>(dep);
  CHECK(r4.rank == 2);
}

TEST_CASE("orthonormalize folds the transform into the core without changing entries") {
  auto gen = rng(31);
  auto t = random_tucker(Dims3{10, 9, 8}, Dims3{3, 3, 2}, gen);
  // skew the factors away from orthonormality
  for (int l = 0; l < 3; ++l) t.factor(l).col(0) *= 3.7;
  auto o = orthonormalize(t);
  CHECK(o.factors_orthonormal(1e-12));
  CHECK(rel_fnorm_diff(to_dense(o), to_dense(t)) < 1e-12);
}

TEST_CASE("entry evaluation is multilinear in side-matrix columns") {
  auto gen = rng(37);
  auto a = random_canonical(Dims3{5, 5, 5}, 3, gen);
  auto b = a;
  const double c = 2.5;
  b.factor(1).col(1) *= c;  // scales only summand 1's contribution
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) {
      double contrib1 = a.weights()[1] * a.factor(0)(i, 1) * a.factor(1)(j, 1) * a.factor(2)(0, 1);
      CHECK(b.entry(i, j, 0) ==
            doctest::Approx(a.entry(i, j, 0) + (c - 1.0) * contrib1).epsilon(1e-12));
    }
}

TEST_CASE("dense materialization is guarded") {
  auto gen = rng(41);
  auto a = random_canonical(Dims3{300, 300, 300}, 1, gen);
  CHECK_THROWS_AS(to_dense(a, 1000000), std::length_error);
}

TEST_CASE("sampled max-norm is bounded by and approaches the exact max") {
  auto gen = rng(47);
  auto a = random_canonical(Dims3{10, 10, 10}, 4, gen);
  const double exact = to_dense(a).data().cwiseAbs().maxCoeff();
  const double sampled = sampled_max_abs(a, 4000, 7);
  CHECK(sampled <= exact + 1e-15);
  CHECK(sampled >= 0.5 * exact);  // dense probe coverage on a 1000-entry grid
  CHECK(sampled_max_abs(a, 200, 9) == sampled_max_abs(a, 200, 9));  // seeded determinism
}

TEST_CASE("core types instantiate for float") {
  auto grid = UniformGrid<float>::cubic(2.0f, 8);
  auto ref = build_reference_canonical<float>(KernelSpec::newton(), grid, 5);
  LatticeGeometry geom;
  geom.cells = {2, 2, 2};
  geom.cell_width = 2.0;
  auto lgrid = lattice_grid<float>(geom, 8);
  auto ref2 = build_reference_canonical<float>(KernelSpec::newton(), lgrid, 5);
  auto sum = assembled_sum_canonical(ref2, geom);
  CHECK(sum.rank() == 11);
  auto [t, rep] = canonical_to_tucker(sum, TruncationSpec::tol(1e-3));
  (void)rep;
  CHECK(std::abs(float(inner(t, t)) - inner(sum, sum)) / inner(sum, sum) < 1e-2f);
}

TEST_CASE("tensor3 unfold/fold/ttm are consistent") {
  auto gen = rng(43);
  Tensor3<double> t(Dims3{4, 3, 5});
  std::normal_distribution<double> dist;
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = dist(gen);
  for (int mode = 0; mode < 3; ++mode) {
    auto u = t.unfold(mode);
    auto back = Tensor3<double>::fold(u, mode, t.dims());
    CHECK(max_abs_diff(back, t) == 0.0);
  }
  MatrixX<double> m(6, 3);
  for (Index j = 0; j < 3; ++j)
    for (Index i = 0; i < 6; ++i) m(i, j) = dist(gen);
  auto r = t.ttm(m, 1);
  CHECK(r.dims() == Dims3{4, 6, 5});
  // spot-check one entry against the definition
  double expect = 0.0;
  for (Index j = 0; j < 3; ++j) expect += m(2, j) * t(1, j, 4);
  CHECK(r(1, 2, 4) == doctest::Approx(expect).epsilon(1e-14));
}
