#include "doctest.h"

#include <Eigen/SVD>

#include <random>

#include "latsum/rank_reduction.hpp"
#include "latsum/reference.hpp"
#include "test_helpers.hpp"

using namespace latsum;
using namespace latsum::testing;

namespace {

double dense_error(const CanonicalTensor<double>& a, const TuckerTensor<double>& t) {
  return (to_dense(a).data() - to_dense(t).data()).norm();
}

}  // namespace

TEST_CASE("rhosvd reproduces exact low-rank inputs") {
  auto gen = rng(3);
  auto a = random_canonical(Dims3{12, 12, 12}, 3, gen);
  auto [t, report] = rhosvd(a, TruncationSpec::fixed_ranks(3, 3, 3));
  CHECK(dense_error(a, t) / norm_f(a) < 1e-12);
  CHECK(report.chosen_ranks == Dims3{3, 3, 3});
}

TEST_CASE("rhosvd clamps oversized rank requests and handles the zero tensor") {
  auto gen = rng(9);
  auto a = random_canonical(Dims3{6, 6, 6}, 2, gen);
  auto [t, report] = rhosvd(a, TruncationSpec::fixed_ranks(10, 10, 10));
  CHECK(report.chosen_ranks[0] <= 2);
  CHECK(dense_error(a, t) / norm_f(a) < 1e-12);

  auto z = CanonicalTensor<double>::zero(Dims3{6, 6, 6});
  auto [tz, rz] = rhosvd(z, TruncationSpec::fixed_ranks(2, 2, 2));
  CHECK(to_dense(tz).fnorm() == 0.0);
  CHECK(rz.input_norm == 0.0);
}

TEST_CASE("rhosvd error never exceeds the discarded-tail bound") {
  auto gen = rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_canonical(Dims3{64, 64, 64}, 20, gen);
    auto [t, report] = rhosvd(a, TruncationSpec::fixed_ranks(5, 5, 5));
    const double err = dense_error(a, t);
    CHECK(err <= report.bound_abs * (1.0 + 1e-12));
  }
}

TEST_CASE("spectral report singular values match an independent dense SVD") {
  auto gen = rng(55);
  auto a = random_canonical(Dims3{20, 20, 20}, 30, gen);  // R > n exercises the wide case
  auto [t, report] = rhosvd(a, TruncationSpec::fixed_ranks(4, 4, 4));
  (void)t;
  for (int l = 0; l < 3; ++l) {
    Eigen::JacobiSVD<MatrixX<double>> svd(a.factor(l));
    const auto& sv = report.singular_values[l];
    REQUIRE(sv.size() == svd.singularValues().size());
    for (Index k = 0; k < sv.size(); ++k)
      CHECK(sv[k] == doctest::Approx(svd.singularValues()[k]).epsilon(1e-10));
    for (Index k = 0; k + 1 < sv.size(); ++k) CHECK(sv[k] >= sv[k + 1]);
  }
}

TEST_CASE("singular values are invariant under column permutation") {
  auto gen = rng(77);
  auto a = random_canonical(Dims3{16, 16, 16}, 8, gen);
  auto b = a;
  // reverse the column order consistently (a permutation of the summands)
  VectorX<double> w = b.weights().reverse();
  std::array<MatrixX<double>, 3> f;
  for (int l = 0; l < 3; ++l) f[l] = b.factor(l).rowwise().reverse();
  auto c = CanonicalTensor<double>(a.dims(), w, f);
  auto [ta, ra] = rhosvd(a, TruncationSpec::fixed_ranks(4, 4, 4));
  auto [tc, rc] = rhosvd(c, TruncationSpec::fixed_ranks(4, 4, 4));
  (void)ta;
  (void)tc;
  for (int l = 0; l < 3; ++l)
    for (Index k = 0; k < ra.singular_values[l].size(); ++k)
      CHECK(ra.singular_values[l][k] ==
            doctest::Approx(rc.singular_values[l][k]).epsilon(1e-12));
}

TEST_CASE("als fits are monotone and refine the rhosvd error") {
  auto gen = rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_canonical(Dims3{24, 24, 24}, 12, gen);
    TruncationSpec spec = TruncationSpec::fixed_ranks(4, 4, 4);
    auto [init, report] = rhosvd(a, spec);
    (void)report;
    auto res = als_refine(a, init, spec);
    for (size_t i = 1; i < res.fits.size(); ++i)
      CHECK(res.fits[i] >= res.fits[i - 1] * (1.0 - 1e-13));
    CHECK(dense_error(a, res.tensor) <= dense_error(a, init) * (1.0 + 1e-12));
  }
}

TEST_CASE("als is a fixed point on exact-rank inputs") {
  auto gen = rng(35);
  auto a = random_canonical(Dims3{14, 14, 14}, 3, gen);
  TruncationSpec spec = TruncationSpec::fixed_ranks(3, 3, 3);
  auto [init, report] = rhosvd(a, spec);
  (void)report;
  auto res = als_refine(a, init, spec);
  CHECK(dense_error(a, res.tensor) / norm_f(a) < 1e-12);
  CHECK(std::abs(res.fits.back() - res.fits.front()) <= 1e-12 * res.fits.front());
}

TEST_CASE("canonical_to_tucker: diagonal identity and tolerance control") {
  auto gen = rng(39);
  auto r1 = random_canonical(Dims3{10, 10, 10}, 1, gen);
  auto [t1, rep1] = canonical_to_tucker(r1, TruncationSpec::fixed_ranks(1, 1, 1));
  (void)rep1;
  CHECK(t1.ranks() == Dims3{1, 1, 1});
  CHECK(dense_error(r1, t1) / norm_f(r1) < 1e-12);

  auto a = random_canonical(Dims3{20, 20, 20}, 12, gen);
  for (double eps : {1e-2, 1e-4}) {
    auto [t, rep] = canonical_to_tucker(a, TruncationSpec::tol(eps));
    (void)rep;
    CHECK(dense_error(a, t) / norm_f(a) <= eps);
  }
}

TEST_CASE("canonical_to_tucker error decreases as the rank cap grows") {
  auto gen = rng(47);
  auto a = random_canonical(Dims3{20, 20, 20}, 12, gen);
  double prev = 1e300;
  for (Index r = 2; r <= 8; ++r) {
    auto [t, rep] = canonical_to_tucker(a, TruncationSpec::fixed_ranks(r, r, r));
    (void)rep;
    const double err = dense_error(a, t);
    CHECK(err <= prev * (1.0 + 1e-10));
    prev = err;
  }
}

TEST_CASE("newton reference compresses to single-digit Tucker ranks at 1e-6") {
  auto grid = UniformGrid<double>::cubic(10.0, 64);
  auto ref = build_reference_canonical<double>(KernelSpec::newton(), grid, 24);
  auto [t, rep] = canonical_to_tucker(ref.canonical, TruncationSpec::tol(1e-6));
  (void)rep;
  for (int l = 0; l < 3; ++l) {
    CHECK(t.ranks()[l] >= 6);
    CHECK(t.ranks()[l] <= 16);
  }
  // the measured error honors the tolerance (dense-checkable at this size)
  CHECK(dense_error(ref.canonical, t) / norm_f(ref.canonical) <= 1e-6);
}

TEST_CASE("tucker_to_canonical: diagonal and generic cores") {
  auto gen = rng(51);
  auto c1 = random_canonical(Dims3{8, 8, 8}, 1, gen);
  auto back1 = tucker_to_canonical(as_diagonal_tucker(c1));
  CHECK(back1.rank() == 1);
  CHECK(rel_fnorm_diff(to_dense(back1), to_dense(c1)) < 1e-13);

  auto c2 = random_canonical(Dims3{8, 8, 8}, 2, gen);
  auto back2 = tucker_to_canonical(as_diagonal_tucker(c2));
  CHECK(back2.rank() == 2);

  auto t = random_tucker(Dims3{10, 9, 8}, Dims3{3, 3, 3}, gen);
  auto c = tucker_to_canonical(t);
  CHECK(c.rank() <= 9);
  CHECK(rel_fnorm_diff(to_dense(c), to_dense(t)) < 1e-13);
}

TEST_CASE("c2t then t2c reproduces the tensor within composed tolerances") {
  auto gen = rng(53);
  auto a = random_canonical(Dims3{16, 16, 16}, 10, gen);
  auto [t, rep] = canonical_to_tucker(a, TruncationSpec::tol(1e-6));
  (void)rep;
  auto c = tucker_to_canonical(t);
  CHECK(rel_fnorm_diff(to_dense(c), to_dense(a)) <= 2e-6);
}

TEST_CASE("tucker_sum_to_tucker: identity, bound, rank budget") {
  auto gen = rng(61);
  {
    auto t = random_tucker(Dims3{12, 12, 12}, Dims3{3, 3, 3}, gen);
    std::vector<TuckerTensor<double>> one{t};
    auto [out, rep] = tucker_sum_to_tucker<double>(one, TruncationSpec::fixed_ranks(3, 3, 3));
    (void)rep;
    CHECK(rel_fnorm_diff(to_dense(out), to_dense(t)) < 1e-12);
  }
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<TuckerTensor<double>> terms;
    Dims3 sum_ranks{0, 0, 0};
    for (int s = 0; s < 5; ++s) {
      terms.push_back(random_tucker(Dims3{24, 24, 24}, Dims3{3, 3, 3}, gen));
      for (int l = 0; l < 3; ++l) sum_ranks[l] += 3;
    }
    auto [out, rep] = tucker_sum_to_tucker<double>(terms, TruncationSpec::fixed_ranks(4, 4, 4));
    Tensor3<double> exact(Dims3{24, 24, 24});
    for (const auto& t : terms) exact.data() += to_dense(t).data();
    const double err = (to_dense(out).data() - exact.data()).norm();
    CHECK(err <= rep.bound_abs * (1.0 + 1e-12));
    for (int l = 0; l < 3; ++l) CHECK(rep.chosen_ranks[l] <= sum_ranks[l]);
  }
}

TEST_CASE("stability: nonnegative, orthogonal, and adversarial inputs") {
  auto gen = rng(67);
  // nonnegative vectors and weights satisfy the condition with C <= 1
  auto nn = random_canonical(Dims3{12, 12, 12}, 6, gen, /*nonnegative=*/true);
  auto s1 = stability_check(nn);
  CHECK(s1.satisfied);
  CHECK(s1.constant <= 1.0 + 1e-10);

  // mutually orthogonal rank-1 terms: the constant is exactly 1
  std::array<MatrixX<double>, 3> f;
  for (int l = 0; l < 3; ++l) f[l] = MatrixX<double>::Identity(6, 3);
  auto ortho = CanonicalTensor<double>(Dims3{6, 6, 6}, VectorX<double>::Constant(3, 2.0), f);
  auto s2 = stability_check(ortho);
  CHECK(s2.constant == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s2.satisfied);

  // near-cancelling pair: xi large against a tiny result
  auto v = random_canonical(Dims3{12, 12, 12}, 1, gen);
  auto w = v;
  w.weights()[0] = -v.weights()[0];
  w.factor(0).col(0) += VectorX<double>::Constant(12, 1e-6);
  w.factor(0).col(0).normalize();
  auto pair = add_concat(v, w);
  auto s3 = stability_check(pair);
  CHECK(s3.constant > 100.0);
  CHECK(!s3.satisfied);

  auto z = CanonicalTensor<double>::zero(Dims3{4, 4, 4});
  CHECK(!stability_check(z).defined);
}

TEST_CASE("stability of tucker sums") {
  auto gen = rng(71);
  std::vector<TuckerTensor<double>> terms;
  for (int s = 0; s < 3; ++s)
    terms.push_back(random_tucker(Dims3{18, 18, 18}, Dims3{2, 2, 2}, gen, /*nonnegative=*/true));
  auto st = stability_check<double>(terms);
  CHECK(st.defined);
  CHECK(st.satisfied);  // nonnegative cores and factors cannot cancel
}
