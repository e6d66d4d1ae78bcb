#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ee/error.hpp"
#include "ee/exact_oracle.hpp"
#include "fixtures.hpp"

using namespace ee;
using namespace ee::oracle;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

TransitionMatrix two_by_two(double a, double b) {
  Matrix m(2, 2);
  m << 1 - a, a, b, 1 - b;
  return TransitionMatrix(m);
}

const Vector kUniform4 = vec({0.25, 0.25, 0.25, 0.25});

}  // namespace

TEST_CASE("transition matrices are validated") {
  CHECK_THROWS_AS(TransitionMatrix{Matrix(2, 3)}, ContractError);
  Matrix bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  CHECK_THROWS_AS(TransitionMatrix{bad}, NumericalError);
  bad << 1.1, -0.1, 0.5, 0.5;
  CHECK_THROWS_AS(TransitionMatrix{bad}, NumericalError);
}

TEST_CASE("local MH matrices") {
  auto two = ee::test::two_state();
  auto k0 = k_matrix(*two, 0).matrix();
  CHECK((k0.array() - 0.5).abs().maxCoeff() < 1e-15);
  auto k1 = k_matrix(*two, 1).matrix();
  CHECK(k1(0, 0) == doctest::Approx(0.5));
  CHECK(k1(1, 0) == doctest::Approx(0.25));
  CHECK(k1(1, 1) == doctest::Approx(0.75));
  CHECK((stationary(k_matrix(*two, 1)) - vec({1.0 / 3.0, 2.0 / 3.0})).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("selection matrix special cases") {
  SUBCASE("singleton rings with point masses give back K") {
    auto s = StateSpace::finite(3);
    KernelSet k(ladder_from_weights(s, {{1, 2, 3}, {3, 1, 2}}), RingPartition::from_labels(s, {0, 1, 2}),
                LocalKernelSpec{});
    const Vector mu = vec({0.2, 0.3, 0.5});
    CHECK((q_matrix(k, 1, mu).matrix() - k_matrix(k, 1).matrix()).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("equal levels force alpha = 1") {
    auto s = StateSpace::finite(4);
    KernelSet k(ladder_from_weights(s, {{1, 1, 2, 4}, {1, 1, 2, 4}}), RingPartition::from_labels(s, {0, 0, 1, 1}),
                LocalKernelSpec{});
    const Vector mu = vec({0.1, 0.3, 0.2, 0.4});
    const Matrix expected = restricted_rows(k.partition(), mu) * k_matrix(k, 1).matrix();
    CHECK((q_matrix(k, 1, mu).matrix() - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("mixture endpoints and midpoint") {
    auto k = ee::test::four_state();
    const Vector mu = vec({0.1, 0.2, 0.3, 0.4});
    const Matrix km = k_matrix(*k, 1).matrix(), qm = q_matrix(*k, 1, mu).matrix();
    CHECK((nonlinear_matrix(*k, 1, mu, 0.0).matrix() - km).cwiseAbs().maxCoeff() == 0.0);
    CHECK((nonlinear_matrix(*k, 1, mu, 1.0).matrix() - qm).cwiseAbs().maxCoeff() < 1e-16);
    CHECK((nonlinear_matrix(*k, 1, mu, 0.5).matrix() - 0.5 * (km + qm)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("an empty ring is an error unless the local fallback is requested") {
    auto k = ee::test::four_state();
    const Vector mu = vec({0.5, 0.5, 0.0, 0.0});
    CHECK_THROWS_AS(q_matrix(*k, 1, mu), StabilityError);
    auto q = q_matrix(*k, 1, mu, EmptyRing::local_move).matrix();
    CHECK((q.row(2) - k_matrix(*k, 1).matrix().row(2)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("stationary vectors") {
  Matrix ds(3, 3);
  ds << 0.2, 0.3, 0.5, 0.5, 0.2, 0.3, 0.3, 0.5, 0.2;
  CHECK((stationary(TransitionMatrix(ds)) - Vector::Constant(3, 1.0 / 3.0)).cwiseAbs().maxCoeff() < 1e-14);

  auto k = ee::test::four_state();
  const auto p1 = k->ladder().probabilities(1);
  const Vector pi1 = Eigen::Map<const Vector>(p1.data(), 4);
  CHECK((stationary(k_matrix(*k, 1)) - pi1).cwiseAbs().maxCoeff() < 1e-14);
  for (double eps : {0.0, 0.25, 0.5, 1.0})
    CHECK((stationary(nonlinear_matrix(*k, 1, kUniform4, eps)) - pi1).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(stationary(TransitionMatrix(Matrix::Identity(2, 2))), NumericalError);
}

TEST_CASE("a non-target feeder moves the fixed point") {
  auto k = ee::test::four_state();
  const auto p1 = k->ladder().probabilities(1);
  const Vector pi1 = Eigen::Map<const Vector>(p1.data(), 4);
  const Vector mu = vec({0.6, 0.1, 0.1, 0.2});
  CHECK((stationary(nonlinear_matrix(*k, 1, mu, 0.5)) - pi1).cwiseAbs().maxCoeff() > 1e-3);
  // Ring masses of mu do not matter, only its restrictions.
  const Vector rescaled = vec({0.3 * 6 / 7, 0.3 / 7, 0.7 / 3, 0.7 * 2 / 3});
  CHECK((nonlinear_matrix(*k, 1, mu, 0.5).matrix() - nonlinear_matrix(*k, 1, rescaled, 0.5).matrix())
            .cwiseAbs()
            .maxCoeff() < 1e-15);
}

TEST_CASE("poisson equation") {
  SUBCASE("2-state closed form") {
    // P = [[1-a, a], [b, 1-b]], w = (b, a)/(a+b); fhat = (f0 - f1) / (a+b)^2 * (a, -b)
    const double a = 0.3, b = 0.1;
    const Vector f = vec({1.0, -2.0});
    auto sol = poisson_solve(two_by_two(a, b), f);
    const double c = (f(0) - f(1)) / ((a + b) * (a + b));
    CHECK(sol.fhat(0) == doctest::Approx(c * a).epsilon(1e-13));
    CHECK(sol.fhat(1) == doctest::Approx(-c * b).epsilon(1e-13));
    CHECK(sol.mean == doctest::Approx((b * f(0) + a * f(1)) / (a + b)));
    CHECK(sol.residual < 1e-14);
  }
  SUBCASE("constants solve to zero") {
    Rng rng(1);
    auto p = random_chain(6, rng);
    auto sol = poisson_solve(p, Vector::Constant(6, 3.0));
    CHECK(sol.fhat.cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("series agrees within the Doeblin envelope") {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
      auto p = random_chain(8, rng);
      Vector f(8);
      for (int i = 0; i < 8; ++i) f(i) = 2 * rng.uniform() - 1;
      auto sol = poisson_solve(p, f);
      CHECK(sol.residual <= 1e-10);
      const double rho = geometric_rate_estimate(p, 1).doeblin_rho;
      const double env = (f.maxCoeff() - f.minCoeff()) * std::pow(rho, 50) / (1 - rho) + 1e-10;
      CHECK((poisson_series(p, f, 50) - sol.fhat).cwiseAbs().maxCoeff() <= env);
    }
  }
}

TEST_CASE("doeblin bound") {
  auto est = geometric_rate_estimate(two_by_two(0.1, 0.2));
  CHECK(est.doeblin_phi == doctest::Approx(0.3));
  CHECK(est.doeblin_rho == doctest::Approx(0.7));
  CHECK(est.max_step_ratio <= 0.7 + 1e-12);
  CHECK(est.monotone);
  // Eigenvalue 0.7: the observed decay equals the bound here.
  CHECK(est.fitted_rho == doctest::Approx(0.7).epsilon(1e-6));

  Matrix rank_one(3, 3);
  rank_one << 0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.2, 0.3, 0.5;
  auto r1 = geometric_rate_estimate(TransitionMatrix(rank_one));
  CHECK(r1.doeblin_phi == doctest::Approx(1.0));
  CHECK(r1.tv.front() < 1e-15);
}

TEST_CASE("composition identity") {
  auto k = ee::test::four_state();
  const Vector f = vec({0.3, -1.0, 0.7, 0.1});
  CHECK(composition_identity_check(*k, 1, kUniform4, f, 1) < 1e-14);
  const Vector rational = vec({1.0 / 7, 2.0 / 7, 3.0 / 7, 1.0 / 7});
  CHECK(composition_identity_check(*k, 1, rational, f, 2) < 1e-12);
  CHECK(composition_identity_check(*k, 1, rational, f, 3) < 1e-10);
  CHECK_THROWS_AS(composition_identity_check(*k, 1, rational, f, 4), ConfigError);
}

TEST_CASE("mixture expansion") {
  Rng rng(3);
  auto kk = random_chain(4, rng), p = random_chain(4, rng);
  CHECK(mixture_expansion_check(kk, p, 0.0, 5) < 1e-14);
  CHECK(mixture_expansion_check(kk, p, 0.7, 1) < 1e-15);
  // eps = 0.5, n = 2 by hand: 0.25 (KK + KP + PK + PP)
  const Matrix &a = kk.matrix(), &b = p.matrix();
  const Matrix mix = 0.5 * (a + b);
  CHECK((mix * mix - 0.25 * (a * a + a * b + b * a + b * b)).cwiseAbs().maxCoeff() < 1e-15);
  for (double eps : {0.3, 0.5, 1.0})
    for (std::size_t n = 1; n <= 6; ++n) CHECK(mixture_expansion_check(kk, p, eps, n) <= 1e-10);
  CHECK_THROWS_AS(mixture_expansion_check(kk, p, 0.5, 7), ConfigError);
}

TEST_CASE("lipschitz bound on Q") {
  auto k = ee::test::four_state();
  Rng rng(4);
  CHECK(lipschitz_check(*k, 1, kUniform4, kUniform4, 5, rng) == 0.0);
  for (int t = 0; t < 100; ++t) {
    Vector mu(4), xi(4);
    for (int i = 0; i < 4; ++i) {
      mu(i) = 0.05 + rng.uniform();
      xi(i) = 0.05 + rng.uniform();
    }
    CHECK(lipschitz_check(*k, 1, mu / mu.sum(), xi / xi.sum(), 5, rng) <= 1.0 + 1e-9);
  }
  CHECK(restricted_tv(k->partition(), vec({0.5, 0, 0.25, 0.25}), vec({0, 0.5, 0.25, 0.25})) ==
        doctest::Approx(1.0));
}

TEST_CASE("invariant continuity") {
  auto k = ee::test::four_state();
  const Vector mu = vec({0.1, 0.2, 0.3, 0.4}), xi = vec({0.4, 0.1, 0.1, 0.4});
  auto same = invariant_continuity_check(*k, 1, mu, mu, 0.5);
  CHECK(same.ratio == 0.0);
  auto frozen = invariant_continuity_check(*k, 1, mu, xi, 0.0);
  CHECK(frozen.tv_invariant < 1e-14);
  auto r = invariant_continuity_check(*k, 1, mu, xi, 0.5);
  CHECK(std::isfinite(r.ratio));
  CHECK(r.ratio > 0.0);
}

TEST_CASE("empirical fluctuation bound") {
  auto k = ee::test::four_state();
  Rng rng(5);
  auto rep = fluctuation_check(k->partition(), kUniform4, 10000, 0.25, rng);
  CHECK(rep.checked_steps > 9000);
  CHECK(rep.max_ratio <= 1.0);
  CHECK(rep.max_ratio > 0.0);
}
