#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "ee/error.hpp"
#include "ee/measures.hpp"
#include "fixtures.hpp"

using namespace ee;
using ee::test::measure_of;
using ee::test::st;

namespace {
RingPartition four_rings() { return RingPartition::from_labels(StateSpace::finite(4), {0, 0, 1, 1}); }
}  // namespace

TEST_CASE("insertion is exact counting") {
  auto p = four_rings();
  EmpiricalMeasure m(p, st(0));
  m.insert(st(2));
  auto v = m.view().probability_vector();
  CHECK(v == std::vector<double>{0.5, 0.0, 0.5, 0.0});
  m.insert(st(0));
  v = m.view().probability_vector();
  CHECK(v[0] == doctest::Approx(2.0 / 3.0));
  CHECK(v[2] == doctest::Approx(1.0 / 3.0));
  CHECK(m.total() == 3);
}

TEST_CASE("prefix views see earlier states") {
  auto p = four_rings();
  auto m = measure_of(p, {0, 2, 3, 3});
  auto v = m.prefix(2);
  CHECK(v.total() == 2);
  CHECK(v.ring_size(1) == 1);
  CHECK(m.view().ring_size(1) == 3);
  CHECK(v.ring_mass(0) == doctest::Approx(0.5));
}

TEST_CASE("restriction to the ring of x") {
  auto p = four_rings();
  auto u = measure_of(p, {0, 1, 2, 3});
  auto r = restrict_to_ring(u.view(), st(2));
  CHECK(r.ring() == 1);
  CHECK(r.probability_vector() == std::vector<double>{0.0, 0.0, 0.5, 0.5});

  auto m = measure_of(p, {0, 0, 2});
  CHECK(restrict_to_ring(m.view(), st(0)).probability_vector() == std::vector<double>{1, 0, 0, 0});
  const std::vector<double> f{10, 20, 30, 40};
  CHECK(restrict_to_ring(u.view(), st(3)).expectation(f) == doctest::Approx(35.0));

  auto lone = measure_of(p, {0});
  CHECK_THROWS_AS(restrict_to_ring(lone.view(), st(2)), StabilityError);
}

TEST_CASE("ring draws") {
  auto p = four_rings();
  Rng rng(1);
  SUBCASE("single atom") {
    auto m = measure_of(p, {0, 2});
    for (int i = 0; i < 20; ++i) CHECK(m.view().draw(1, rng) == st(2));
  }
  SUBCASE("atoms (a, a, b) drawn 2/3, 1/3") {
    auto m = measure_of(p, {2, 2, 3, 0});
    const int n = 100000;
    int a = 0;
    for (int i = 0; i < n; ++i) a += m.view().draw(1, rng) == st(2);
    CHECK(ee::test::within_se(a, n, 2.0 / 3.0));
  }
  SUBCASE("empty ring") {
    auto m = measure_of(p, {0, 1});
    CHECK_THROWS_AS(m.view().draw(1, rng), StabilityError);
  }
  SUBCASE("fixed seed replays") {
    auto m = measure_of(p, {0, 1, 1, 0, 1});
    Rng a(77), b(77);
    for (int i = 0; i < 100; ++i) CHECK(m.view().draw(0, a) == m.view().draw(0, b));
  }
}

TEST_CASE("stability monitor") {
  auto p = four_rings();
  SUBCASE("single ring never violates") {
    auto one = RingPartition::from_labels(StateSpace::finite(4), {0, 0, 0, 0});
    StabilityMonitor mon(1.0);
    CHECK(mon.check(measure_of(one, {3}).view(), 0));
  }
  SUBCASE("point mass leaves the other ring empty") {
    StabilityMonitor mon(0.1);
    CHECK_FALSE(mon.check(measure_of(p, {0}).view(), 5, 0));
    REQUIRE(mon.violations().size() == 1);
    CHECK(mon.violations()[0].ring == 1);
    CHECK(mon.violations()[0].step == 5);
    CHECK(mon.min_observed_mass() == 0.0);
  }
  SUBCASE("masses (0.25, 0.75) at theta 0.3 violate the first ring only") {
    StabilityMonitor mon(0.3);
    CHECK_FALSE(mon.check(measure_of(p, {0, 2, 3, 3}).view(), 0));
    REQUIRE(mon.violations().size() == 1);
    CHECK(mon.violations()[0].ring == 0);
    CHECK(mon.violations()[0].mass == doctest::Approx(0.25));
  }
  SUBCASE("the monitor only records; the ensemble decides whether to abort") {
    StabilityMonitor mon(0.3, StabilityPolicy::abort);
    CHECK_FALSE(mon.check(measure_of(p, {0, 2, 3, 3}).view(), 0));
    CHECK(mon.policy() == StabilityPolicy::abort);
  }
  CHECK_THROWS_AS(StabilityMonitor(0.0), ConfigError);
  CHECK_THROWS_AS(StabilityMonitor(1.5), ConfigError);
}

TEST_CASE("total variation") {
  const std::vector<double> a{0.5, 0.5}, b{0.25, 0.75}, d0{1, 0}, d1{0, 1};
  CHECK(tv_distance(a, a) == 0.0);
  CHECK(tv_distance(d0, d1) == 1.0);
  CHECK(tv_distance(a, b) == doctest::Approx(0.25).epsilon(1e-15));
  const std::vector<double> bad{0.5, 0.6}, longer{0.5, 0.25, 0.25}, neg{1.5, -0.5};
  CHECK_THROWS_AS(tv_distance(a, bad), ContractError);
  CHECK_THROWS_AS(tv_distance(a, longer), ContractError);
  CHECK_THROWS_AS(tv_distance(a, neg), ContractError);
}

TEST_CASE("dump lists every atom with its ring") {
  auto p = four_rings();
  std::ostringstream out;
  measure_of(p, {1, 3}).write_dump(out);
  CHECK(out.str() == "step,state,ring\n0,1,0\n1,3,1\n");
}
