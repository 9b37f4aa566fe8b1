#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ddg/rng.hpp"
#include "ddg/theory.hpp"

using namespace ddg;

namespace {

PiecewiseDensity uniform_density(double lo, double hi, double support_lo,
                                 double support_hi) {
  // uniform on [lo,hi] embedded in support [support_lo, support_hi]
  PiecewiseDensity p;
  const double h = 1.0 / (hi - lo);
  if (support_lo < lo) {
    p.breakpoints = {support_lo, lo, hi};
    p.densities = {0.0, h};
  } else if (support_hi > hi) {
    p.breakpoints = {lo, hi, support_hi};
    p.densities = {h, 0.0};
  } else {
    p.breakpoints = {lo, hi};
    p.densities = {h};
  }
  return p;
}

}  // namespace

TEST_CASE("continuous gap of identical densities is zero") {
  auto p = uniform_density(0.0, 1.0, 0.0, 1.0);
  CHECK(continuous_gap(p, p, 1.0) == 0.0);
}

TEST_CASE("continuous gap of disjoint uniform halves is 2") {
  auto p = uniform_density(0.0, 0.5, 0.0, 1.0);
  auto q = uniform_density(0.5, 1.0, 0.0, 1.0);
  CHECK(continuous_gap(p, q, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  // scaling B scales the gap
  CHECK(continuous_gap(p, q, 3.0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(continuous_gap(p, q, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("continuous gap rejects unnormalized densities") {
  PiecewiseDensity bad;
  bad.breakpoints = {0.0, 1.0};
  bad.densities = {2.0};
  auto p = uniform_density(0.0, 1.0, 0.0, 1.0);
  CHECK_THROWS_AS(continuous_gap(bad, p, 1.0), std::invalid_argument);
}

TEST_CASE("discretize: single interval gives one atom of mass 1 at the midpoint") {
  auto p = uniform_density(0.0, 1.0, 0.0, 1.0);
  auto d = discretize(p, Partition::uniform(0.0, 1.0, 1));
  REQUIRE(d.atoms.size() == 1);
  CHECK(d.atoms[0] == 0.5);
  CHECK(d.masses[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("discretize: uniform density over k equal cells") {
  auto p = uniform_density(0.0, 1.0, 0.0, 1.0);
  auto d = discretize(p, Partition::uniform(0.0, 1.0, 5));
  for (double m : d.masses) CHECK(m == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("discretize: half-support uniform on a two-cell partition") {
  auto p = uniform_density(0.0, 0.5, 0.0, 1.0);
  auto d = discretize(p, Partition::uniform(0.0, 1.0, 2));
  CHECK(d.atoms[0] == 0.25);
  CHECK(d.atoms[1] == 0.75);
  CHECK(d.masses[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.masses[1] == doctest::Approx(0.0));
}

TEST_CASE("discretize preserves total mass exactly") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    PiecewiseDensity p;
    p.breakpoints = {0.0, 0.2 + 0.1 * rng.uniform(), 0.5, 0.9, 1.0};
    p.densities = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    double mass = 0.0;
    for (int i = 0; i < 4; ++i)
      mass += p.densities[i] * (p.breakpoints[i + 1] - p.breakpoints[i]);
    for (double& d : p.densities) d /= mass;
    auto disc = discretize(p, Partition::uniform(0.0, 1.0, 1 + (trial % 9)));
    double total = 0.0;
    for (double m : disc.masses) total += m;
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("one-cell partition collapses the disjoint pair: strict inequality") {
  auto p = uniform_density(0.0, 0.5, 0.0, 1.0);
  auto q = uniform_density(0.5, 1.0, 0.0, 1.0);
  auto pd = discretize(p, Partition::uniform(0.0, 1.0, 1));
  auto qd = discretize(q, Partition::uniform(0.0, 1.0, 1));
  CHECK(discrete_gap(pd, qd, 1.0) == doctest::Approx(0.0));
  CHECK(continuous_gap(p, q, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("two-cell partition of the disjoint pair attains equality") {
  auto p = uniform_density(0.0, 0.5, 0.0, 1.0);
  auto q = uniform_density(0.5, 1.0, 0.0, 1.0);
  auto pd = discretize(p, Partition::uniform(0.0, 1.0, 2));
  auto qd = discretize(q, Partition::uniform(0.0, 1.0, 2));
  CHECK(discrete_gap(pd, qd, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("discrete gap rejects mismatched partitions") {
  auto p = uniform_density(0.0, 1.0, 0.0, 1.0);
  auto a = discretize(p, Partition::uniform(0.0, 1.0, 2));
  auto b = discretize(p, Partition::uniform(0.0, 1.0, 3));
  CHECK_THROWS_AS(discrete_gap(a, b, 1.0), std::invalid_argument);
}

TEST_CASE("theorem_check: P == Q gives both gaps zero with equality everywhere") {
  auto p = uniform_density(0.0, 1.0, 0.0, 1.0);
  auto report = theorem_check(p, p, Partition::uniform(0.0, 1.0, 4), 1.0);
  CHECK(report.continuous_gap == 0.0);
  CHECK(report.discrete_gap == 0.0);
  for (const auto& c : report.intervals) CHECK(c.equality);
}

TEST_CASE("randomized suite: no violations, equality cases within 1e-12") {
  auto result = run_theorem_suite(200, 12345, {0.5, 1.0, 3.0});
  CHECK(result.violations == 0);
  CHECK(result.max_excess <= 1e-12);
  CHECK(result.max_equality_error <= 1e-12);
}

TEST_CASE("continuous gap is symmetric and satisfies the triangle inequality") {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    PiecewiseDensity d[3];
    for (auto& p : d) {
      p.breakpoints = {0.0, 0.25, 0.5, 0.75, 1.0};
      p.densities = {0.1 + rng.uniform(), 0.1 + rng.uniform(), 0.1 + rng.uniform(),
                     0.1 + rng.uniform()};
      double mass = 0.0;
      for (int i = 0; i < 4; ++i) mass += 0.25 * p.densities[i];
      for (double& x : p.densities) x /= mass;
    }
    const double ab = continuous_gap(d[0], d[1], 1.0);
    const double ba = continuous_gap(d[1], d[0], 1.0);
    const double ac = continuous_gap(d[0], d[2], 1.0);
    const double cb = continuous_gap(d[2], d[1], 1.0);
    CHECK(std::abs(ab - ba) < 1e-12);
    CHECK(ab <= ac + cb + 1e-12);
  }
}

TEST_CASE("empirical refinement: identical sample sets give zero at both depths") {
  std::vector<double> s = {0.1, 0.4, 0.9, 0.5};
  auto r = empirical_refinement_check(s, s, Partition::uniform(0.0, 1.0, 2),
                                      Partition::uniform(0.0, 1.0, 8));
  CHECK(r.l1_coarse == 0.0);
  CHECK(r.l1_fine == 0.0);
}

TEST_CASE("empirical refinement: one coarse cell always gives zero") {
  std::vector<double> a = {0.1, 0.2}, b = {0.8, 0.9};
  auto r = empirical_refinement_check(a, b, Partition::uniform(0.0, 1.0, 1),
                                      Partition::uniform(0.0, 1.0, 4));
  CHECK(r.l1_coarse == 0.0);
  CHECK(r.l1_fine > 0.0);
}

TEST_CASE("empirical refinement on gaussian samples, dyadic depths 3 vs 6") {
  Rng rng(31);
  std::vector<double> a(500), b(500);
  for (double& x : a) x = rng.normal();
  for (double& x : b) x = 0.5 + rng.normal();
  auto coarse = Partition::uniform(-6.0, 6.0, 8);
  auto fine = Partition::uniform(-6.0, 6.0, 64);
  auto r = empirical_refinement_check(a, b, coarse, fine);
  CHECK(r.l1_coarse <= r.l1_fine + 1e-12);

  // brute-force histogram oracle for the coarse distance
  std::vector<double> ca(8, 0.0), cb(8, 0.0);
  for (double x : a) ++ca[std::min(7, std::max(0, static_cast<int>((x + 6.0) / 1.5)))];
  for (double x : b) ++cb[std::min(7, std::max(0, static_cast<int>((x + 6.0) / 1.5)))];
  double l1 = 0.0;
  for (int i = 0; i < 8; ++i) l1 += std::abs(ca[i] / 500.0 - cb[i] / 500.0);
  CHECK(r.l1_coarse == doctest::Approx(l1).epsilon(1e-12));
}

TEST_CASE("empirical refinement rejects non-refining partitions") {
  std::vector<double> s = {0.5};
  CHECK_THROWS_AS(empirical_refinement_check(s, s, Partition::uniform(0.0, 1.0, 3),
                                             Partition::uniform(0.0, 1.0, 4)),
                  std::invalid_argument);
}

TEST_CASE("gs metric hand-computed values") {
  CHECK(gs_metric({80.0, 80.0, 80.0}) == 0.0);
  CHECK(gs_metric({1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(gs_metric({0.0, 0.0, 0.0, 4.0}) == doctest::Approx(std::sqrt(12.0)).epsilon(1e-12));
  CHECK_THROWS_AS(gs_metric({}), std::invalid_argument);
}

TEST_CASE("gs metric is translation invariant") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(4), shifted(4);
    const double c = rng.uniform(-10.0, 10.0);
    for (int i = 0; i < 4; ++i) {
      v[i] = rng.uniform(0.0, 100.0);
      shifted[i] = v[i] + c;
    }
    CHECK(gs_metric(v) == doctest::Approx(gs_metric(shifted)).epsilon(1e-12));
  }
}
