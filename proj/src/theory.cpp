#include "ddg/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ddg/rng.hpp"

namespace ddg {

namespace {
constexpr double kMassTol = 1e-12;
}

double PiecewiseDensity::value_at(double x) const {
  if (x < lo() || x > hi()) return 0.0;
  // rightmost cell owns the upper endpoint
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), x);
  std::size_t cell = static_cast<std::size_t>(it - breakpoints.begin());
  if (cell == 0) cell = 1;
  if (cell > densities.size()) cell = densities.size();
  return densities[cell - 1];
}

double PiecewiseDensity::integral(double a, double b) const {
  if (b <= a) return 0.0;
  a = std::max(a, lo());
  b = std::min(b, hi());
  if (b <= a) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < densities.size(); ++i) {
    const double cell_lo = std::max(a, breakpoints[i]);
    const double cell_hi = std::min(b, breakpoints[i + 1]);
    if (cell_hi > cell_lo) total += densities[i] * (cell_hi - cell_lo);
  }
  return total;
}

void PiecewiseDensity::validate() const {
  if (breakpoints.size() < 2 || densities.size() != breakpoints.size() - 1)
    throw std::invalid_argument("density: breakpoints/densities size mismatch");
  for (std::size_t i = 1; i < breakpoints.size(); ++i)
    if (!(breakpoints[i] > breakpoints[i - 1]))
      throw std::invalid_argument("density: breakpoints must be strictly increasing");
  double mass = 0.0;
  for (std::size_t i = 0; i < densities.size(); ++i) {
    if (densities[i] < 0.0)
      throw std::invalid_argument("density: negative mass");
    mass += densities[i] * (breakpoints[i + 1] - breakpoints[i]);
  }
  if (std::abs(mass - 1.0) > kMassTol)
    throw std::invalid_argument("density: does not integrate to 1");
}

Partition Partition::uniform(double lo, double hi, int cells) {
  if (cells < 1 || !(hi > lo))
    throw std::invalid_argument("Partition::uniform: bad range or cell count");
  Partition p;
  p.edges.resize(cells + 1);
  for (int i = 0; i <= cells; ++i)
    p.edges[i] = lo + (hi - lo) * static_cast<double>(i) / cells;
  p.edges.front() = lo;
  p.edges.back() = hi;
  return p;
}

void Partition::validate() const {
  if (edges.size() < 2)
    throw std::invalid_argument("partition: needs at least one cell");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw std::invalid_argument("partition: edges must be strictly increasing");
}

double continuous_gap(const PiecewiseDensity& p, const PiecewiseDensity& q, double b_phi) {
  p.validate();
  q.validate();
  if (p.lo() != q.lo() || p.hi() != q.hi())
    throw std::invalid_argument("continuous_gap: supports differ");
  // merge breakpoints; |P-Q| is constant on each merged cell
  std::vector<double> edges;
  edges.reserve(p.breakpoints.size() + q.breakpoints.size());
  std::merge(p.breakpoints.begin(), p.breakpoints.end(), q.breakpoints.begin(),
             q.breakpoints.end(), std::back_inserter(edges));
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double mid = 0.5 * (edges[i] + edges[i + 1]);
    total += std::abs(p.value_at(mid) - q.value_at(mid)) * (edges[i + 1] - edges[i]);
  }
  return b_phi * total;
}

DiscreteDistribution discretize(const PiecewiseDensity& p, const Partition& partition) {
  p.validate();
  partition.validate();
  if (partition.edges.front() > p.lo() + kMassTol ||
      partition.edges.back() < p.hi() - kMassTol)
    throw std::invalid_argument("discretize: partition does not cover the support");
  DiscreteDistribution d;
  d.atoms.reserve(partition.cells());
  d.masses.reserve(partition.cells());
  for (int i = 0; i < partition.cells(); ++i) {
    const double a = partition.edges[i], b = partition.edges[i + 1];
    d.atoms.push_back(0.5 * (a + b));
    d.masses.push_back(p.integral(a, b));
  }
  return d;
}

double discrete_gap(const DiscreteDistribution& pd, const DiscreteDistribution& qd,
                    double b_phi) {
  if (pd.atoms.size() != qd.atoms.size())
    throw std::invalid_argument("discrete_gap: partition mismatch");
  for (std::size_t i = 0; i < pd.atoms.size(); ++i)
    if (pd.atoms[i] != qd.atoms[i])
      throw std::invalid_argument("discrete_gap: partition mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < pd.masses.size(); ++i)
    total += std::abs(pd.masses[i] - qd.masses[i]);
  return b_phi * total;
}

GapReport theorem_check(const PiecewiseDensity& p, const PiecewiseDensity& q,
                        const Partition& partition, double b_phi) {
  GapReport report;
  report.b_phi = b_phi;
  report.continuous_gap = continuous_gap(p, q, b_phi);
  const DiscreteDistribution pd = discretize(p, partition);
  const DiscreteDistribution qd = discretize(q, partition);
  report.discrete_gap = discrete_gap(pd, qd, b_phi);

  for (int i = 0; i < partition.cells(); ++i) {
    IntervalContribution c;
    c.lo = partition.edges[i];
    c.hi = partition.edges[i + 1];
    // restrict both densities to the cell; |P-Q| is piecewise constant there
    std::vector<double> edges;
    for (double e : p.breakpoints)
      if (e > c.lo && e < c.hi) edges.push_back(e);
    for (double e : q.breakpoints)
      if (e > c.lo && e < c.hi) edges.push_back(e);
    edges.push_back(c.lo);
    edges.push_back(c.hi);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    double abs_int = 0.0;
    bool seen_pos = false, seen_neg = false;
    for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
      const double mid = 0.5 * (edges[j] + edges[j + 1]);
      const double diff = p.value_at(mid) - q.value_at(mid);
      abs_int += std::abs(diff) * (edges[j + 1] - edges[j]);
      if (diff > 0.0) seen_pos = true;
      if (diff < 0.0) seen_neg = true;
    }
    c.continuous = b_phi * abs_int;
    c.discrete = b_phi * std::abs(pd.masses[i] - qd.masses[i]);
    c.equality = !(seen_pos && seen_neg);
    report.intervals.push_back(c);
  }

  if (report.discrete_gap > report.continuous_gap + kMassTol)
    throw std::runtime_error("theorem_check: discrete gap exceeds continuous gap");
  return report;
}

namespace {

void bin_samples(const std::vector<double>& samples, const Partition& part,
                 std::vector<double>& counts) {
  counts.assign(part.cells(), 0.0);
  for (double x : samples) {
    // clamp to the outer cells so every sample lands somewhere
    auto it = std::upper_bound(part.edges.begin(), part.edges.end(), x);
    long cell = (it - part.edges.begin()) - 1;
    cell = std::clamp<long>(cell, 0, part.cells() - 1);
    counts[static_cast<std::size_t>(cell)] += 1.0;
  }
}

}  // namespace

double histogram_l1(const std::vector<double>& counts_a,
                    const std::vector<double>& counts_b) {
  if (counts_a.size() != counts_b.size())
    throw std::invalid_argument("histogram_l1: size mismatch");
  double tot_a = 0.0, tot_b = 0.0;
  for (double c : counts_a) tot_a += c;
  for (double c : counts_b) tot_b += c;
  if (tot_a <= 0.0 || tot_b <= 0.0)
    throw std::invalid_argument("histogram_l1: empty histogram");
  double l1 = 0.0;
  for (std::size_t i = 0; i < counts_a.size(); ++i)
    l1 += std::abs(counts_a[i] / tot_a - counts_b[i] / tot_b);
  return l1;
}

RefinementResult empirical_refinement_check(const std::vector<double>& samples_a,
                                            const std::vector<double>& samples_b,
                                            const Partition& coarse,
                                            const Partition& fine) {
  coarse.validate();
  fine.validate();
  if (coarse.edges.front() != fine.edges.front() ||
      coarse.edges.back() != fine.edges.back())
    throw std::invalid_argument("empirical_refinement_check: ranges differ");
  // every coarse edge must also be a fine edge
  for (double e : coarse.edges) {
    bool found = false;
    for (double f : fine.edges)
      if (f == e) {
        found = true;
        break;
      }
    if (!found)
      throw std::invalid_argument("empirical_refinement_check: fine does not refine coarse");
  }
  std::vector<double> ca, cb, fa, fb;
  bin_samples(samples_a, coarse, ca);
  bin_samples(samples_b, coarse, cb);
  bin_samples(samples_a, fine, fa);
  bin_samples(samples_b, fine, fb);
  RefinementResult r;
  r.l1_coarse = histogram_l1(ca, cb);
  r.l1_fine = histogram_l1(fa, fb);
  return r;
}

namespace {

PiecewiseDensity random_density(Rng& rng) {
  const int cells = 2 + static_cast<int>(rng.uniform_index(7));
  PiecewiseDensity p;
  p.breakpoints.push_back(0.0);
  std::vector<double> inner(cells - 1);
  for (double& x : inner) x = rng.uniform();
  std::sort(inner.begin(), inner.end());
  for (double x : inner)
    if (x > p.breakpoints.back() + 1e-6) p.breakpoints.push_back(x);
  p.breakpoints.push_back(1.0);
  p.densities.resize(p.breakpoints.size() - 1);
  double mass = 0.0;
  for (std::size_t i = 0; i < p.densities.size(); ++i) {
    p.densities[i] = 0.05 + rng.uniform();
    mass += p.densities[i] * (p.breakpoints[i + 1] - p.breakpoints[i]);
  }
  for (double& d : p.densities) d /= mass;
  return p;
}

// A pair (P, Q) whose difference keeps one sign inside every cell of the
// partition, hence attains the equality case of the gap inequality.
void sign_constant_pair(Rng& rng, const Partition& part, PiecewiseDensity& p,
                        PiecewiseDensity& q) {
  const int cells = part.cells();
  // breakpoints: partition edges plus one interior split per cell
  std::vector<double> edges;
  for (int i = 0; i < cells; ++i) {
    const double a = part.edges[i], b = part.edges[i + 1];
    edges.push_back(a);
    edges.push_back(a + (0.3 + 0.4 * rng.uniform()) * (b - a));
  }
  edges.push_back(part.edges.back());

  const std::size_t n = edges.size() - 1;
  std::vector<double> base(n), diff(n);
  double base_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    base[i] = 0.5 + rng.uniform();
    base_mass += base[i] * (edges[i + 1] - edges[i]);
  }
  for (double& b : base) b /= base_mass;

  // per-cell signed bump; rescale the negative side so the total integrates
  // to zero, then shrink until q = base + diff stays nonnegative
  double pos = 0.0, neg = 0.0;
  for (int c = 0; c < cells; ++c) {
    const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
    for (int k = 0; k < 2; ++k) {
      const std::size_t i = 2 * c + k;
      diff[i] = sign * rng.uniform();
      const double m = diff[i] * (edges[i + 1] - edges[i]);
      (m >= 0.0 ? pos : neg) += m;
    }
  }
  if (pos == 0.0 || neg == 0.0) {
    diff.assign(n, 0.0);  // degenerate draw, fall back to P == Q
  } else {
    const double ratio = pos / (-neg);
    for (double& d : diff)
      if (d < 0.0) d *= ratio;
    double eps = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      if (base[i] + eps * diff[i] < 0.0) eps = std::min(eps, 0.9 * base[i] / -diff[i]);
    for (double& d : diff) d *= eps;
  }

  p.breakpoints = edges;
  p.densities = base;
  q.breakpoints = edges;
  q.densities.resize(n);
  for (std::size_t i = 0; i < n; ++i) q.densities[i] = base[i] + diff[i];
}

}  // namespace

TheoremSuiteResult run_theorem_suite(int num_cases, std::uint64_t seed,
                                     const std::vector<double>& b_phis) {
  TheoremSuiteResult result;
  Rng rng(seed);
  for (int c = 0; c < num_cases; ++c) {
    const Partition part =
        Partition::uniform(0.0, 1.0, 1 + static_cast<int>(rng.uniform_index(10)));
    const PiecewiseDensity p = random_density(rng);
    const PiecewiseDensity q = random_density(rng);
    for (double b : b_phis) {
      ++result.cases;
      const GapReport report = theorem_check(p, q, part, b);
      result.max_excess =
          std::max(result.max_excess, report.discrete_gap - report.continuous_gap);
      if (report.discrete_gap > report.continuous_gap + 1e-12) ++result.violations;
    }
    // equality case on the same partition
    PiecewiseDensity ep, eq;
    sign_constant_pair(rng, part, ep, eq);
    for (double b : b_phis) {
      ++result.cases;
      const GapReport report = theorem_check(ep, eq, part, b);
      result.max_equality_error =
          std::max(result.max_equality_error,
                   std::abs(report.continuous_gap - report.discrete_gap));
      if (report.discrete_gap > report.continuous_gap + 1e-12) ++result.violations;
      if (std::abs(report.continuous_gap - report.discrete_gap) > 1e-12)
        ++result.violations;
    }
  }
  return result;
}

double gs_metric(const std::vector<double>& accuracies) {
  if (accuracies.empty()) throw std::invalid_argument("gs_metric: empty input");
  double mean = 0.0;
  for (double a : accuracies) mean += a;
  mean /= static_cast<double>(accuracies.size());
  double ss = 0.0;
  for (double a : accuracies) ss += (a - mean) * (a - mean);
  return std::sqrt(ss);
}

}  // namespace ddg
