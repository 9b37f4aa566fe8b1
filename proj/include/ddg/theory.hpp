#pragma once

#include <cstdint>
#include <vector>

namespace ddg {

// Piecewise-constant density on [breakpoints.front(), breakpoints.back()].
// densities[i] applies on [breakpoints[i], breakpoints[i+1]). All integrals
// against these densities are exact.
struct PiecewiseDensity {
  std::vector<double> breakpoints;  // strictly increasing
  std::vector<double> densities;    // size breakpoints.size()-1, nonnegative

  double lo() const { return breakpoints.front(); }
  double hi() const { return breakpoints.back(); }
  double value_at(double x) const;
  double integral(double a, double b) const;  // of the density over [a,b]
  void validate() const;  // shape, nonnegativity, unit mass within 1e-12
};

// Interval partition of [lo, hi]; edges strictly increasing, covering the
// whole range.
struct Partition {
  std::vector<double> edges;

  static Partition uniform(double lo, double hi, int cells);
  int cells() const { return static_cast<int>(edges.size()) - 1; }
  void validate() const;
};

// One atom per partition cell, located at the cell midpoint, carrying the
// cell's probability mass.
struct DiscreteDistribution {
  std::vector<double> atoms;   // midpoints
  std::vector<double> masses;  // nonnegative, sum 1
};

struct IntervalContribution {
  double lo = 0.0;
  double hi = 0.0;
  double continuous = 0.0;  // B * integral |P-Q| over the cell
  double discrete = 0.0;    // B * |mass_P - mass_Q|
  bool equality = false;    // P-Q keeps one sign on the cell
};

struct GapReport {
  double continuous_gap = 0.0;
  double discrete_gap = 0.0;
  double b_phi = 1.0;
  std::vector<IntervalContribution> intervals;
};

// B * integral |P(x) - Q(x)| dx, exact via merged breakpoints.
double continuous_gap(const PiecewiseDensity& p, const PiecewiseDensity& q, double b_phi);

DiscreteDistribution discretize(const PiecewiseDensity& p, const Partition& partition);

// B * sum over atoms |mass_P - mass_Q|; both sides must share the partition.
double discrete_gap(const DiscreteDistribution& pd, const DiscreteDistribution& qd,
                    double b_phi);

// Computes both gaps on one partition and asserts discrete <= continuous.
// A violation throws: it can only mean an implementation bug.
GapReport theorem_check(const PiecewiseDensity& p, const PiecewiseDensity& q,
                        const Partition& partition, double b_phi);

// Normalized-histogram L1 distances of two 1-D sample sets under a coarse
// partition and a fine partition refining it. Coarse <= fine always.
struct RefinementResult {
  double l1_coarse = 0.0;
  double l1_fine = 0.0;
};

RefinementResult empirical_refinement_check(const std::vector<double>& samples_a,
                                            const std::vector<double>& samples_b,
                                            const Partition& coarse,
                                            const Partition& fine);

// L1 distance between normalized histograms given per-bin counts.
double histogram_l1(const std::vector<double>& counts_a,
                    const std::vector<double>& counts_b);

// sqrt(sum (a_i - mean)^2) over per-domain accuracies.
double gs_metric(const std::vector<double>& accuracies);

// Randomized gap-inequality suite: random piecewise-constant density pairs
// and random uniform partitions, plus constructed sign-constant pairs that
// must attain equality.
struct TheoremSuiteResult {
  int cases = 0;
  int violations = 0;
  double max_excess = 0.0;          // max(discrete - continuous) over all cases
  double max_equality_error = 0.0;  // |W - W_d| over the constructed equality cases
};

TheoremSuiteResult run_theorem_suite(int num_cases, std::uint64_t seed,
                                     const std::vector<double>& b_phis);

}  // namespace ddg
