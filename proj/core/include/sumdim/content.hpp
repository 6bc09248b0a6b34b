#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sumdim/invariant_set.hpp"

namespace sumdim {

struct Point2 {
  double x = 0;
  double y = 0;
};

// Finite 1-D sample: sorted ascending, duplicates removed. `exact` records
// whether the coordinates are exactly representable lattice rationals.
struct PointCloud1D {
  std::vector<double> xs;
  bool exact = true;
};

PointCloud1D make_cloud(std::vector<double> xs, bool exact = true);

struct CoverInterval {
  double center = 0;
  double diameter = 0;
  double cost = 0;  // diameter^gamma
};

struct CoverCertificate {
  std::vector<CoverInterval> intervals;
  double total_cost = 0;
  double scale_floor = 0;  // every diameter >= this

  // Every point covered (closed intervals, tolerance 1e-12) and every
  // diameter >= scale_floor.
  bool covers(std::span<const double> xs) const;
  std::string to_csv() const;  // rows: center,diameter,cost_share
};

// Maximum rho-separated subset size. Exact on a line (greedy scan).
size_t metric_entropy(std::span<const double> sorted_xs, double rho);

struct Entropy2D {
  size_t count = 0;
  bool lower_bound_only = false;  // greedy value; exact search skipped
};

// 2-D metric entropy: exact (branch and bound over the conflict graph) for
// <= 24 points, greedy with lower_bound_only=true otherwise.
Entropy2D metric_entropy_2d(std::span<const Point2> pts, double rho);

// Discrete Hausdorff content of a finite 1-D set at scale rho: exact
// infimum of sum(diam_i^gamma) over covers by intervals of diameter >= rho,
// by prefix DP over the sorted points. Returns the cost and an optimal
// certificate. Comparisons use absolute tolerance 1e-12 and ties prefer
// fewer, longer intervals (the shallower DP split).
struct ContentResult {
  double cost = 0;
  CoverCertificate certificate;
};
ContentResult interval_cover_content(std::span<const double> sorted_xs,
                                     double rho, double gamma);

// (rho,gamma)_c verification report.
struct ConcentrationReport {
  bool separated = true;        // pairwise distances >= rho
  double min_gap = 0;           // smallest pairwise distance observed
  bool pass = false;            // separated and no ball violates the bound
  double worst_ratio = 0;       // max |X cap B| / (c (delta/rho)^gamma)
  double witness_center = 0;
  double witness_diameter = 0;
  size_t witness_count = 0;
  // smallest c that would make every critical ball pass
  double measured_c = 0;
};

// Checks the (rho,gamma)_c ball bound |X cap B| <= c (delta/rho)^gamma over
// the critical family: balls with boundary through two data points at
// diameters >= rho, plus floor-diameter balls.
ConcentrationReport verify_separated_concentration(
    std::span<const double> sorted_xs, double rho, double gamma, double c);
ConcentrationReport verify_separated_concentration_2d(
    std::span<const Point2> pts, double rho, double gamma, double c);

// Least-squares slope of log|X_N| against N log r over N in [n_min, n_max],
// with the per-level ratios log|X_N| / (N log r).
struct DimensionFit {
  double slope = 0;
  double intercept = 0;
  std::vector<int> levels;
  std::vector<double> ratios;
  double max_residual = 0;  // max |log|X_N| - (slope*N*log r + intercept)|
};
DimensionFit dimension_estimate(const InvariantSetSpec& spec, int n_min,
                                int n_max);

}  // namespace sumdim
