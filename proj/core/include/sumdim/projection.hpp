#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sumdim/content.hpp"

namespace sumdim {

struct Interval {
  double a = 0;
  double b = 0;  // half-open [a, b)
  double length() const { return b - a; }
};

// Finite union of disjoint, sorted half-open intervals of a real parameter
// (theta in [0,pi) or a log-slope t).
class DirectionSet {
 public:
  DirectionSet() = default;
  static DirectionSet from_intervals(std::vector<Interval> ivs);  // sorts, merges

  const std::vector<Interval>& intervals() const { return ivs_; }
  size_t interval_count() const { return ivs_.size(); }
  bool empty() const { return ivs_.empty(); }
  double total_measure() const;
  bool contains(double x) const;

  DirectionSet shifted(double delta) const;           // {x + delta}
  DirectionSet intersected(Interval domain) const;
  DirectionSet complement_within(Interval domain) const;
  DirectionSet united(const DirectionSet& other) const;

  // Metric entropy of the union: maximal rho-separated point count.
  size_t entropy(double rho) const;

  std::string to_csv(const std::string& axis) const;  // rows: axis,a,b

 private:
  std::vector<Interval> ivs_;
};

// phi(theta) = log tan theta on (0, pi/2), and its inverse.
double angle_to_slope(double theta);
double slope_to_angle(double t);

// Scalar orthogonal projection onto the line at angle theta.
inline double ortho_project(Point2 p, double cos_t, double sin_t) {
  return p.x * cos_t + p.y * sin_t;
}

// Oblique projection x + e^t y of a planar set, sorted, exact duplicates
// merged with multiplicities.
struct ProjectedCloud {
  std::vector<double> xs;
  std::vector<uint32_t> multiplicity;
};
ProjectedCloud oblique_project(std::span<const Point2> pts, double t);

// {theta in [0,pi) : |pi_theta x| <= rho} as at most two intervals
// (closed-form via arcsin, clipped to all of [0,pi) when rho >= |x|).
DirectionSet transversality_window(Point2 x, double rho);

struct MarstrandBoundReport {
  double gamma = 0;
  double rho = 0;
  double c = 0;
  size_t n = 0;
  double delta = 0;
  double m = 0;
  double bound = 0;     // reference bound with constant 1
  size_t measured = 0;  // N(E, rho)
  double fitted = 0;    // measured / bound
  std::string to_csv_row() const;
  static std::string csv_header();
};

struct ExceptionalResult {
  DirectionSet directions;  // E, grid-measured, inflated by one grid step
  MarstrandBoundReport report;
};

// Exceptional directions of a planar set: theta is exceptional when, for
// some sub-rho anchor offset, the m heaviest rho-bins of the projected set
// hold at least delta*|A| points. Grid step must be <= rho.
ExceptionalResult exceptional_directions(std::span<const Point2> pts,
                                         double rho, double delta, double m,
                                         double grid_step, double gamma,
                                         double c, int threads = 1);

struct SeparatedSubset {
  std::vector<Point2> points;       // chosen representatives
  std::vector<double> projections;  // their projections, sorted, gaps >= sep
  bool shortfall = false;           // fewer than `target` points found
};

// Greedy left-to-right extraction of one representative per c3*rho cluster
// of the oblique projection; optimal on a line.
SeparatedSubset extract_separated_subset(std::span<const Point2> pts, double t,
                                         double rho, double c3, size_t target);

struct GoodWindowOptions {
  double grid_step = 0;     // 0 = default rho/2
  bool clamp_m = false;     // clamp bin count to the regime m <= delta^2 n / 4
  bool verify_inputs = true;
  int threads = 1;
};

struct GoodWindowResult {
  DirectionSet window;      // T, subset of I
  size_t interval_count_U = 0;  // intervals covering I \ T
  double excluded_measure = 0;
  bool rigorous = false;    // excluded measure < eps and nothing clamped
  bool m_clamped = false;
  double sigma = 0;
  double delta = 0;
  double m_used = 0;
  ConcentrationReport q_check, qtilde_check;
  ExceptionalResult exc_q, exc_qtilde;
};

// The good-direction window T of a pair (Q, Qtilde): exceptional sets of
// both grids at (delta = rho^sigma, m = 2 c3 rho^-gamma2), mapped through
// phi into the t-interval I and subtracted. Requires the gamma ladder
// inequality 2(gamma5-gamma3) < gamma4-gamma2.
GoodWindowResult good_direction_window(std::span<const Point2> q_pts,
                                       std::span<const Point2> qtilde_pts,
                                       Interval I, double eps, double gamma2,
                                       double gamma3, double gamma4,
                                       double gamma5, double c1, double c2,
                                       double c3, double rho,
                                       const GoodWindowOptions& opt = {});

}  // namespace sumdim
