#include "sumdim/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "sumdim/parallel.hpp"

namespace sumdim {

namespace {
constexpr double kTol = 1e-12;
constexpr double kPi = std::numbers::pi;
}  // namespace

DirectionSet DirectionSet::from_intervals(std::vector<Interval> ivs) {
  std::erase_if(ivs, [](const Interval& iv) { return !(iv.b > iv.a); });
  std::sort(ivs.begin(), ivs.end(),
            [](const Interval& l, const Interval& r) { return l.a < r.a; });
  DirectionSet out;
  for (const Interval& iv : ivs) {
    if (!out.ivs_.empty() && iv.a <= out.ivs_.back().b) {
      out.ivs_.back().b = std::max(out.ivs_.back().b, iv.b);
    } else {
      out.ivs_.push_back(iv);
    }
  }
  return out;
}

double DirectionSet::total_measure() const {
  double s = 0;
  for (const Interval& iv : ivs_) s += iv.length();
  return s;
}

bool DirectionSet::contains(double x) const {
  for (const Interval& iv : ivs_)
    if (x >= iv.a && x < iv.b) return true;
  return false;
}

DirectionSet DirectionSet::shifted(double delta) const {
  std::vector<Interval> ivs = ivs_;
  for (Interval& iv : ivs) {
    iv.a += delta;
    iv.b += delta;
  }
  return from_intervals(std::move(ivs));
}

DirectionSet DirectionSet::intersected(Interval domain) const {
  std::vector<Interval> out;
  for (const Interval& iv : ivs_) {
    double a = std::max(iv.a, domain.a);
    double b = std::min(iv.b, domain.b);
    if (b > a) out.push_back({a, b});
  }
  return from_intervals(std::move(out));
}

DirectionSet DirectionSet::complement_within(Interval domain) const {
  std::vector<Interval> out;
  double cursor = domain.a;
  for (const Interval& iv : ivs_) {
    if (iv.b <= domain.a || iv.a >= domain.b) continue;
    double a = std::max(iv.a, domain.a);
    double b = std::min(iv.b, domain.b);
    if (a > cursor) out.push_back({cursor, a});
    cursor = std::max(cursor, b);
  }
  if (cursor < domain.b) out.push_back({cursor, domain.b});
  return from_intervals(std::move(out));
}

DirectionSet DirectionSet::united(const DirectionSet& other) const {
  std::vector<Interval> all = ivs_;
  all.insert(all.end(), other.ivs_.begin(), other.ivs_.end());
  return from_intervals(std::move(all));
}

size_t DirectionSet::entropy(double rho) const {
  if (rho <= 0) throw std::invalid_argument("entropy: rho must be > 0");
  size_t count = 0;
  double next_allowed = -std::numeric_limits<double>::infinity();
  for (const Interval& iv : ivs_) {
    double x = std::max(iv.a, next_allowed);
    while (x < iv.b) {
      ++count;
      next_allowed = x + rho;
      x = next_allowed;
    }
  }
  return count;
}

std::string DirectionSet::to_csv(const std::string& axis) const {
  std::ostringstream os;
  os << "axis,a,b\n";
  char buf[96];
  for (const Interval& iv : ivs_) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g\n", axis.c_str(), iv.a, iv.b);
    os << buf;
  }
  return os.str();
}

double angle_to_slope(double theta) {
  if (!(theta > 0 && theta < kPi / 2))
    throw std::domain_error("angle_to_slope: theta must lie in (0, pi/2)");
  return std::log(std::tan(theta));
}

double slope_to_angle(double t) { return std::atan(std::exp(t)); }

ProjectedCloud oblique_project(std::span<const Point2> pts, double t) {
  const double slope = std::exp(t);
  std::vector<double> vals;
  vals.reserve(pts.size());
  for (const Point2& p : pts) vals.push_back(p.x + slope * p.y);
  std::sort(vals.begin(), vals.end());
  ProjectedCloud out;
  for (double v : vals) {
    if (!out.xs.empty() && v == out.xs.back()) {
      ++out.multiplicity.back();
    } else {
      out.xs.push_back(v);
      out.multiplicity.push_back(1);
    }
  }
  return out;
}

DirectionSet transversality_window(Point2 x, double rho) {
  const double norm = std::hypot(x.x, x.y);
  if (norm == 0) throw std::invalid_argument("transversality_window: x must be nonzero");
  if (rho <= 0) throw std::invalid_argument("transversality_window: rho must be > 0");
  if (rho >= norm) return DirectionSet::from_intervals({{0, kPi}});
  // |pi_theta x| = |x| |cos(theta - psi)| with x = |x| (cos psi, sin psi)
  double psi = std::atan2(x.y, x.x);
  if (psi < 0) psi += kPi;  // direction of x modulo pi
  const double w = std::asin(rho / norm);
  double lo = psi + kPi / 2 - w;
  double hi = psi + kPi / 2 + w;
  // reduce [lo, hi] mod pi into [0, pi)
  while (lo >= kPi) {
    lo -= kPi;
    hi -= kPi;
  }
  std::vector<Interval> ivs;
  if (hi <= kPi) {
    ivs.push_back({lo, hi});
  } else {
    ivs.push_back({lo, kPi});
    ivs.push_back({0, hi - kPi});
  }
  return DirectionSet::from_intervals(std::move(ivs));
}

std::string MarstrandBoundReport::csv_header() {
  return "gamma,rho,c,n,delta,m,bound,measured,fitted";
}

std::string MarstrandBoundReport::to_csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%zu,%.12g,%.12g,%.12g,%zu,%.12g",
                gamma, rho, c, n, delta, m, bound, measured, fitted);
  return buf;
}

namespace {

// Decides membership of one angle in E by the heavy-cluster rule.
bool heavy_cluster_member(std::vector<double>& proj, double rho, double need,
                          size_t m_bins) {
  std::sort(proj.begin(), proj.end());
  const double base = proj.front();
  static const double offsets[4] = {0.0, 0.25, 0.5, 0.75};
  for (double off : offsets) {
    const double anchor = base - off * rho;
    // bin counts in one pass over the sorted projections
    std::vector<uint32_t> counts;
    int64_t cur_bin = -1;
    for (double v : proj) {
      int64_t b = static_cast<int64_t>(std::floor((v - anchor) / rho));
      if (b != cur_bin) {
        counts.push_back(0);
        cur_bin = b;
      }
      ++counts.back();
    }
    if (counts.size() > m_bins)
      std::nth_element(counts.begin(), counts.begin() + m_bins - 1, counts.end(),
                       std::greater<uint32_t>());
    double heavy = 0;
    const size_t take = std::min(m_bins, counts.size());
    for (size_t k = 0; k < take; ++k) heavy += counts[k];
    if (heavy >= need) return true;
  }
  return false;
}

}  // namespace

ExceptionalResult exceptional_directions(std::span<const Point2> pts, double rho,
                                         double delta, double m,
                                         double grid_step, double gamma,
                                         double c, int threads) {
  if (pts.empty()) throw std::invalid_argument("exceptional_directions: empty input");
  if (!(delta > 0 && delta <= 1)) throw std::invalid_argument("delta must be in (0,1]");
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  if (grid_step > rho)
    throw std::invalid_argument("exceptional_directions: grid step > rho undersamples");
  const size_t n = pts.size();
  const size_t grid_n = static_cast<size_t>(std::ceil(kPi / grid_step));
  const size_t m_bins = static_cast<size_t>(std::ceil(m));
  const double need = delta * double(n);

  std::vector<uint8_t> member(grid_n, 0);
  parallel_for(grid_n, threads, [&](size_t k) {
    const double theta = double(k) * grid_step;
    const double ct = std::cos(theta), st = std::sin(theta);
    std::vector<double> proj(n);
    for (size_t a = 0; a < n; ++a) proj[a] = ortho_project(pts[a], ct, st);
    member[k] = heavy_cluster_member(proj, rho, need, m_bins) ? 1 : 0;
  });

  // merge member runs into intervals, inflating one grid step on each side
  std::vector<Interval> ivs;
  size_t k = 0;
  while (k < grid_n) {
    if (!member[k]) {
      ++k;
      continue;
    }
    size_t start = k;
    while (k < grid_n && member[k]) ++k;
    double a = (start == 0 ? 0.0 : (double(start) - 1) * grid_step);
    double b = std::min(kPi, (double(k) + 1) * grid_step);
    ivs.push_back({a, b});
  }
  ExceptionalResult res;
  res.directions = DirectionSet::from_intervals(std::move(ivs));

  MarstrandBoundReport rep;
  rep.gamma = gamma;
  rep.rho = rho;
  rep.c = c;
  rep.n = n;
  rep.delta = delta;
  rep.m = m;
  const double gbar = std::min(gamma, 1.0);
  const double size_term = (gamma != 1.0)
                               ? std::pow(double(n), 1.0 - gbar / gamma)
                               : std::log(double(n));
  rep.bound = (m / (delta * delta * double(n))) * size_term / rho;
  rep.measured = res.directions.entropy(rho);
  rep.fitted = rep.bound > 0 ? double(rep.measured) / rep.bound : 0.0;
  res.report = rep;
  return res;
}

SeparatedSubset extract_separated_subset(std::span<const Point2> pts, double t,
                                         double rho, double c3, size_t target) {
  if (pts.empty()) throw std::invalid_argument("extract_separated_subset: empty input");
  const double sep = c3 * rho;
  const double slope = std::exp(t);
  std::vector<std::pair<double, size_t>> proj(pts.size());
  for (size_t k = 0; k < pts.size(); ++k)
    proj[k] = {pts[k].x + slope * pts[k].y, k};
  std::sort(proj.begin(), proj.end());
  SeparatedSubset out;
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& [v, k] : proj) {
    if (out.points.empty() || v - last >= sep) {
      out.points.push_back(pts[k]);
      out.projections.push_back(v);
      last = v;
    }
  }
  out.shortfall = out.points.size() < target;
  return out;
}

GoodWindowResult good_direction_window(std::span<const Point2> q_pts,
                                       std::span<const Point2> qtilde_pts,
                                       Interval I, double eps, double gamma2,
                                       double gamma3, double gamma4,
                                       double gamma5, double c1, double c2,
                                       double c3, double rho,
                                       const GoodWindowOptions& opt) {
  if (!(2 * (gamma5 - gamma3) < gamma4 - gamma2))
    throw std::invalid_argument("good_direction_window: gamma ladder invalid");
  if (!(gamma2 < 1))
    throw std::invalid_argument("good_direction_window: gamma2 must be < 1");

  GoodWindowResult res;
  res.sigma = ((gamma5 - gamma3) + (gamma4 - gamma2) / 2) / 2;
  res.delta = std::pow(rho, res.sigma);
  double m = 2 * c3 * std::pow(rho, -gamma2);
  if (opt.clamp_m) {
    const double cap_q = res.delta * res.delta * double(q_pts.size()) / 4;
    const double cap_qt = res.delta * res.delta * double(qtilde_pts.size()) / 4;
    const double cap = std::max(1.0, std::floor(std::min(cap_q, cap_qt)));
    if (m > cap) {
      m = cap;
      res.m_clamped = true;
    }
  }
  res.m_used = m;

  if (opt.verify_inputs) {
    std::vector<Point2> q(q_pts.begin(), q_pts.end());
    std::vector<Point2> qt(qtilde_pts.begin(), qtilde_pts.end());
    res.q_check = verify_separated_concentration_2d(q, c1 * rho, gamma5, c2);
    res.qtilde_check = verify_separated_concentration_2d(qt, c1 * rho, gamma5, c2);
  }

  const double grid = opt.grid_step > 0 ? opt.grid_step : rho / 2;
  res.exc_q = exceptional_directions(q_pts, rho, res.delta, m, grid, gamma5, c2,
                                     opt.threads);
  res.exc_qtilde = exceptional_directions(qtilde_pts, rho, res.delta, m, grid,
                                          gamma5, c2, opt.threads);

  // Map both exceptional sets through phi restricted to (0, pi/2) and
  // subtract from I.
  std::vector<Interval> bad_t;
  auto map_through_phi = [&bad_t, &I](const DirectionSet& E) {
    for (const Interval& iv : E.intervals()) {
      double a = std::max(iv.a, 0.0);
      double b = std::min(iv.b, kPi / 2);
      if (b <= a) continue;
      // phi is increasing; clip the image to I
      double ta = (a <= 0) ? I.a : std::max(I.a, std::log(std::tan(a)));
      double tb = (b >= kPi / 2) ? I.b : std::min(I.b, std::log(std::tan(b)));
      if (tb > ta) bad_t.push_back({ta, tb});
    }
  };
  map_through_phi(res.exc_q.directions);
  map_through_phi(res.exc_qtilde.directions);
  DirectionSet bad = DirectionSet::from_intervals(std::move(bad_t));
  res.window = bad.complement_within(I);
  res.interval_count_U = bad.interval_count();
  res.excluded_measure = bad.total_measure();
  res.rigorous = res.excluded_measure < eps && !res.m_clamped;
  return res;
}

}  // namespace sumdim
