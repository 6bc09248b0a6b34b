#include "sumdim/content.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sumdim {

namespace {
constexpr double kTol = 1e-12;
}

PointCloud1D make_cloud(std::vector<double> xs, bool exact) {
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return PointCloud1D{std::move(xs), exact};
}

bool CoverCertificate::covers(std::span<const double> xs) const {
  for (const CoverInterval& iv : intervals)
    if (iv.diameter < scale_floor - kTol) return false;
  for (double x : xs) {
    bool hit = false;
    for (const CoverInterval& iv : intervals) {
      if (std::abs(x - iv.center) <= iv.diameter / 2 + kTol) {
        hit = true;
        break;
      }
    }
    if (!hit) return false;
  }
  return true;
}

std::string CoverCertificate::to_csv() const {
  std::ostringstream os;
  os << "center,diameter,cost_share\n";
  char buf[96];
  for (const CoverInterval& iv : intervals) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", iv.center, iv.diameter, iv.cost);
    os << buf;
  }
  return os.str();
}

size_t metric_entropy(std::span<const double> sorted_xs, double rho) {
  if (sorted_xs.empty()) throw std::invalid_argument("metric_entropy: empty input");
  if (rho <= 0) throw std::invalid_argument("metric_entropy: rho must be > 0");
  const double sep = rho - 1e-12;  // absolute tolerance absorbs lattice ulp noise
  size_t count = 1;
  double last = sorted_xs.front();
  for (double x : sorted_xs) {
    if (x - last >= sep) {
      ++count;
      last = x;
    }
  }
  return count;
}

namespace {

size_t greedy_separated_2d(std::span<const Point2> pts, double rho) {
  std::vector<Point2> kept;
  const double sep = rho - 1e-12;
  for (const Point2& p : pts) {
    bool ok = true;
    for (const Point2& q : kept) {
      if (std::hypot(p.x - q.x, p.y - q.y) < sep) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(p);
  }
  return kept.size();
}

// Max independent set on the conflict graph (edge iff distance < rho),
// branch and bound on <= 64 vertices via bitmasks.
size_t mis_exact(const std::vector<uint64_t>& adj, uint64_t candidates, size_t best) {
  if (candidates == 0) return 0;
  // pick the candidate vertex of max degree within candidates
  int pick = -1;
  int maxdeg = -1;
  uint64_t rest = candidates;
  while (rest) {
    int v = __builtin_ctzll(rest);
    rest &= rest - 1;
    int deg = __builtin_popcountll(adj[v] & candidates);
    if (deg > maxdeg) {
      maxdeg = deg;
      pick = v;
    }
  }
  if (maxdeg == 0) return static_cast<size_t>(__builtin_popcountll(candidates));
  // branch: exclude pick / include pick
  size_t without = mis_exact(adj, candidates & ~(uint64_t(1) << pick), best);
  size_t with_pick = 1 + mis_exact(adj, candidates & ~(adj[pick] | (uint64_t(1) << pick)), best);
  return std::max(without, with_pick);
}

}  // namespace

Entropy2D metric_entropy_2d(std::span<const Point2> pts, double rho) {
  if (pts.empty()) throw std::invalid_argument("metric_entropy_2d: empty input");
  if (rho <= 0) throw std::invalid_argument("metric_entropy_2d: rho must be > 0");
  if (pts.size() > 24) return {greedy_separated_2d(pts, rho), true};
  const size_t n = pts.size();
  const double sep = rho - 1e-12;
  std::vector<uint64_t> adj(n, 0);
  for (size_t a = 0; a < n; ++a)
    for (size_t b = a + 1; b < n; ++b)
      if (std::hypot(pts[a].x - pts[b].x, pts[a].y - pts[b].y) < sep) {
        adj[a] |= uint64_t(1) << b;
        adj[b] |= uint64_t(1) << a;
      }
  uint64_t all = n == 64 ? ~uint64_t(0) : (uint64_t(1) << n) - 1;
  return {mis_exact(adj, all, 0), false};
}

ContentResult interval_cover_content(std::span<const double> sorted_xs,
                                     double rho, double gamma) {
  if (rho <= 0 || gamma <= 0)
    throw std::invalid_argument("interval_cover_content: rho, gamma must be > 0");
  ContentResult res;
  res.certificate.scale_floor = rho;
  const size_t n = sorted_xs.size();
  if (n == 0) return res;

  // C[i] = optimal cost of covering the first i points; an optimal cover of
  // collinear points covers contiguous runs, so the last interval spans
  // points j..i-1 for some j.
  std::vector<double> C(n + 1, 0);
  std::vector<size_t> split(n + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    size_t arg = i;
    for (size_t j = i; j >= 1; --j) {
      const double width = sorted_xs[i - 1] - sorted_xs[j - 1];
      const double diam = std::max(rho, width);
      const double cost = C[j - 1] + std::pow(diam, gamma);
      if (cost < best) {
        best = cost;
        arg = j;
      }
      // no smaller j can win once the span alone exceeds the best cost
      if (std::pow(width, gamma) > best + kTol) break;
    }
    C[i] = best;
    split[i] = arg;
  }
  res.cost = C[n];
  // walk back the certificate
  std::vector<CoverInterval> ivs;
  size_t i = n;
  while (i > 0) {
    size_t j = split[i];
    const double width = sorted_xs[i - 1] - sorted_xs[j - 1];
    const double diam = std::max(rho, width);
    CoverInterval iv;
    iv.center = (sorted_xs[i - 1] + sorted_xs[j - 1]) / 2;
    iv.diameter = diam;
    iv.cost = std::pow(diam, gamma);
    ivs.push_back(iv);
    i = j - 1;
  }
  std::reverse(ivs.begin(), ivs.end());
  res.certificate.intervals = std::move(ivs);
  res.certificate.total_cost = res.cost;
  return res;
}

namespace {

void update_report(ConcentrationReport& rep, double c, double rho, double gamma,
                   size_t count, double diameter, double center) {
  const double allowed = std::pow(diameter / rho, gamma);
  const double ratio = double(count) / (c * allowed);
  if (ratio > rep.worst_ratio) {
    rep.worst_ratio = ratio;
    rep.witness_center = center;
    rep.witness_diameter = diameter;
    rep.witness_count = count;
  }
  const double needed_c = double(count) / allowed;
  rep.measured_c = std::max(rep.measured_c, needed_c);
}

}  // namespace

ConcentrationReport verify_separated_concentration(
    std::span<const double> sorted_xs, double rho, double gamma, double c) {
  if (rho <= 0) throw std::invalid_argument("rho must be > 0");
  ConcentrationReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  const size_t n = sorted_xs.size();
  for (size_t i = 0; i + 1 < n; ++i)
    rep.min_gap = std::min(rep.min_gap, sorted_xs[i + 1] - sorted_xs[i]);
  rep.separated = (n <= 1) || rep.min_gap >= rho - kTol;

  // Critical balls: closed intervals [x_i, x_j] of diameter max(rho, x_j-x_i);
  // for spans below the floor the ball has diameter exactly rho.
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      const double width = sorted_xs[j] - sorted_xs[i];
      const double diam = std::max(rho, width);
      // count points in the closed ball of that diameter centred to contain
      // [x_i, x_j]; for width >= rho that is exactly j-i+1
      size_t count = j - i + 1;
      if (width < rho) {
        // floor ball of diameter rho positioned over [x_i, x_j]
        const double lo = sorted_xs[j] - rho;
        size_t k = i;
        while (k > 0 && sorted_xs[k - 1] >= lo - kTol) --k;
        count = j - k + 1;
      }
      update_report(rep, c, rho, gamma, count, diam, (sorted_xs[i] + sorted_xs[j]) / 2);
    }
  }
  if (n == 1) update_report(rep, c, rho, gamma, 1, rho, sorted_xs[0]);
  rep.pass = rep.separated && rep.worst_ratio <= 1 + kTol;
  return rep;
}

ConcentrationReport verify_separated_concentration_2d(
    std::span<const Point2> pts, double rho, double gamma, double c) {
  if (rho <= 0) throw std::invalid_argument("rho must be > 0");
  ConcentrationReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  const size_t n = pts.size();
  std::vector<Point2> sorted(pts.begin(), pts.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const Point2& l, const Point2& r) { return l.x < r.x; });
  for (size_t a = 0; a + 1 < n; ++a) {
    for (size_t b = a + 1; b < n; ++b) {
      if (sorted[b].x - sorted[a].x >= rep.min_gap) break;
      rep.min_gap = std::min(rep.min_gap, std::hypot(sorted[a].x - sorted[b].x,
                                                     sorted[a].y - sorted[b].y));
    }
  }
  rep.separated = (n <= 1) || rep.min_gap >= rho - kTol;

  auto count_disk = [&](double cx, double cy, double radius) {
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), cx - radius - kTol,
                               [](const Point2& p, double v) { return p.x < v; });
    size_t count = 0;
    for (auto it = lo; it != sorted.end() && it->x <= cx + radius + kTol; ++it)
      if (std::hypot(it->x - cx, it->y - cy) <= radius + kTol) ++count;
    return count;
  };

  // Critical family: for each pair, the disk with the pair antipodal
  // (diameter = pairwise distance, floored at rho). A pair whose best
  // possible ratio n / (diam/rho)^gamma cannot beat the running maximum is
  // skipped; seeding with near neighbours tightens that prune early, and
  // the x-window bound then skips far pairs without a distance check.
  auto consider = [&](size_t a, size_t b) {
    const double d = std::hypot(sorted[a].x - sorted[b].x, sorted[a].y - sorted[b].y);
    const double diam = std::max(rho, d);
    const double allowed = std::pow(diam / rho, gamma);
    if (double(n) <= rep.measured_c * allowed) return;
    const double cx = (sorted[a].x + sorted[b].x) / 2;
    const double cy = (sorted[a].y + sorted[b].y) / 2;
    update_report(rep, c, rho, gamma, count_disk(cx, cy, diam / 2), diam, cx);
  };
  if (n >= 1)
    update_report(rep, c, rho, gamma,
                  count_disk(sorted[0].x, sorted[0].y, rho / 2), rho, sorted[0].x);
  for (size_t a = 0; a < n; ++a)
    for (size_t b = a; b < std::min(n, a + 48); ++b) consider(a, b);
  for (size_t a = 0; a < n; ++a) {
    const double reach =
        rho * std::pow(double(n) / std::max(1.0, rep.measured_c), 1 / gamma);
    for (size_t b = a + 48; b < n; ++b) {
      if (sorted[b].x - sorted[a].x > reach) break;
      consider(a, b);
    }
  }
  rep.pass = rep.separated && rep.worst_ratio <= 1 + kTol;
  return rep;
}

DimensionFit dimension_estimate(const InvariantSetSpec& spec, int n_min, int n_max) {
  if (n_min < 1 || n_max < n_min)
    throw std::invalid_argument("dimension_estimate: bad level range");
  DimensionFit fit;
  const double logr = std::log(double(spec.base()));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int count = n_max - n_min + 1;
  std::vector<double> ys;
  for (int n = n_min; n <= n_max; ++n) {
    mpz_class cnt = count_words(spec, n);
    signed long exp2;
    const double mant = mpz_get_d_2exp(&exp2, cnt.get_mpz_t());
    const double logcnt = std::log(mant) + double(exp2) * std::log(2.0);
    const double x = double(n) * logr;
    fit.levels.push_back(n);
    fit.ratios.push_back(logcnt / x);
    ys.push_back(logcnt);
    sx += x;
    sy += logcnt;
    sxx += x * x;
    sxy += x * logcnt;
  }
  const double denom = count * sxx - sx * sx;
  fit.slope = (count * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / count;
  for (int k = 0; k < count; ++k) {
    const double x = double(fit.levels[k]) * logr;
    fit.max_residual = std::max(fit.max_residual,
                                std::abs(ys[k] - (fit.slope * x + fit.intercept)));
  }
  return fit;
}

}  // namespace sumdim
