#include "sumdim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

#include "sumdim/parallel.hpp"

namespace sumdim {

namespace {

constexpr double kTol = 1e-12;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void GammaLadder::validate() const {
  auto fail = [](const std::string& group) {
    throw std::invalid_argument("gamma ladder invalid: group " + group);
  };
  const double g2_floor = gamma1 / (1 - eps / 2);
  if (!(gamma1 > 0 && g2_floor < gamma2 - kTol && gamma2 < gamma3 - kTol &&
        gamma3 < gamma4 - kTol && gamma4 < dim_sum - kTol && dim_sum < gamma5 - kTol))
    fail("(I)");
  if (!(gamma5 < gamma4 + eps * (gamma4 - gamma3) / 6 - kTol)) fail("(II)");
  if (!(gamma2 < 1 - kTol)) fail("(III)");
  if (!(2 * (gamma5 - gamma3) < gamma4 - gamma2 - kTol)) fail("(IV)");
}

GammaLadder select_gammas(double dim_sum, double gamma_target) {
  const double gbar = std::min(1.0, dim_sum);
  if (!(gamma_target > 0 && gamma_target < gbar - kTol))
    throw std::invalid_argument("select_gammas: target exceeds theorem range");
  GammaLadder L;
  L.dim_sum = dim_sum;
  L.gamma1 = gamma_target;
  L.eps = gbar - gamma_target;
  const double g2_0 = L.gamma1 / (1 - L.eps / 2);
  auto build = [&](double mu) {
    GammaLadder l = L;
    l.gamma2 = g2_0 + mu;
    l.gamma4 = dim_sum - mu;
    l.gamma5 = dim_sum + mu;
    l.gamma3 = l.gamma2 / 3 + 2 * l.gamma4 / 3;
    return l;
  };
  auto feasible = [&](double mu) {
    try {
      build(mu).validate();
      return true;
    } catch (const std::invalid_argument&) {
      return false;
    }
  };
  const double mu_cap = (dim_sum - g2_0) / 2;
  if (!(mu_cap > 0)) throw std::invalid_argument("select_gammas: degenerate ladder");
  double seed = mu_cap;
  int guard = 0;
  while (!feasible(seed)) {
    seed /= 2;
    if (++guard > 200) throw std::invalid_argument("select_gammas: no feasible ladder");
  }
  double lo = seed, hi = mu_cap;
  if (feasible(hi)) {
    lo = hi;
  } else {
    for (int it = 0; it < 80; ++it) {
      double mid = (lo + hi) / 2;
      (feasible(mid) ? lo : hi) = mid;
    }
  }
  GammaLadder out = build(lo / 2);
  out.validate();
  return out;
}

namespace {

// log r / log s is rational iff r^j = s^k for small j, k (the exponents of
// a common base; bounded by the bit width of int bases).
bool multiplicatively_dependent(int r, int s) {
  std::vector<mpz_class> rp(65), sp(65);
  for (int j = 1; j <= 64; ++j) {
    rp[j] = integer_power(r, j);
    sp[j] = integer_power(s, j);
  }
  for (int j = 1; j <= 64; ++j)
    for (int k = 1; k <= 64; ++k)
      if (rp[j] == sp[k]) return true;
  return false;
}

}  // namespace

RotationBlock make_block(int r, int s, int64_t m, Interval I) {
  if (r < 2 || s < 2 || m < 1) throw std::invalid_argument("make_block: bad r, s, m");
  if (multiplicatively_dependent(r, s))
    throw std::invalid_argument("make_block: bases must be multiplicatively independent");
  RotationBlock b;
  b.r = r;
  b.s = s;
  b.m = m;
  b.m_prime = n_prime(m, r, s);
  b.beta = std::log(double(s));
  b.alpha = double(m) * std::log(double(r)) - double(b.m_prime) * b.beta;
  b.rho = std::pow(double(r), -double(m));
  b.rbase = std::pow(double(r), double(m));
  b.t_domain = I;
  b.t_domain_beta = {I.a, I.b + b.beta};
  b.lipschitz_P = 1 + std::exp(b.t_domain_beta.b);
  b.c1 = 1.0 / s;
  b.c3 = 4 * b.lipschitz_P / s + 1;
  return b;
}

namespace {

std::vector<Point2> grid_coords(const PlanarLatticeSet& g) {
  std::vector<Point2> pts;
  pts.reserve(g.size());
  for (auto [x, y] : g.coords()) pts.push_back({x, y});
  return pts;
}

}  // namespace

RotationBlock select_block(const GammaLadder& ladder, const InvariantSetSpec& X,
                           const InvariantSetSpec& Y, Interval I, Mode mode,
                           int64_t m_cap, uint64_t mem_cap) {
  std::vector<std::string> failures;
  for (int64_t m = 1; m <= m_cap; ++m) {
    RotationBlock b = make_block(X.base(), Y.base(), m, I);
    const double logr2 = std::log(2.0) / std::log(b.rbase);
    const double B = ladder.gamma4 - ladder.gamma3 - logr2;
    b.checks.push_back({"dichotomy_B_positive", B > kTol, "B=" + fmt(B)});
    const bool marstrand_ok =
        2 * (ladder.gamma5 - ladder.gamma3) < ladder.gamma4 - ladder.gamma2 - kTol;
    b.checks.push_back({"marstrand_ladder", marstrand_ok, ""});
    const double thin_lhs = B;
    const double thin_rhs = (1 - ladder.eps / 6) * (ladder.gamma5 - ladder.gamma3);
    b.checks.push_back({"thinning_base", thin_lhs > thin_rhs + kTol,
                        fmt(thin_lhs) + " vs " + fmt(thin_rhs)});

    // cardinality sandwich from exact transfer-matrix counts (no grids yet)
    const mpz_class qlo = count_words(X, m) * count_words(Y, b.m_prime);
    const mpz_class qhi = count_words(X, m) * count_words(Y, b.m_prime + 1);
    const double lo_bound = std::pow(b.rbase, ladder.gamma4);
    const double hi_bound = std::pow(b.rbase, ladder.gamma5);
    const bool cardinality_ok =
        qlo.get_d() >= lo_bound && qlo.get_d() <= hi_bound &&
        qhi.get_d() >= lo_bound && qhi.get_d() <= hi_bound;
    b.checks.push_back({"cardinality_sandwich", cardinality_ok,
                        "|Q|=" + qlo.get_str() + " |Qt|=" + qhi.get_str() +
                            " in [" + fmt(lo_bound) + "," + fmt(hi_bound) + "]"});

    bool ok = B > kTol && marstrand_ok;
    if (mode == Mode::kRigorous)
      ok = ok && thin_lhs > thin_rhs + kTol && cardinality_ok;

    // the grids are enumerated, and c2 measured, only for an accepted block
    if (ok) {
      try {
        LatticeSet Xm = enumerate_approximation(X, int(m));
        LatticeSet Ylo = enumerate_approximation(Y, int(b.m_prime));
        LatticeSet Yhi = enumerate_approximation(Y, int(b.m_prime) + 1);
        PlanarLatticeSet Q = product_grid(Xm, Ylo, mem_cap);
        PlanarLatticeSet Qt = product_grid(Xm, Yhi, mem_cap);
        auto qc = verify_separated_concentration_2d(grid_coords(Q), b.c1 * b.rho,
                                                    ladder.gamma5, 1.0);
        auto qtc = verify_separated_concentration_2d(grid_coords(Qt), b.c1 * b.rho,
                                                     ladder.gamma5, 1.0);
        b.c2 = std::max(qc.measured_c, qtc.measured_c);
        b.checks.push_back({"separated", qc.separated && qtc.separated,
                            "min gaps " + fmt(qc.min_gap) + "," + fmt(qtc.min_gap)});
        b.checks.push_back({"concentration_measured", true, "c2=" + fmt(b.c2)});
        if (qc.separated && qtc.separated) return b;
      } catch (const std::exception& e) {
        b.checks.push_back({"grid_enumeration", false, e.what()});
      }
    }

    std::string why = "m=" + std::to_string(m) + ":";
    for (const BlockCheck& c : b.checks)
      if (!c.pass) why += " " + c.name;
    failures.push_back(why);
  }
  std::string msg = "select_block: no m <= " + std::to_string(m_cap) + " satisfies all checks;";
  for (const std::string& f : failures) msg += " [" + f + "]";
  throw std::runtime_error(msg);
}

namespace {

// Exact (nm)' for n = 0..N by incremental multiplication.
std::vector<int64_t> nprime_sequence(int r, int s, int64_t m, int64_t N) {
  std::vector<int64_t> out(N + 1, 0);
  mpz_class rn = 1;
  mpz_class sk = 1;
  const mpz_class rm = integer_power(r, m);
  int64_t k = 0;
  for (int64_t n = 1; n <= N; ++n) {
    rn *= rm;
    mpz_class next = sk * s;
    while (next <= rn) {
      sk = next;
      ++k;
      next = sk * s;
    }
    out[n] = k;
  }
  return out;
}

}  // namespace

OrbitReport rotation_orbit(const RotationBlock& block, int64_t N) {
  if (N < 1) throw std::invalid_argument("rotation_orbit: N must be >= 1");
  OrbitReport rep;
  rep.orbit.resize(N);
  rep.nm_prime = nprime_sequence(block.r, block.s, block.m, N);
  const double logr = std::log(double(block.r));
  const double logs = std::log(double(block.s));
  double x = 0;
  for (int64_t n = 0; n < N; ++n) {
    rep.orbit[n] = x;
    const double closed =
        double(n) * double(block.m) * logr - double(rep.nm_prime[n]) * logs;
    const double residual = std::abs(x - closed);
    rep.max_identity_residual = std::max(rep.max_identity_residual, residual);
    if (residual > 1e-9) {
      // float accumulation; recover from the closed form
      x = closed;
      rep.orbit[n] = x;
    }
    x += block.alpha;
    if (x >= block.beta) x -= block.beta;
  }
  for (int64_t n = 0; n + 1 < N; ++n) {
    const int64_t inc = rep.nm_prime[n + 1] - rep.nm_prime[n];
    const bool wrap_predicted = rep.orbit[n] + block.alpha >= block.beta;
    const int64_t inc_predicted = block.m_prime + (wrap_predicted ? 1 : 0);
    if (inc != inc_predicted) ++rep.branch_mismatches;
  }
  return rep;
}

double discrepancy(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("discrepancy: empty sequence");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const size_t N = v.size();
  // D+ = max over i <= j of (j-i+1)/N - (x_j - x_i): closed spans overfull
  double dplus = 0;
  double best_lo = -std::numeric_limits<double>::infinity();  // max(x_i - i/N)
  for (size_t j = 1; j <= N; ++j) {
    best_lo = std::max(best_lo, v[j - 1] - double(j) / N);
    dplus = std::max(dplus, double(j + 1) / N - v[j - 1] + best_lo);
  }
  // D- = max over open spans underfull, with sentinels 0 and 1
  double dminus = 0;
  double best0 = 0;  // max(i/N - x_i), including the i = 0 sentinel
  for (size_t j = 1; j <= N; ++j) {
    dminus = std::max(dminus, v[j - 1] - double(j - 1) / N + best0);
    best0 = std::max(best0, double(j) / N - v[j - 1]);
  }
  dminus = std::max(dminus, 1.0 - double(N) / N + best0);  // j = N+1 sentinel at 1
  return std::max(dplus, dminus);
}

VisitThresholdResult visit_threshold(const RotationBlock& block, int64_t U,
                                     double eps, int64_t horizon) {
  if (U < 1 || eps <= 0 || horizon < 1)
    throw std::invalid_argument("visit_threshold: bad arguments");
  OrbitReport orbit = rotation_orbit(block, horizon);
  std::vector<double> sorted;
  sorted.reserve(horizon);
  VisitThresholdResult res;
  int64_t last_bad = 0;
  for (int64_t n = 1; n <= horizon; ++n) {
    const double x = orbit.orbit[n - 1] / block.beta;
    sorted.insert(std::upper_bound(sorted.begin(), sorted.end(), x), x);
    const double dn = discrepancy(sorted);
    if (n == horizon) res.final_DN = dn;
    if (double(U) * dn > eps) last_bad = n;
  }
  res.N0 = last_bad + 1;
  res.empirical = last_bad >= horizon;
  return res;
}

namespace {

// Admissible extensions of a given automaton state: (index value, end state)
// for all words of a fixed length, in increasing index order.
struct ExtensionTable {
  std::vector<std::vector<std::pair<uint64_t, int>>> by_state;
};

ExtensionTable extensions(const InvariantSetSpec& spec, int len) {
  ExtensionTable t;
  t.by_state.resize(spec.state_count());
  for (int q0 = 0; q0 < spec.state_count(); ++q0) {
    // DFS in ascending digit order yields ascending indices
    struct Frame {
      int state;
      uint64_t value;
      int digit;
    };
    std::vector<Frame> stack{{q0, 0, 0}};
    if (len == 0) {
      t.by_state[q0].emplace_back(0, q0);
      continue;
    }
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.digit >= spec.base()) {
        stack.pop_back();
        continue;
      }
      int d = f.digit++;
      int nxt = spec.step(f.state, d);
      if (nxt < 0) continue;
      uint64_t val = f.value * spec.base() + d;
      if (static_cast<int>(stack.size()) == len)
        t.by_state[q0].emplace_back(val, nxt);
      else
        stack.push_back({nxt, val, 0});
    }
  }
  return t;
}

// Max fractional value sum(d_k base^-k) over admissible words of length
// `len` from each state; returns the max over states.
double max_offset_fraction(const InvariantSetSpec& spec, int64_t len) {
  const int S = spec.state_count();
  std::vector<double> cur(S, 0.0);
  for (int64_t step_i = 0; step_i < len; ++step_i) {
    std::vector<double> nxt(S, -1.0);
    for (int q = 0; q < S; ++q) {
      for (int d = 0; d < spec.base(); ++d) {
        int t = spec.step(q, d);
        if (t < 0 || cur[t] < 0) continue;
        nxt[q] = std::max(nxt[q], (double(d) + cur[t]) / spec.base());
      }
    }
    cur.swap(nxt);
  }
  double best = 0;
  for (double v : cur) best = std::max(best, v);
  return best;
}

// Per-state transition counts over words of length `len`, as doubles.
std::vector<std::vector<double>> transition_counts(const InvariantSetSpec& spec,
                                                   int64_t len) {
  const int S = spec.state_count();
  std::vector<std::vector<double>> M(S, std::vector<double>(S, 0.0));
  for (int q = 0; q < S; ++q) M[q][q] = 1.0;
  for (int64_t step_i = 0; step_i < len; ++step_i) {
    std::vector<std::vector<double>> R(S, std::vector<double>(S, 0.0));
    for (int q = 0; q < S; ++q)
      for (int mid = 0; mid < S; ++mid) {
        if (M[q][mid] == 0) continue;
        for (int d = 0; d < spec.base(); ++d) {
          int t = spec.step(mid, d);
          if (t >= 0) R[q][t] += M[q][mid];
        }
      }
    M.swap(R);
  }
  return M;
}

}  // namespace

std::pair<double, double> ProductTree::node_coords(int level, uint32_t k) const {
  const IndexPair& p = tree.payload(level, k);
  const double sx = std::pow(double(r), -double(level) * double(m));
  const double sy = std::pow(double(s), -double(nm_primes[level]));
  return {double(p.i) * sx, double(p.j) * sy};
}

double product_tree_symbolic_content(const InvariantSetSpec& X,
                                     const InvariantSetSpec& Y,
                                     const RotationBlock& block, int N,
                                     double gamma) {
  const std::vector<int64_t> np = nprime_sequence(X.base(), Y.base(), block.m, N);
  const int SX = X.state_count();
  const int SY = Y.state_count();
  auto TX = transition_counts(X, block.m);
  std::map<int64_t, std::vector<std::vector<double>>> TY;
  // val[u][v] at the current level, from the leaves up
  std::vector<std::vector<double>> val(SX, std::vector<double>(SY));
  const double leaf_cost = std::pow(block.rbase, -double(N) * gamma);
  for (auto& row : val) std::fill(row.begin(), row.end(), leaf_cost);
  for (int n = N - 1; n >= 0; --n) {
    const int64_t delta = np[n + 1] - np[n];
    if (!TY.count(delta)) TY[delta] = transition_counts(Y, delta);
    const auto& ty = TY[delta];
    const double node_cost = std::pow(block.rbase, -double(n) * gamma);
    std::vector<std::vector<double>> up(SX, std::vector<double>(SY, 0.0));
    for (int u = 0; u < SX; ++u)
      for (int v = 0; v < SY; ++v) {
        double sum = 0;
        for (int u2 = 0; u2 < SX; ++u2) {
          if (TX[u][u2] == 0) continue;
          double inner = 0;
          for (int v2 = 0; v2 < SY; ++v2)
            if (ty[v][v2] != 0) inner += ty[v][v2] * val[u2][v2];
          sum += TX[u][u2] * inner;
        }
        up[u][v] = std::min(node_cost, sum);
      }
    val.swap(up);
  }
  return val[X.initial_state()][Y.initial_state()];
}

ProductTree build_product_tree(const InvariantSetSpec& X, const InvariantSetSpec& Y,
                               const RotationBlock& block, int N,
                               const GammaLadder& ladder, uint64_t mem_cap) {
  if (N < 1) throw std::invalid_argument("build_product_tree: N must be >= 1");
  ProductTree pt;
  pt.r = X.base();
  pt.s = Y.base();
  pt.m = block.m;
  pt.N = N;
  pt.rho = block.rho;
  pt.rbase = block.rbase;
  pt.nm_primes = nprime_sequence(pt.r, pt.s, pt.m, N);
  if (double(N) * double(pt.m) * std::log2(double(pt.r)) > 62.0 ||
      double(pt.nm_primes[N]) * std::log2(double(pt.s)) > 62.0)
    throw std::overflow_error("build_product_tree: leaf indices exceed 63 bits");

  // x extensions are over m digits at every level; y extensions vary with
  // the level's n' increment
  ExtensionTable ext_x = extensions(X, int(pt.m));
  std::map<int64_t, ExtensionTable> ext_y;
  auto cnt_x = transition_counts(X, pt.m);
  std::map<int64_t, std::vector<std::vector<double>>> cnt_y;

  std::vector<std::vector<uint32_t>> parents(N + 1);
  std::vector<std::vector<IndexPair>> payload(N + 1);
  payload[0].push_back({0, 0});
  std::vector<std::pair<int, int>> states{{X.initial_state(), Y.initial_state()}};

  // reference lattice patterns for the containment verification
  LatticeSet Xm = enumerate_approximation(X, int(pt.m));
  std::map<int64_t, LatticeSet> Ypat;

  pt.containment_verified = true;
  for (int n = 0; n < N; ++n) {
    const int64_t delta = pt.nm_primes[n + 1] - pt.nm_primes[n];
    if (delta != block.m_prime && delta != block.m_prime + 1)
      throw std::logic_error("build_product_tree: n' increment outside {m', m'+1}");
    if (!ext_y.count(delta)) {
      ext_y[delta] = extensions(Y, int(delta));
      cnt_y[delta] = transition_counts(Y, delta);
      Ypat[delta] = enumerate_approximation(Y, int(delta));
    }
    const auto& ey = ext_y[delta];
    // exact level size, checked against the cap before materializing
    double next_size = 0;
    for (auto [sx, sy] : states)
      next_size += double(ext_x.by_state[sx].size()) * double(ey.by_state[sy].size());
    if (next_size * (sizeof(IndexPair) + sizeof(uint32_t) + sizeof(std::pair<int, int>)) >
        double(mem_cap))
      throw std::runtime_error("build_product_tree: level " + std::to_string(n + 1) +
                               " (" + std::to_string(uint64_t(next_size)) +
                               " nodes) exceeds the memory cap");
    // containment check per extension pattern: x offsets must be X_m points
    // and y offsets must lie in Y_{m'} or Y_{m'+1}, matching the wrap branch
    for (const auto& st : ext_x.by_state)
      for (auto [a, s2] : st)
        if (!std::binary_search(Xm.indices.begin(), Xm.indices.end(), a))
          pt.containment_failures++;
    for (const auto& st : ey.by_state)
      for (auto [b, s2] : st)
        if (!std::binary_search(Ypat[delta].indices.begin(), Ypat[delta].indices.end(), b))
          pt.containment_failures++;

    const uint64_t rm = uint64_t(std::llround(pt.rbase));
    uint64_t sd = 1;
    for (int64_t k = 0; k < delta; ++k) sd *= uint64_t(pt.s);
    std::vector<uint32_t> par;
    std::vector<IndexPair> pay;
    std::vector<std::pair<int, int>> nstates;
    par.reserve(size_t(next_size));
    pay.reserve(size_t(next_size));
    const bool need_states = (n + 1 < N);
    if (need_states) nstates.reserve(size_t(next_size));
    for (uint32_t k = 0; k < payload[n].size(); ++k) {
      const IndexPair& q = payload[n][k];
      auto [sx, sy] = states[k];
      for (auto [a, sx2] : ext_x.by_state[sx]) {
        const uint64_t ci = q.i * rm + a;
        for (auto [b, sy2] : ey.by_state[sy]) {
          par.push_back(k);
          pay.push_back({ci, q.j * sd + b});
          if (need_states) nstates.push_back({sx2, sy2});
        }
      }
    }
    parents[n + 1] = std::move(par);
    payload[n + 1] = std::move(pay);
    states = std::move(nstates);
  }
  if (pt.containment_failures > 0) {
    pt.containment_verified = false;
    throw std::logic_error("build_product_tree: containment violated (n' bookkeeping)");
  }
  pt.tree = LevelTree::from_parent_lists(std::move(parents));
  pt.tree.attach_payload(std::move(payload));

  // offset-fraction tables for the separation policy
  pt.fx.assign(N + 1, 0.0);
  pt.fy.assign(N + 1, 0.0);
  for (int h = 0; h < N; ++h) {
    pt.fx[h] = max_offset_fraction(X, (int64_t(N) - h) * pt.m);
    pt.fy[h] = max_offset_fraction(Y, pt.nm_primes[N] - pt.nm_primes[h]);
  }

  // content claim: H_{r^m}^{gamma4}(Gamma) at least the content of the
  // reference tree two levels deeper
  Subtree full = Subtree::full(pt.tree);
  pt.table_gamma4 = tree_content_table(full, pt.rbase, ladder.gamma4);
  pt.content_gamma4 = pt.table_gamma4.root();
  pt.reference_content_V =
      product_tree_symbolic_content(X, Y, block, N + 2, ladder.gamma4);
  pt.content_claim_ok = pt.content_gamma4 >= pt.reference_content_V - kTol;
  return pt;
}

ThinResult marstrand_thin(const ProductTree& pt, const Subtree& gamma_prime,
                          const ContentTable& gp_content,
                          const GammaLadder& ladder, const RotationBlock& block,
                          double t, const DirectionSet& T,
                          const OrbitReport& orbit, SepPolicy policy) {
  const LevelTree& base = pt.tree;
  const int N = pt.N;
  if (static_cast<int64_t>(orbit.orbit.size()) < N + 1)
    throw std::invalid_argument("marstrand_thin: orbit too short");
  DirectionSet J = T.shifted(-t).intersected({0, block.beta});
  ThinResult res;
  res.height_in_J.assign(N, 0);
  for (int n = 0; n < N; ++n)
    res.height_in_J[n] = J.contains(orbit.orbit[n]) ? 1 : 0;

  const double fan_need = std::pow(block.rho, -ladder.gamma3);
  const size_t keep_cap =
      static_cast<size_t>(std::ceil(std::pow(block.rho, -ladder.gamma2) - kTol));

  std::vector<std::vector<uint8_t>> keep(N + 1);
  for (int n = 0; n <= N; ++n) keep[n].assign(base.level_size(n), 0);
  keep[0][0] = 1;
  std::vector<NodeId> stack{{0, 0}};
  std::vector<uint32_t> kept_children;
  std::vector<std::pair<double, uint32_t>> proj;
  while (!stack.empty()) {
    NodeId node = stack.back();
    stack.pop_back();
    const int n = node.level;
    if (n == N) continue;
    kept_children.clear();
    auto [cb, ce] = base.children(n, node.index);
    for (uint32_t c = cb; c < ce; ++c)
      if (gamma_prime.kept(n + 1, c)) kept_children.push_back(c);

    const bool fanout_ok = double(kept_children.size()) >= fan_need - kTol;
    if (!res.height_in_J[n] || !fanout_ok) {
      // single child of largest induced content
      uint32_t best = kept_children.front();
      double best_val = -1;
      for (uint32_t c : kept_children) {
        const double v = gp_content.induced(n + 1, c);
        if (v > best_val + kTol) {
          best_val = v;
          best = c;
        }
      }
      keep[n + 1][best] = 1;
      stack.push_back({n + 1, best});
      if (!res.height_in_J[n])
        res.stats.case_single_outside_J++;
      else
        res.stats.case_single_few_children++;
      continue;
    }

    // rescale the kept children to the unit block and extract a separated
    // subset in the direction t + R^n(0)
    const IndexPair& q = base.payload(n, node.index);
    const uint64_t rm = uint64_t(std::llround(pt.rbase));
    const int64_t delta = pt.nm_primes[n + 1] - pt.nm_primes[n];
    uint64_t sd = 1;
    for (int64_t k = 0; k < delta; ++k) sd *= uint64_t(pt.s);
    const double inv_rm = 1.0 / pt.rbase;
    const double inv_sd = 1.0 / double(sd);
    const double slope = std::exp(t + orbit.orbit[n]);
    proj.clear();
    for (uint32_t c : kept_children) {
      const IndexPair& p = base.payload(n + 1, c);
      const double u = double(p.i - q.i * rm) * inv_rm;
      const double v = double(p.j - q.j * sd) * inv_sd;
      proj.emplace_back(u + slope * v, c);
    }
    std::sort(proj.begin(), proj.end());
    double sep = block.c3 * block.rho;
    if (policy == SepPolicy::kPerNodeExact) {
      const double corr = pt.fx[n + 1] + std::exp(t + orbit.orbit[n + 1]) * pt.fy[n + 1];
      sep = (1 + 2 * corr) * block.rho;
    }
    std::vector<uint32_t> reps;
    double last = -std::numeric_limits<double>::infinity();
    for (const auto& [v, c] : proj) {
      if (reps.empty() || v - last >= sep) {
        reps.push_back(c);
        last = v;
      }
    }
    std::vector<uint32_t> chosen;
    if (reps.size() <= keep_cap) {
      chosen = reps;
      if (reps.size() < keep_cap) res.stats.shortfalls++;
    } else {
      chosen.reserve(keep_cap);
      for (size_t j = 0; j < keep_cap; ++j) {
        size_t pick = (keep_cap == 1) ? 0 : (j * (reps.size() - 1)) / (keep_cap - 1);
        chosen.push_back(reps[pick]);
      }
      std::sort(chosen.begin(), chosen.end());
      chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
    }
    res.stats.case_extract++;
    for (uint32_t c : chosen) {
      keep[n + 1][c] = 1;
      stack.push_back({n + 1, c});
    }
  }
  res.tree = Subtree::from_leaf_mask(base, std::move(keep[N]));
  return res;
}

LeafSeparationReport verify_leaf_separation(const ProductTree& pt,
                                            const Subtree& gamma_pp, double t,
                                            uint64_t seed) {
  const LevelTree& base = pt.tree;
  const int N = pt.N;
  std::vector<uint32_t> leaves = gamma_pp.kept_leaves();
  LeafSeparationReport rep;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  if (leaves.size() < 2) {
    rep.min_ratio = std::numeric_limits<double>::infinity();
    return rep;  // vacuous
  }
  const double slope = std::exp(t);
  std::vector<double> proj(leaves.size());
  const double sx = std::pow(double(pt.r), -double(N) * double(pt.m));
  const double sy = std::pow(double(pt.s), -double(pt.nm_primes[N]));
  for (size_t a = 0; a < leaves.size(); ++a) {
    const IndexPair& p = base.payload(N, leaves[a]);
    proj[a] = double(p.i) * sx + slope * (double(p.j) * sy);
  }
  // ancestor chains for LCA heights
  std::vector<std::vector<uint32_t>> chain(leaves.size(), std::vector<uint32_t>(N + 1));
  for (size_t a = 0; a < leaves.size(); ++a) {
    uint32_t k = leaves[a];
    chain[a][N] = k;
    for (int n = N; n > 0; --n) {
      k = base.parent(n, k);
      chain[a][n - 1] = k;
    }
  }
  auto check_pair = [&](size_t a, size_t b) {
    int lca = 0;
    for (int n = N; n >= 0; --n)
      if (chain[a][n] == chain[b][n]) {
        lca = n;
        break;
      }
    const double needed = std::pow(pt.rho, double(lca + 1));
    const double ratio = std::abs(proj[a] - proj[b]) / needed;
    if (ratio < rep.min_ratio) {
      rep.min_ratio = ratio;
      rep.witness_a = leaves[a];
      rep.witness_b = leaves[b];
    }
    ++rep.pairs_checked;
  };
  if (leaves.size() <= 10000) {
    for (size_t a = 0; a < leaves.size(); ++a)
      for (size_t b = a + 1; b < leaves.size(); ++b) check_pair(a, b);
  } else {
    rep.sampled = true;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> dist(0, leaves.size() - 1);
    for (int k = 0; k < 100000; ++k) {
      size_t a = dist(rng), b = dist(rng);
      if (a != b) check_pair(a, b);
    }
  }
  rep.pass = rep.min_ratio >= 1 - 1e-9;
  return rep;
}

BallBoundReport verify_ball_bound(std::span<const double> atoms,
                                  std::span<const double> masses, double kappa,
                                  double gamma, double floor_delta) {
  if (atoms.size() != masses.size())
    throw std::invalid_argument("verify_ball_bound: size mismatch");
  BallBoundReport rep;
  const size_t n = atoms.size();
  std::vector<double> prefix(n + 1, 0);
  for (size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + masses[k];
  const double total = prefix[n];
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      const double width = atoms[j] - atoms[i];
      const double diam = std::max(floor_delta, width);
      const double mass = prefix[j + 1] - prefix[i];
      const double allowed = kappa * std::pow(diam, gamma);
      const double ratio = mass / allowed;
      ++rep.balls_checked;
      if (ratio > rep.worst_ratio) {
        rep.worst_ratio = ratio;
        rep.witness_center = (atoms[i] + atoms[j]) / 2;
        rep.witness_diameter = diam;
        rep.witness_mass = mass;
      }
      // no ball extending further right can violate once the allowance
      // exceeds all remaining mass
      if (allowed >= total + kTol) break;
    }
  }
  rep.pass = rep.worst_ratio <= 1 + 1e-9;
  return rep;
}

CertifyEngine::CertifyEngine(const InvariantSetSpec& X, const InvariantSetSpec& Y,
                             double gamma_target, Interval t_domain, int N,
                             EngineOptions opt)
    : x_(X), y_(Y), opt_(opt), t_domain_(t_domain), N_(N) {
  // dimension estimates feed the ladder
  auto clip_max = [](const InvariantSetSpec& s, int hi) {
    int n = hi;
    while (n > 2 && double(n) * std::log2(double(s.base())) > 40) --n;
    return n;
  };
  DimensionFit fx = dimension_estimate(x_, opt_.dims_n_min, clip_max(x_, opt_.dims_n_max));
  DimensionFit fy = dimension_estimate(y_, opt_.dims_n_min, clip_max(y_, opt_.dims_n_max));
  ladder_ = select_gammas(fx.slope + fy.slope, gamma_target);

  if (opt_.forced_m > 0) {
    block_ = make_block(x_.base(), y_.base(), opt_.forced_m, t_domain_);
    LatticeSet Xm = enumerate_approximation(x_, int(block_.m));
    LatticeSet Ylo = enumerate_approximation(y_, int(block_.m_prime));
    LatticeSet Yhi = enumerate_approximation(y_, int(block_.m_prime) + 1);
    auto qc = verify_separated_concentration_2d(
        grid_coords(product_grid(Xm, Ylo, opt_.mem_cap)), block_.c1 * block_.rho,
        ladder_.gamma5, 1.0);
    auto qtc = verify_separated_concentration_2d(
        grid_coords(product_grid(Xm, Yhi, opt_.mem_cap)), block_.c1 * block_.rho,
        ladder_.gamma5, 1.0);
    block_.c2 = std::max(qc.measured_c, qtc.measured_c);
  } else {
    block_ = select_block(ladder_, x_, y_, t_domain_, opt_.mode, opt_.m_cap, opt_.mem_cap);
  }

  pt_ = build_product_tree(x_, y_, block_, N_, ladder_, opt_.mem_cap);

  // the tree's measured child capacity sets the gamma5 used by the
  // dichotomy; raising it beyond the ladder is an empirical substitution
  Subtree full = Subtree::full(pt_.tree);
  uint32_t max_children = 0;
  for (int n = 0; n < N_; ++n)
    for (uint32_t k = 0; k < pt_.tree.level_size(n); ++k)
      max_children = std::max(max_children, pt_.tree.child_count(n, k));
  const double needed = std::log(double(max_children)) / std::log(pt_.rbase);
  gamma5_tree_ = ladder_.gamma5;
  if (needed > gamma5_tree_) {
    gamma5_tree_ = needed * (1 + 1e-9) + 1e-9;
    setup_downgrades_.push_back("tree child capacity " + std::to_string(max_children) +
                                " exceeds r^(m gamma5); dichotomy run at measured gamma5=" +
                                fmt(gamma5_tree_));
  }
  gamma_prime_ = regular_subtree(full, pt_.rbase, ladder_.gamma3, ladder_.gamma4,
                                 gamma5_tree_);
  gp_content_ = tree_content_table(gamma_prime_, pt_.rbase, ladder_.gamma4);

  orbit_ = rotation_orbit(block_, N_ + 1);

  // good-direction window of the block grids over I_beta
  LatticeSet Xm = enumerate_approximation(x_, int(block_.m));
  LatticeSet Ylo = enumerate_approximation(y_, int(block_.m_prime));
  LatticeSet Yhi = enumerate_approximation(y_, int(block_.m_prime) + 1);
  std::vector<Point2> q = grid_coords(product_grid(Xm, Ylo, opt_.mem_cap));
  std::vector<Point2> qt = grid_coords(product_grid(Xm, Yhi, opt_.mem_cap));
  GoodWindowOptions gopt;
  gopt.clamp_m = (opt_.mode == Mode::kEmpirical);
  gopt.threads = opt_.threads;
  window_ = good_direction_window(q, qt, block_.t_domain_beta,
                                  ladder_.eps * block_.beta / 6, ladder_.gamma2,
                                  ladder_.gamma3, ladder_.gamma4, ladder_.gamma5,
                                  block_.c1, block_.c2, block_.c3, block_.rho, gopt);
  if (window_.m_clamped)
    setup_downgrades_.push_back("exceptional-set bin count clamped to the sweep regime");

  // thinning threshold: the proof-valid closed form when the base is large
  // enough, otherwise the measured fertile-ancestry onset of Gamma'
  try {
    thinning_N0_ = thinning_threshold(ladder_.eps / 6, ladder_.gamma3, ladder_.gamma4,
                                      gamma5_tree_, pt_.rbase, pt_.reference_content_V);
  } catch (const std::invalid_argument&) {
    const double c_fert = std::pow(block_.rho, -ladder_.gamma3);
    const double omega = 1 - ladder_.eps / 6;
    int64_t last_bad = 0;
    for (int n = 1; n <= N_; ++n) {
      for (uint32_t k = 0; k < pt_.tree.level_size(n); ++k) {
        if (!gamma_prime_.kept(n, k)) continue;
        if (double(fertile_ancestors(gamma_prime_, {n, k}, c_fert)) <
            omega * double(n) - kTol) {
          last_bad = n;
          break;
        }
      }
    }
    thinning_N0_ = last_bad + 1;
    setup_downgrades_.push_back(
        "thinning threshold outside the proof regime; measured N0=" +
        std::to_string(thinning_N0_) + " from Gamma' fertile ancestry");
  }
}

CertifiedRun CertifyEngine::certify(double t, ThinResult* out_thin) const {
  CertifiedRun run;
  run.t = t;
  run.N = N_;
  run.mode = opt_.mode;
  run.downgrades = setup_downgrades_;
  run.window_U = window_.interval_count_U;
  run.window_excluded = window_.excluded_measure;
  run.N0_thinning = thinning_N0_;

  // visit threshold: the discrepancy route when it stabilizes within the
  // horizon, otherwise the measured visit-count conclusion
  DirectionSet J = window_.window.shifted(-t).intersected({0, block_.beta});
  std::vector<uint8_t> in_J(N_, 0);
  size_t j_count = 0;
  for (int n = 0; n < N_; ++n) {
    in_J[n] = J.contains(orbit_.orbit[n]) ? 1 : 0;
    j_count += in_J[n];
  }
  run.J_size = j_count;
  const int64_t U = std::max<size_t>(1, window_.interval_count_U);
  VisitThresholdResult vt = visit_threshold(block_, U, ladder_.eps / 6, N_);
  if (!vt.empirical) {
    run.N0_visit = vt.N0;
  } else {
    int64_t last_bad = 0;
    for (int n = 1; n <= N_; ++n) {
      size_t hits = 0;
      for (int k = 0; k < n && k < N_; ++k) hits += in_J[k];
      if (double(hits) < (1 - ladder_.eps / 3) * double(n) - kTol) last_bad = n;
    }
    run.N0_visit = last_bad + 1;
    run.downgrades.push_back("visit threshold measured from the orbit (horizon " +
                             std::to_string(N_) + ")");
  }
  run.N0 = std::max(run.N0_thinning, run.N0_visit);
  run.kappa = std::pow(block_.rho, -double(run.N0));
  if (N_ < run.N0) {
    run.failure = "N=" + std::to_string(N_) + " below N0=" + std::to_string(run.N0);
    return run;
  }

  const SepPolicy policy =
      opt_.mode == Mode::kRigorous ? SepPolicy::kSpecC3 : SepPolicy::kPerNodeExact;
  if (policy == SepPolicy::kPerNodeExact)
    run.downgrades.push_back("per-node separation constants from measured cell offsets");
  ThinResult thin = marstrand_thin(pt_, gamma_prime_, gp_content_, ladder_, block_, t,
                                   window_.window, orbit_, policy);
  run.thin_stats = thin.stats;
  if (thin.stats.shortfalls > 0)
    run.downgrades.push_back("separated-subset shortfall at " +
                             std::to_string(thin.stats.shortfalls) + " nodes");

  // fertile ancestry of Gamma'' at heights >= N0
  const double c_fert = std::pow(block_.rho, -ladder_.gamma2);
  const double omega = 1 - ladder_.eps / 2;
  const int n_start = static_cast<int>(std::max<int64_t>(1, run.N0));
  run.fertility_ok = true;
  for (int n = n_start; n <= N_ && run.fertility_ok; ++n)
    for (uint32_t k = 0; k < pt_.tree.level_size(n); ++k) {
      if (!thin.tree.kept(n, k)) continue;
      if (double(fertile_ancestors(thin.tree, {n, k}, c_fert)) <
          omega * double(n) - kTol) {
        run.fertility_ok = false;
        break;
      }
    }

  // flow bound nu(Q) <= rho^(gamma2 (1-eps/2) n) at heights >= N0
  NodeMeasure nu = flow_measure(thin.tree);
  run.flow_bound_ok = true;
  for (int n = n_start; n <= N_ && run.flow_bound_ok; ++n) {
    const double bound =
        std::pow(block_.rho, ladder_.gamma2 * (1 - ladder_.eps / 2) * double(n));
    for (uint32_t k = 0; k < pt_.tree.level_size(n); ++k) {
      if (!thin.tree.kept(n, k)) continue;
      if (nu.node(n, k) > bound * (1 + 1e-9)) {
        run.flow_bound_ok = false;
        break;
      }
    }
  }

  run.leaf_separation = verify_leaf_separation(pt_, thin.tree, t, opt_.seed);

  // project the leaves, push the flow forward, merge equal positions
  std::vector<uint32_t> leaves = thin.tree.kept_leaves();
  run.leaf_count = leaves.size();
  const double slope = std::exp(t);
  const double sx = std::pow(double(pt_.r), -double(N_) * double(pt_.m));
  const double sy = std::pow(double(pt_.s), -double(pt_.nm_primes[N_]));
  std::vector<std::pair<double, double>> atom_mass;
  atom_mass.reserve(leaves.size());
  for (uint32_t k : leaves) {
    const IndexPair& p = pt_.tree.payload(N_, k);
    atom_mass.emplace_back(double(p.i) * sx + slope * (double(p.j) * sy),
                           nu.node(N_, k));
  }
  std::sort(atom_mass.begin(), atom_mass.end());
  for (const auto& [x, w] : atom_mass) {
    if (!run.atoms.empty() && x == run.atoms.back()) {
      run.atom_masses.back() += w;
    } else {
      run.atoms.push_back(x);
      run.atom_masses.push_back(w);
    }
  }

  const double floor_delta = std::pow(block_.rho, double(N_));
  run.ball_bound = verify_ball_bound(run.atoms, run.atom_masses, run.kappa,
                                     ladder_.gamma1, floor_delta);
  run.direct_content =
      interval_cover_content(run.atoms, floor_delta, ladder_.gamma1).cost;

  run.completed = true;
  run.all_checks_passed = run.fertility_ok && run.flow_bound_ok &&
                          run.leaf_separation.pass && run.ball_bound.pass &&
                          1.0 / run.kappa <= run.direct_content + 1e-9;
  if (run.all_checks_passed) run.certified_bound = 1.0 / run.kappa;
  if (opt_.mode == Mode::kRigorous && !run.downgrades.empty())
    run.mode = Mode::kEmpirical;
  if (out_thin) *out_thin = std::move(thin);
  return run;
}

SumsetEntropy sumset_entropy_ratio(const InvariantSetSpec& X,
                                   const InvariantSetSpec& Y, double lambda,
                                   double eta, int64_t total_x_digits,
                                   uint64_t mem_cap) {
  if (lambda == 0 || eta == 0)
    throw std::invalid_argument("sumset_entropy_ratio: zero coefficient");
  InvariantSetSpec xs = lambda < 0 ? X.reflected() : X;
  InvariantSetSpec ys = eta < 0 ? Y.reflected() : Y;
  const double lam = std::abs(lambda), et = std::abs(eta);
  const int64_t Nm = total_x_digits;
  const int64_t NmP = n_prime(Nm, xs.base(), ys.base());
  LatticeSet XN = enumerate_approximation(xs, int(Nm));
  LatticeSet YN = enumerate_approximation(ys, int(NmP));
  const uint64_t count = uint64_t(XN.size()) * uint64_t(YN.size());
  if (count > mem_cap / sizeof(double))
    throw std::runtime_error("sumset_entropy_ratio: sum array exceeds the memory cap");
  std::vector<double> xv = XN.points();
  std::vector<double> yv = YN.points();
  for (double& v : xv) v *= lam;
  for (double& v : yv) v *= et;
  std::vector<double> sums;
  sums.reserve(count);
  for (double a : xv)
    for (double b : yv) sums.push_back(a + b);
  std::sort(sums.begin(), sums.end());
  SumsetEntropy out;
  out.diameter = sums.back() - sums.front();
  if (out.diameter == 0) {
    out.entropy = 1;
    out.ratio = 0;
    return out;
  }
  const double scale = out.diameter * std::pow(double(xs.base()), -double(Nm));
  out.entropy = metric_entropy(sums, scale);
  out.ratio = std::log(double(out.entropy)) /
              (double(Nm) * std::log(double(xs.base())));
  return out;
}

SweepResult sumset_sweep(const InvariantSetSpec& X, const InvariantSetSpec& Y,
                         const SweepRegion& region, double gamma_target, int N,
                         const EngineOptions& opt) {
  SweepResult res;
  struct Job {
    double lambda = 1, eta = 1;
    double t = 0;
    bool xr = false, yr = false;
    bool param = false;  // carries a (lambda, eta) entropy row
  };
  std::vector<Job> jobs;
  if (region.use_t_interval) {
    const int G = std::max(1, region.t_grid);
    for (int k = 0; k < G; ++k) {
      Job j;
      j.t = G == 1 ? region.t.a
                   : region.t.a + (region.t.b - region.t.a) * double(k) / (G - 1);
      // the direct-ratio pair realizing this slope: X + e^t Y
      j.lambda = 1;
      j.eta = std::exp(j.t);
      j.param = true;
      jobs.push_back(j);
    }
  } else {
    auto gridv = [](double lo, double hi, int g) {
      std::vector<double> v;
      for (int k = 0; k < std::max(1, g); ++k)
        v.push_back(g <= 1 ? lo : lo + (hi - lo) * double(k) / (g - 1));
      return v;
    };
    for (double lam : gridv(region.lambda_min, region.lambda_max, region.lambda_grid))
      for (double et : gridv(region.eta_min, region.eta_max, region.eta_grid)) {
        if (lam == 0 || et == 0)
          throw std::invalid_argument("sumset_sweep: the parameter region meets 0");
        Job j;
        j.lambda = lam;
        j.eta = et;
        j.xr = lam < 0;
        j.yr = et < 0;
        j.t = std::log(std::abs(et) / std::abs(lam));
        j.param = true;
        jobs.push_back(j);
      }
  }

  // engines per reflection combination, sharing Gamma and Gamma'
  std::map<std::pair<bool, bool>, std::unique_ptr<CertifyEngine>> engines;
  auto engine_for = [&](bool xr, bool yr) -> CertifyEngine& {
    auto key = std::make_pair(xr, yr);
    auto it = engines.find(key);
    if (it == engines.end()) {
      double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
      for (const Job& j : jobs)
        if (j.xr == xr && j.yr == yr) {
          tmin = std::min(tmin, j.t);
          tmax = std::max(tmax, j.t);
        }
      InvariantSetSpec xs = xr ? X.reflected() : X;
      InvariantSetSpec ys = yr ? Y.reflected() : Y;
      it = engines
               .emplace(key, std::make_unique<CertifyEngine>(
                                 xs, ys, gamma_target,
                                 Interval{tmin, tmax + 1e-9}, N, opt))
               .first;
    }
    return *it->second;
  };

  // distinct t per engine (grid cells of the theta sweep mapped through phi
  // never merge distinct exceptional windows; rho is a safe tolerance)
  std::map<std::pair<std::pair<bool, bool>, int64_t>, CertifiedRun> run_cache;
  res.inf_ratio = std::numeric_limits<double>::infinity();
  res.sup_ratio = -std::numeric_limits<double>::infinity();
  res.inf_certified = std::numeric_limits<double>::infinity();
  for (const Job& j : jobs) {
    CertifyEngine& eng = engine_for(j.xr, j.yr);
    const double tol = eng.block().rho;
    auto key = std::make_pair(std::make_pair(j.xr, j.yr),
                              int64_t(std::llround(j.t / tol)));
    auto it = run_cache.find(key);
    if (it == run_cache.end()) {
      CertifiedRun run = eng.certify(j.t);
      it = run_cache.emplace(key, std::move(run)).first;
      res.runs.push_back(it->second);
      const CertifiedRun& r = it->second;
      if (!r.completed) res.all_completed = false;
      if (!r.downgrades.empty()) res.downgrade_count++;
      if (r.completed && r.all_checks_passed)
        res.inf_certified = std::min(res.inf_certified, r.certified_bound);
    }
    if (j.param) {
      SumsetEntropy se = sumset_entropy_ratio(X, Y, j.lambda, j.eta,
                                              eng.block().m * N, opt.mem_cap);
      res.params.push_back({j.lambda, j.eta, j.t, se.entropy, se.ratio, j.xr, j.yr});
      res.inf_ratio = std::min(res.inf_ratio, se.ratio);
      res.sup_ratio = std::max(res.sup_ratio, se.ratio);
    }
  }
  if (res.params.empty()) {
    res.inf_ratio = res.sup_ratio = 0;
  }
  if (!std::isfinite(res.inf_certified)) res.inf_certified = 0;
  return res;
}

}  // namespace sumdim
