#include "sumdim/invariant_set.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sumdim {

InvariantSetSpec::InvariantSetSpec(int base, DigitRule rule)
    : base_(base), digit_rule_(true), digits_(std::move(rule.digits)) {
  if (base < 2) throw std::invalid_argument("base must be >= 2");
  std::sort(digits_.begin(), digits_.end());
  digits_.erase(std::unique(digits_.begin(), digits_.end()), digits_.end());
  if (digits_.empty()) throw std::invalid_argument("digit set must be nonempty");
  for (uint8_t d : digits_)
    if (d >= base) throw std::invalid_argument("digit out of range");
  build_automaton();
}

InvariantSetSpec::InvariantSetSpec(int base, SftRule rule)
    : base_(base), digit_rule_(false), forbidden_(std::move(rule.forbidden)) {
  if (base < 2) throw std::invalid_argument("base must be >= 2");
  for (const Word& w : forbidden_) {
    if (w.size() < 2) throw std::invalid_argument("forbidden word length must be >= 2");
    for (uint8_t d : w)
      if (d >= base) throw std::invalid_argument("forbidden word digit out of range");
  }
  build_automaton();
  check_language_alive();
}

namespace {

bool ends_with_forbidden(const Word& history, int digit,
                         const std::vector<Word>& forbidden) {
  for (const Word& w : forbidden) {
    if (w.empty() || w.back() != digit) continue;
    if (w.size() > history.size() + 1) continue;
    bool match = true;
    for (size_t k = 0; k + 1 < w.size(); ++k) {
      if (history[history.size() - (w.size() - 1) + k] != w[k]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

}  // namespace

void InvariantSetSpec::build_automaton() {
  if (digit_rule_) {
    transitions_.assign(1, std::vector<int>(base_, -1));
    for (uint8_t d : digits_) transitions_[0][d] = 0;
    return;
  }
  size_t max_len = 0;
  for (const Word& w : forbidden_) max_len = std::max(max_len, w.size());
  const size_t hist_len = max_len == 0 ? 0 : max_len - 1;

  // States are admissible histories (the last <= hist_len digits read),
  // discovered by BFS from the empty history.
  std::map<Word, int> ids;
  std::vector<Word> words;
  ids[{}] = 0;
  words.push_back({});
  transitions_.clear();
  for (size_t q = 0; q < words.size(); ++q) {
    transitions_.emplace_back(base_, -1);
    const Word hist = words[q];
    for (int d = 0; d < base_; ++d) {
      if (ends_with_forbidden(hist, d, forbidden_)) continue;
      Word next = hist;
      next.push_back(static_cast<uint8_t>(d));
      if (next.size() > hist_len)
        next.erase(next.begin(), next.end() - hist_len);
      auto [it, inserted] = ids.emplace(next, static_cast<int>(words.size()));
      if (inserted) words.push_back(next);
      transitions_[q][d] = it->second;
    }
    // keep transitions_ sized with words (new states get rows later)
  }
  // Rows for states discovered after the loop index passed them are created
  // when the loop reaches them; the loop above runs until words is exhausted,
  // so sizes match here.
}

void InvariantSetSpec::check_language_alive() const {
  // Admissible strings are prefix-closed, so the language is nonempty at
  // every length iff a path of length state_count()+1 exists from the
  // initial state (such a path repeats a state, hence reaches a cycle).
  std::vector<char> cur(state_count(), 0);
  cur[0] = 1;
  const int steps = state_count() + 1;
  for (int step_i = 0; step_i < steps; ++step_i) {
    std::vector<char> nxt(state_count(), 0);
    bool any = false;
    for (int q = 0; q < state_count(); ++q) {
      if (!cur[q]) continue;
      for (int d = 0; d < base_; ++d) {
        int t = transitions_[q][d];
        if (t >= 0) {
          nxt[t] = 1;
          any = true;
        }
      }
    }
    if (!any) throw std::invalid_argument("degenerate spec: language dies at length " +
                                          std::to_string(step_i + 1));
    cur.swap(nxt);
  }
}

InvariantSetSpec InvariantSetSpec::reflected() const {
  if (digit_rule_) {
    DigitRule r;
    for (uint8_t d : digits_) r.digits.push_back(static_cast<uint8_t>(base_ - 1 - d));
    return InvariantSetSpec(base_, std::move(r));
  }
  SftRule r;
  for (const Word& w : forbidden_) {
    Word m;
    for (uint8_t d : w) m.push_back(static_cast<uint8_t>(base_ - 1 - d));
    r.forbidden.push_back(std::move(m));
  }
  return InvariantSetSpec(base_, std::move(r));
}

std::string InvariantSetSpec::describe() const {
  std::ostringstream os;
  os << "base " << base_;
  if (digit_rule_) {
    os << " digits {";
    for (size_t k = 0; k < digits_.size(); ++k)
      os << (k ? "," : "") << int(digits_[k]);
    os << "}";
  } else {
    os << " forbidden {";
    for (size_t k = 0; k < forbidden_.size(); ++k) {
      os << (k ? "," : "");
      for (uint8_t d : forbidden_[k]) os << int(d);
    }
    os << "}";
  }
  return os.str();
}

std::vector<double> LatticeSet::points() const {
  const double scale = std::pow(double(base), -exponent);
  std::vector<double> xs;
  xs.reserve(indices.size());
  for (uint64_t i : indices) xs.push_back(double(i) * scale);
  return xs;
}

bool LatticeSet::points_exact() const {
  return exponent * std::log2(double(base)) <= 53.0;
}

std::vector<std::pair<double, double>> PlanarLatticeSet::coords() const {
  const double sx = std::pow(double(x_base), -x_exponent);
  const double sy = std::pow(double(y_base), -y_exponent);
  std::vector<std::pair<double, double>> out;
  out.reserve(points.size());
  for (const IndexPair& p : points) out.emplace_back(double(p.i) * sx, double(p.j) * sy);
  return out;
}

mpz_class integer_power(int64_t base, int64_t exponent) {
  if (base < 0 || exponent < 0) throw std::invalid_argument("negative power");
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), static_cast<unsigned long>(base),
                static_cast<unsigned long>(exponent));
  return r;
}

int64_t n_prime(int64_t n, int64_t r, int64_t s) {
  if (n < 0 || r < 2 || s < 2) throw std::invalid_argument("n_prime: need n >= 0, r,s >= 2");
  if (n == 0) return 0;
  const mpz_class rn = integer_power(r, n);
  // Start from the float guess and correct by exact comparison.
  int64_t k = static_cast<int64_t>(std::floor(double(n) * std::log(double(r)) /
                                              std::log(double(s))));
  if (k < 0) k = 0;
  mpz_class sk = integer_power(s, k);
  while (sk > rn) {
    sk /= s;
    --k;
  }
  mpz_class next = sk * s;
  while (next <= rn) {
    sk = next;
    ++k;
    next = sk * s;
  }
  return k;
}

mpz_class count_words(const InvariantSetSpec& spec, int64_t n) {
  std::vector<mpz_class> cur(spec.state_count(), 0);
  cur[spec.initial_state()] = 1;
  for (int64_t step_i = 0; step_i < n; ++step_i) {
    std::vector<mpz_class> nxt(spec.state_count(), 0);
    for (int q = 0; q < spec.state_count(); ++q) {
      if (cur[q] == 0) continue;
      for (int d = 0; d < spec.base(); ++d) {
        int t = spec.step(q, d);
        if (t >= 0) nxt[t] += cur[q];
      }
    }
    cur.swap(nxt);
  }
  mpz_class total = 0;
  for (const mpz_class& v : cur) total += v;
  return total;
}

LatticeSet enumerate_approximation(const InvariantSetSpec& spec, int N) {
  if (N < 0) throw std::invalid_argument("N must be >= 0");
  if (N * std::log2(double(spec.base())) > 62.5)
    throw std::overflow_error("enumerate_approximation: base^N exceeds 63-bit indices");
  LatticeSet out;
  out.base = spec.base();
  out.exponent = N;
  // Iterative DFS over digits, ascending at every position, so indices come
  // out sorted.
  struct Frame {
    int state;
    uint64_t prefix;
    int digit;
  };
  std::vector<Frame> stack;
  stack.push_back({spec.initial_state(), 0, 0});
  if (N == 0) {
    out.indices.push_back(0);
    return out;
  }
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.digit >= spec.base()) {
      stack.pop_back();
      continue;
    }
    int d = f.digit++;
    int t = spec.step(f.state, d);
    if (t < 0) continue;
    uint64_t idx = f.prefix * spec.base() + d;
    if (static_cast<int>(stack.size()) == N) {
      out.indices.push_back(idx);
    } else {
      stack.push_back({t, idx, 0});
    }
  }
  if (out.indices.empty())
    throw std::runtime_error("degenerate spec: empty language at length " + std::to_string(N));
  return out;
}

std::vector<ShiftViolation> check_shift_invariance(const InvariantSetSpec& spec,
                                                   int N_max) {
  if (N_max < 1) throw std::invalid_argument("N_max must be >= 1");
  std::vector<LatticeSet> family;
  family.reserve(N_max + 1);
  for (int n = 0; n <= N_max; ++n) family.push_back(enumerate_approximation(spec, n));
  return check_shift_invariance(family);
}

std::vector<ShiftViolation> check_shift_invariance(
    const std::vector<LatticeSet>& family) {
  std::vector<ShiftViolation> violations;
  for (size_t n = 1; n < family.size(); ++n) {
    const LatticeSet& fine = family[n];
    const LatticeSet& coarse = family[n - 1];
    if (fine.exponent != coarse.exponent + 1 || fine.base != coarse.base)
      throw std::invalid_argument("family levels must have consecutive exponents");
    uint64_t mod = 1;
    for (int k = 0; k < coarse.exponent; ++k) mod *= fine.base;
    for (uint64_t i : fine.indices) {
      uint64_t shifted = i % mod;
      if (!std::binary_search(coarse.indices.begin(), coarse.indices.end(), shifted))
        violations.push_back({static_cast<int>(n), i});
    }
  }
  return violations;
}

PlanarLatticeSet product_grid(const LatticeSet& X, const LatticeSet& Y,
                              uint64_t mem_cap_bytes) {
  const uint64_t count = uint64_t(X.size()) * uint64_t(Y.size());
  if (count > mem_cap_bytes / sizeof(IndexPair))
    throw std::runtime_error("product_grid: " + std::to_string(count) +
                             " points exceed the memory cap");
  PlanarLatticeSet out;
  out.x_base = X.base;
  out.x_exponent = X.exponent;
  out.y_base = Y.base;
  out.y_exponent = Y.exponent;
  out.points.reserve(count);
  for (uint64_t i : X.indices)
    for (uint64_t j : Y.indices) out.points.push_back({i, j});
  return out;
}

}  // namespace sumdim
