#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <gmpxx.h>

namespace sumdim {

// A digit string over {0,...,base-1}, most significant digit first.
using Word = std::vector<uint8_t>;

struct DigitRule {
  std::vector<uint8_t> digits;  // allowed digits, nonempty
};

struct SftRule {
  std::vector<Word> forbidden;  // forbidden factors, each of length >= 2
};

// Symbolic description of a multiplicatively invariant subset of [0,1):
// either a restricted-digit set or a subshift of finite type given by
// forbidden words. Construction validates that the language is nonempty
// at every length (for SFTs, via reachability of a cycle in the factor
// automaton). Immutable after construction.
class InvariantSetSpec {
 public:
  InvariantSetSpec(int base, DigitRule rule);
  InvariantSetSpec(int base, SftRule rule);

  int base() const { return base_; }
  bool is_digit_rule() const { return digit_rule_; }
  const std::vector<uint8_t>& digits() const { return digits_; }
  const std::vector<Word>& forbidden() const { return forbidden_; }

  // Factor automaton over admissible histories (last L-1 digits, L = max
  // forbidden word length; a single state for digit rules).
  int state_count() const { return static_cast<int>(transitions_.size()); }
  int initial_state() const { return 0; }
  // Next state after reading `digit`, or -1 if the extension is forbidden.
  int step(int state, int digit) const { return transitions_[state][digit]; }

  // The reflected set 1 - X (digitwise d -> base-1-d); again invariant.
  InvariantSetSpec reflected() const;

  std::string describe() const;

 private:
  void build_automaton();
  void check_language_alive() const;

  int base_ = 0;
  bool digit_rule_ = true;
  std::vector<uint8_t> digits_;
  std::vector<Word> forbidden_;
  std::vector<std::vector<int>> transitions_;  // [state][digit] -> state or -1
};

// X_N: the finite approximation on the lattice base^-N * Z, stored as
// strictly increasing integer indices in [0, base^N).
struct LatticeSet {
  int base = 0;
  int exponent = 0;
  std::vector<uint64_t> indices;

  size_t size() const { return indices.size(); }
  // Points i / base^exponent as doubles (exact when base^exponent <= 2^53).
  std::vector<double> points() const;
  bool points_exact() const;
};

struct IndexPair {
  uint64_t i = 0;
  uint64_t j = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

// Q = X_n x Y_k with independent bases and exponents per axis.
struct PlanarLatticeSet {
  int x_base = 0;
  int x_exponent = 0;
  int y_base = 0;
  int y_exponent = 0;
  std::vector<IndexPair> points;

  size_t size() const { return points.size(); }
  // (i / x_base^x_exponent, j / y_base^y_exponent) as double pairs.
  std::vector<std::pair<double, double>> coords() const;
};

// Greatest integer n' with s^n' <= r^n, by exact integer comparison.
int64_t n_prime(int64_t n, int64_t r, int64_t s);

// Exact integer power as an arbitrary-precision value.
mpz_class integer_power(int64_t base, int64_t exponent);

// Number of admissible digit strings of length n (transfer-matrix count).
mpz_class count_words(const InvariantSetSpec& spec, int64_t n);

// Enumerates X_N exactly. Throws on a degenerate spec (empty language at
// length N) and when base^N does not fit 63 bits.
LatticeSet enumerate_approximation(const InvariantSetSpec& spec, int N);

struct ShiftViolation {
  int level = 0;        // the n with T_r X_n not inside X_{n-1}
  uint64_t index = 0;   // witness index in X_n
};

// Checks T_r X_n subset of X_{n-1} for 1 <= n <= N_max on the family
// generated from the rule; the expected result is an empty list.
std::vector<ShiftViolation> check_shift_invariance(const InvariantSetSpec& spec,
                                                   int N_max);
// Same check on an explicitly given family (family[n] must have exponent n).
std::vector<ShiftViolation> check_shift_invariance(
    const std::vector<LatticeSet>& family);

// Cartesian product X x Y; throws when |X|*|Y| points would exceed the
// memory cap (in bytes).
PlanarLatticeSet product_grid(const LatticeSet& X, const LatticeSet& Y,
                              uint64_t mem_cap_bytes = uint64_t(1) << 33);

}  // namespace sumdim
