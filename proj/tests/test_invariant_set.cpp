#include <cmath>

#include "doctest.h"
#include "sumdim/invariant_set.hpp"

using namespace sumdim;

namespace {
InvariantSetSpec cantor3() { return InvariantSetSpec(3, DigitRule{{0, 2}}); }
InvariantSetSpec golden() { return InvariantSetSpec(2, SftRule{{{1, 1}}}); }
}  // namespace

TEST_CASE("n_prime matches the exact power comparison") {
  CHECK(n_prime(0, 2, 3) == 0);
  CHECK(n_prime(0, 7, 5) == 0);
  CHECK(n_prime(3, 2, 3) == 1);   // 3 <= 8 < 9
  CHECK(n_prime(12, 3, 5) == 8);  // 5^8 = 390625 <= 3^12 = 531441 < 5^9

  std::vector<std::pair<int, int>> bases{{2, 3}, {3, 5}, {2, 5}, {7, 10}, {10, 7}};
  for (auto [r, s] : bases) {
    int64_t prev = 0;
    for (int64_t n = 0; n <= 200; ++n) {
      int64_t k = n_prime(n, r, s);
      CHECK(k >= prev);  // nondecreasing
      prev = k;
      CHECK(integer_power(s, k) <= integer_power(r, n));
      CHECK(integer_power(s, k + 1) > integer_power(r, n));
    }
  }
  // beyond 63-bit powers
  CHECK(integer_power(5, n_prime(5000, 3, 5)) <= integer_power(3, 5000));
  CHECK(integer_power(5, n_prime(5000, 3, 5) + 1) > integer_power(3, 5000));
}

TEST_CASE("enumerate_approximation on digit rules") {
  auto x1 = enumerate_approximation(cantor3(), 1);
  CHECK(x1.indices == std::vector<uint64_t>{0, 2});
  auto x2 = enumerate_approximation(cantor3(), 2);
  CHECK(x2.indices == std::vector<uint64_t>{0, 2, 6, 8});
  for (int n = 1; n <= 12; ++n)
    CHECK(enumerate_approximation(cantor3(), n).size() == (size_t(1) << n));
}

TEST_CASE("enumerate_approximation on the golden-mean shift") {
  auto x2 = enumerate_approximation(golden(), 2);
  CHECK(x2.indices == std::vector<uint64_t>{0, 1, 2});  // strings 00, 01, 10
  // |X_N| = Fibonacci(N+2)
  uint64_t fib_a = 1, fib_b = 2;  // Fib(2)=1, Fib(3)=2
  for (int n = 1; n <= 20; ++n) {
    CHECK(enumerate_approximation(golden(), n).size() == fib_b);
    uint64_t next = fib_a + fib_b;
    fib_a = fib_b;
    fib_b = next;
  }
}

TEST_CASE("transfer-matrix counts agree with enumeration") {
  for (int n = 1; n <= 12; ++n) {
    CHECK(count_words(cantor3(), n) == mpz_class(enumerate_approximation(cantor3(), n).size()));
    CHECK(count_words(golden(), n) == mpz_class(enumerate_approximation(golden(), n).size()));
  }
  InvariantSetSpec full2(2, DigitRule{{0, 1}});
  CHECK(count_words(full2, 30) == integer_power(2, 30));
}

TEST_CASE("degenerate SFT specs are rejected") {
  // every two-letter word forbidden: language dies at length 2
  CHECK_THROWS(InvariantSetSpec(2, SftRule{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}}));
  CHECK_THROWS(InvariantSetSpec(3, DigitRule{{}}));
  CHECK_THROWS(InvariantSetSpec(2, SftRule{{{1}}}));  // word length < 2
  // single survivor 111... is fine
  CHECK_NOTHROW(InvariantSetSpec(2, SftRule{{{0, 0}, {0, 1}, {1, 0}}}));
}

TEST_CASE("shift invariance holds for spec-generated families") {
  CHECK(check_shift_invariance(cantor3(), 12).empty());
  CHECK(check_shift_invariance(golden(), 8).empty());
}

TEST_CASE("shift invariance flags a hand-built violation") {
  // X_1 = {0} but X_2 = {1}: 1 mod 2 = 1 is not in X_1
  std::vector<LatticeSet> family;
  family.push_back(LatticeSet{2, 0, {0}});
  family.push_back(LatticeSet{2, 1, {0}});
  family.push_back(LatticeSet{2, 2, {1}});
  auto violations = check_shift_invariance(family);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].level == 2);
  CHECK(violations[0].index == 1);
}

TEST_CASE("product_grid") {
  LatticeSet X{3, 1, {0, 2}};
  LatticeSet Y{5, 0, {0}};
  auto q = product_grid(X, Y);
  REQUIRE(q.size() == 2);
  CHECK(q.points[0] == IndexPair{0, 0});
  CHECK(q.points[1] == IndexPair{2, 0});

  LatticeSet X4{3, 2, {0, 2, 6, 8}};
  LatticeSet Y3{5, 1, {0, 1, 2}};
  auto q2 = product_grid(X4, Y3);
  CHECK(q2.size() == 12);
  // direct enumeration of the 12 expected pairs
  size_t k = 0;
  for (uint64_t i : X4.indices)
    for (uint64_t j : Y3.indices) {
      CHECK(q2.points[k] == IndexPair{i, j});
      ++k;
    }
  CHECK_THROWS(product_grid(X4, Y3, 8));  // memory cap
}

TEST_CASE("cardinality sandwich r^(N g4) <= |X_N| <= r^(N g5)") {
  const double dim = std::log(2.0) / std::log(3.0);
  const double g4 = dim - 0.05, g5 = dim + 0.05;
  for (int n = 4; n <= 12; ++n) {
    const double count = double(enumerate_approximation(cantor3(), n).size());
    CHECK(count >= std::pow(3.0, n * g4));
    CHECK(count <= std::pow(3.0, n * g5));
  }
}

TEST_CASE("reflection preserves counts and invariance") {
  InvariantSetSpec r = cantor3().reflected();
  for (int n = 1; n <= 8; ++n)
    CHECK(count_words(r, n) == count_words(cantor3(), n));
  CHECK(check_shift_invariance(r, 6).empty());
  InvariantSetSpec g = golden().reflected();  // forbids "00"
  for (int n = 1; n <= 10; ++n)
    CHECK(count_words(g, n) == count_words(golden(), n));
}
