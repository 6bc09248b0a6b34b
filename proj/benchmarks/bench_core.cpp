#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "sumdim/content.hpp"
#include "sumdim/invariant_set.hpp"
#include "sumdim/pipeline.hpp"
#include "sumdim/projection.hpp"
#include "sumdim/tree.hpp"

using namespace sumdim;

namespace {

std::vector<double> random_points(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> xs(n);
  for (double& x : xs) x = u(rng);
  std::sort(xs.begin(), xs.end());
  return xs;
}

}  // namespace

static void BM_IntervalCoverContent(benchmark::State& state) {
  auto xs = random_points(state.range(0), 42);
  for (auto _ : state) {
    auto res = interval_cover_content(xs, 1e-4, 0.7);
    benchmark::DoNotOptimize(res.cost);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_IntervalCoverContent)->Range(64, 8192)->Complexity();

static void BM_MetricEntropy(benchmark::State& state) {
  auto xs = random_points(state.range(0), 7);
  for (auto _ : state) {
    auto n = metric_entropy(xs, 1e-4);
    benchmark::DoNotOptimize(n);
  }
}
BENCHMARK(BM_MetricEntropy)->Range(1024, 1 << 20);

static void BM_TreeContent(benchmark::State& state) {
  InvariantSetSpec X(3, DigitRule{{0, 2}});
  InvariantSetSpec Y(5, DigitRule{{0, 1, 2}});
  GammaLadder L = select_gammas(std::log(2.0) / std::log(3.0) +
                                    std::log(3.0) / std::log(5.0),
                                0.45);
  RotationBlock b = make_block(3, 5, 3, {-0.7, 0.7});
  ProductTree pt = build_product_tree(X, Y, b, int(state.range(0)), L);
  Subtree full = Subtree::full(pt.tree);
  for (auto _ : state) {
    double c = tree_content(full, pt.rbase, L.gamma4);
    benchmark::DoNotOptimize(c);
  }
}
BENCHMARK(BM_TreeContent)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_ObliqueProject(benchmark::State& state) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Point2> pts(state.range(0));
  for (Point2& p : pts) p = {u(rng), u(rng)};
  for (auto _ : state) {
    auto proj = oblique_project(pts, 0.35);
    benchmark::DoNotOptimize(proj.xs.data());
  }
}
BENCHMARK(BM_ObliqueProject)->Range(1024, 1 << 17);

static void BM_ExceptionalDirections(benchmark::State& state) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  const size_t n = state.range(0);
  std::vector<Point2> pts(n);
  for (Point2& p : pts) p = {u(rng), u(rng)};
  const double rho = 0.5 / std::sqrt(double(n));
  for (auto _ : state) {
    auto res = exceptional_directions(pts, rho, 0.3, 4, rho, 2.0, 1.0);
    benchmark::DoNotOptimize(res.report.measured);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_ExceptionalDirections)->Range(256, 2048)->Complexity()
    ->Unit(benchmark::kMillisecond);

static void BM_Discrepancy(benchmark::State& state) {
  RotationBlock b = make_block(3, 5, 3, {-0.7, 0.7});
  OrbitReport orb = rotation_orbit(b, state.range(0));
  std::vector<double> xs;
  for (double v : orb.orbit) xs.push_back(v / b.beta);
  for (auto _ : state) {
    double d = discrepancy(xs);
    benchmark::DoNotOptimize(d);
  }
}
BENCHMARK(BM_Discrepancy)->Range(1024, 1 << 16);

BENCHMARK_MAIN();
