#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sumdim/content.hpp"
#include "sumdim/invariant_set.hpp"
#include "sumdim/projection.hpp"
#include "sumdim/tree.hpp"

namespace sumdim {

enum class Mode { kRigorous, kEmpirical };

// The exponent ladder gamma1 < ... < gamma5 around dim X + dim Y.
struct GammaLadder {
  double gamma1 = 0, gamma2 = 0, gamma3 = 0, gamma4 = 0, gamma5 = 0;
  double eps = 0;
  double dim_sum = 0;
  // Throws with the violated group name ((I)-(IV)) if invalid.
  void validate() const;
};

// Constructive selection: start at the degenerate ladder and back off by
// half the largest feasible symmetric perturbation.
GammaLadder select_gammas(double dim_sum, double gamma_target);

struct BlockCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

// The m-block scale bundle: rotation x -> x + alpha (mod beta) and the
// projection constants over I_beta = I + [0, beta].
struct RotationBlock {
  int r = 0, s = 0;
  int64_t m = 0, m_prime = 0;
  double alpha = 0, beta = 0;
  double rho = 0;          // r^-m
  double rbase = 0;        // r^m
  double lipschitz_P = 0;  // 1 + e^(sup I_beta)
  double c1 = 0;           // s^-1
  double c2 = 0;           // measured concentration constant of Q_m, Qtilde_m
  double c3 = 0;           // 4 P / s + 1
  Interval t_domain;       // I
  Interval t_domain_beta;  // I_beta
  std::vector<BlockCheck> checks;
};

// Arithmetic-only block construction for a given m (no set verification).
RotationBlock make_block(int r, int s, int64_t m, Interval I);

// Scans m upward and returns the smallest block whose instance-checkable
// conditions hold (B_m > 0 and the ladder inequality (IV)); asymptotic
// conditions are evaluated and logged per m, and enforced in rigorous mode.
RotationBlock select_block(const GammaLadder& ladder, const InvariantSetSpec& X,
                           const InvariantSetSpec& Y, Interval I, Mode mode,
                           int64_t m_cap, uint64_t mem_cap = uint64_t(1) << 33);

struct OrbitReport {
  std::vector<double> orbit;       // R^n(0), iterated addition mod beta
  std::vector<int64_t> nm_prime;   // exact (nm)'
  double max_identity_residual = 0;
  size_t branch_mismatches = 0;    // (VII) float branch vs exact n' increments
};

// The orbit R^n(0) for n < N computed both ways, with the rotation
// identities verified; throws if the identity residual exceeds 1e-9.
OrbitReport rotation_orbit(const RotationBlock& block, int64_t N);

// Exact interval discrepancy of a finite sequence in [0,1), via the sorted
// endpoint-critical maximization.
double discrepancy(std::span<const double> xs);

struct VisitThresholdResult {
  int64_t N0 = 0;
  bool empirical = false;  // horizon reached without U*D_N <= eps holding
  double final_DN = 0;
};

// Smallest N0 with U * D_N <= eps for all N in [N0, horizon] on the actual
// orbit (empirical flag when no such N0 exists within the horizon).
VisitThresholdResult visit_threshold(const RotationBlock& block, int64_t U,
                                     double eps, int64_t horizon);

// The tree Gamma with levels Q_0, Q_m, ..., Q_Nm and parentage by rectangle
// containment, plus the construction-time verifications.
struct ProductTree {
  LevelTree tree;  // payload: (i, j) lattice indices per node
  int r = 0, s = 0;
  int64_t m = 0;
  int N = 0;
  std::vector<int64_t> nm_primes;  // (nm)' for n = 0..N
  double rho = 0, rbase = 0;
  bool containment_verified = false;
  size_t containment_failures = 0;
  double reference_content_V = 0;  // symbolic content two levels deeper
  double content_gamma4 = 0;       // H_{r^m}^{gamma4}(Gamma)
  bool content_claim_ok = false;   // content_gamma4 >= V
  ContentTable table_gamma4;
  // Max leaf-offset fractions within a height-h cell, per axis (exact DP
  // over the digit automata); drive the per-node separation policy.
  std::vector<double> fx, fy;  // indexed by height 0..N

  std::pair<double, double> node_coords(int level, uint32_t k) const;
};

ProductTree build_product_tree(const InvariantSetSpec& X, const InvariantSetSpec& Y,
                               const RotationBlock& block, int N,
                               const GammaLadder& ladder,
                               uint64_t mem_cap = uint64_t(1) << 33);

// Content of the product tree computed symbolically on automaton state
// pairs (no tree materialization); exact for any depth.
double product_tree_symbolic_content(const InvariantSetSpec& X,
                                     const InvariantSetSpec& Y,
                                     const RotationBlock& block, int N,
                                     double gamma);

enum class SepPolicy {
  kSpecC3,       // separate children at c3 * rho
  kPerNodeExact  // per-node measured bound (1 + 2(fx + e^{t+R^{n+1}} fy)) rho
};

struct ThinStats {
  size_t case_single_outside_J = 0;
  size_t case_single_few_children = 0;
  size_t case_extract = 0;
  size_t shortfalls = 0;  // extraction below ceil(rho^-gamma2)
};

struct ThinResult {
  Subtree tree;  // Gamma''
  ThinStats stats;
  std::vector<uint8_t> height_in_J;  // per height n < N
};

// The Marstrand thinning of Gamma': one child outside J or below the
// gamma3 fan-out, an extracted separated child set otherwise.
ThinResult marstrand_thin(const ProductTree& pt, const Subtree& gamma_prime,
                          const ContentTable& gp_content,
                          const GammaLadder& ladder, const RotationBlock& block,
                          double t, const DirectionSet& T,
                          const OrbitReport& orbit, SepPolicy policy);

struct LeafSeparationReport {
  bool pass = true;
  size_t pairs_checked = 0;
  double min_ratio = 0;  // min |proj gap| / rho^(lca_height+1)
  uint32_t witness_a = 0, witness_b = 0;
  bool sampled = false;
};

// Claim: leaves with last common ancestor at height n have projections at
// least rho^(n+1) apart. All pairs when <= 10^4 leaves, otherwise 10^5
// seeded random pairs.
LeafSeparationReport verify_leaf_separation(const ProductTree& pt,
                                            const Subtree& gamma_pp, double t,
                                            uint64_t seed);

struct BallBoundReport {
  bool pass = true;
  double worst_ratio = 0;  // max mu(B) / (kappa * delta^gamma)
  double witness_center = 0, witness_diameter = 0, witness_mass = 0;
  size_t balls_checked = 0;
};

// mu(B) <= kappa * delta^gamma over every critical ball (atom-endpoint
// intervals at diameters >= floor_delta). Exact: any violating ball has
// both endpoints at atoms within the scanned window.
BallBoundReport verify_ball_bound(std::span<const double> atoms,
                                  std::span<const double> masses, double kappa,
                                  double gamma, double floor_delta);

struct CertifiedRun {
  double t = 0;
  int N = 0;
  int64_t N0 = 0, N0_thinning = 0, N0_visit = 0;
  double kappa = 0;
  double certified_bound = 0;  // kappa^-1 when all checks pass, else 0
  double direct_content = 0;   // interval cover content of projected leaves
  Mode mode = Mode::kEmpirical;
  bool completed = false;  // chain ran to the end
  bool all_checks_passed = false;
  bool fertility_ok = false;
  bool flow_bound_ok = false;
  LeafSeparationReport leaf_separation;
  BallBoundReport ball_bound;
  // the projected leaf measure mu: atom positions with their flow masses
  std::vector<double> atoms;
  std::vector<double> atom_masses;
  size_t leaf_count = 0;
  size_t J_size = 0;  // |{n < N : R^n(0) in J}|
  size_t window_U = 0;
  double window_excluded = 0;
  ThinStats thin_stats;
  std::vector<std::string> downgrades;  // empirical substitutions / fallbacks
  std::string failure;                  // nonempty when not completed
};

struct EngineOptions {
  Mode mode = Mode::kEmpirical;
  int64_t m_cap = 16;
  int64_t forced_m = 0;  // 0 = auto
  uint64_t mem_cap = uint64_t(1) << 33;
  uint64_t seed = 1;
  int threads = 1;
  int dims_n_min = 2, dims_n_max = 12;
};

// Shared state for certifying many directions t against one product pair:
// the ladder, block, tree Gamma, regular subtree Gamma', and window T are
// t-independent and built once.
class CertifyEngine {
 public:
  CertifyEngine(const InvariantSetSpec& X, const InvariantSetSpec& Y,
                double gamma_target, Interval t_domain, int N,
                EngineOptions opt);

  const GammaLadder& ladder() const { return ladder_; }
  const RotationBlock& block() const { return block_; }
  const ProductTree& product_tree() const { return pt_; }
  const Subtree& gamma_prime() const { return gamma_prime_; }
  const GoodWindowResult& window() const { return window_; }
  const OrbitReport& orbit() const { return orbit_; }
  int64_t thinning_N0() const { return thinning_N0_; }
  double gamma5_tree() const { return gamma5_tree_; }
  const std::vector<std::string>& setup_downgrades() const { return setup_downgrades_; }
  const InvariantSetSpec& x_spec() const { return x_; }
  const InvariantSetSpec& y_spec() const { return y_; }

  // out_thin, when given, receives the thinned tree Gamma'' for reporting.
  CertifiedRun certify(double t, ThinResult* out_thin = nullptr) const;

 private:
  InvariantSetSpec x_, y_;
  EngineOptions opt_;
  Interval t_domain_;
  int N_;
  GammaLadder ladder_;
  RotationBlock block_;
  ProductTree pt_;
  Subtree gamma_prime_;
  ContentTable gp_content_;
  GoodWindowResult window_;
  OrbitReport orbit_;
  int64_t thinning_N0_ = 0;
  double gamma5_tree_ = 0;
  std::vector<std::string> setup_downgrades_;
};

// Direct entropy ratio of lambda*X_Nm + eta*Y_(Nm)', diameter-normalized:
// log N(A, diam(A) * r^-Nm) / (Nm log r).
struct SumsetEntropy {
  size_t entropy = 0;
  double ratio = 0;
  double diameter = 0;
};
SumsetEntropy sumset_entropy_ratio(const InvariantSetSpec& X,
                                   const InvariantSetSpec& Y, double lambda,
                                   double eta, int64_t total_x_digits,
                                   uint64_t mem_cap = uint64_t(1) << 33);

struct SweepParamRow {
  double lambda = 0, eta = 0, t = 0;
  size_t entropy = 0;
  double ratio = 0;
  bool x_reflected = false, y_reflected = false;
};

struct SweepResult {
  std::vector<CertifiedRun> runs;       // one per distinct t
  std::vector<SweepParamRow> params;    // one per (lambda, eta) pair
  double inf_ratio = 0, sup_ratio = 0;
  double inf_certified = 0;
  size_t downgrade_count = 0;
  bool all_completed = true;
};

struct SweepRegion {
  bool use_t_interval = false;
  Interval t;       // when use_t_interval
  int t_grid = 9;
  double lambda_min = 0, lambda_max = 0, eta_min = 0, eta_max = 0;
  int lambda_grid = 3, eta_grid = 3;
};

// The uniform sumset sweep: map the parameter region to log-slopes, certify
// each distinct t, and report the direct empirical dimension ratios with
// the grid infimum.
SweepResult sumset_sweep(const InvariantSetSpec& X, const InvariantSetSpec& Y,
                         const SweepRegion& region, double gamma_target, int N,
                         const EngineOptions& opt);

}  // namespace sumdim
