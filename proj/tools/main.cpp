#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sumdim/config.hpp"
#include "sumdim/content.hpp"
#include "sumdim/invariant_set.hpp"
#include "sumdim/pipeline.hpp"
#include "sumdim/projection.hpp"

namespace fs = std::filesystem;
using namespace sumdim;

namespace {

std::string fnum(double v, const char* fmt = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void write_manifest(const fs::path& dir, const RunConfig& cfg,
                    const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ostringstream os;
  os << serialize_config(cfg);
  os << "[result]\n";
  os << "command = " << command << "\n";
  for (const auto& [k, v] : extra) os << k << " = " << v << "\n";
  write_file(dir / "manifest.ini", os.str());
}

std::string mode_name(Mode m) {
  return m == Mode::kRigorous ? "rigorous" : "empirical";
}

int run_dims(const RunConfig& cfg, const fs::path& out) {
  std::ostringstream csv;
  csv << "set,n,count,ratio,slope\n";
  for (const char* which : {"x", "y"}) {
    const SetConfig& sc = which[0] == 'x' ? cfg.x : cfg.y;
    InvariantSetSpec spec = make_spec(sc);
    DimensionFit fit = dimension_estimate(spec, cfg.n_min, cfg.n_max);
    for (size_t k = 0; k < fit.levels.size(); ++k) {
      csv << which << "," << fit.levels[k] << ","
          << count_words(spec, fit.levels[k]).get_str() << ","
          << fnum(fit.ratios[k]) << "," << fnum(fit.slope, "%.6f") << "\n";
    }
  }
  write_file(out / "dims.csv", csv.str());
  write_manifest(out, cfg, "dims", {});
  return 0;
}

int run_content(const RunConfig& cfg, const fs::path& out) {
  std::ostringstream csv;
  csv << "set,n,rho,count,entropy,gamma,content\n";
  for (const char* which : {"x", "y"}) {
    const SetConfig& sc = which[0] == 'x' ? cfg.x : cfg.y;
    InvariantSetSpec spec = make_spec(sc);
    DimensionFit fit = dimension_estimate(spec, cfg.n_min, cfg.n_max);
    const double gamma = cfg.content_gamma > 0 ? cfg.content_gamma : fit.slope;
    CoverCertificate last_cover;
    for (int n = cfg.n_min; n <= cfg.n_max; ++n) {
      if (count_words(spec, n) > 16384) break;  // the cover DP is quadratic
      LatticeSet xn = enumerate_approximation(spec, n);
      const double rho = std::pow(double(spec.base()), -n);
      auto pts = xn.points();
      size_t entropy = metric_entropy(pts, rho);
      auto cc = interval_cover_content(pts, rho, gamma);
      last_cover = cc.certificate;
      csv << which << "," << n << "," << fnum(rho) << "," << xn.size() << ","
          << entropy << "," << fnum(gamma) << "," << fnum(cc.cost) << "\n";
    }
    write_file(out / (std::string("cover_") + which + ".csv"), last_cover.to_csv());
  }
  write_file(out / "content.csv", csv.str());
  write_manifest(out, cfg, "content", {});
  return 0;
}

int run_marstrand(const RunConfig& cfg, const fs::path& out) {
  InvariantSetSpec X = make_spec(cfg.x);
  InvariantSetSpec Y = make_spec(cfg.y);
  const int64_t np = n_prime(cfg.N, X.base(), Y.base());
  PlanarLatticeSet Q = product_grid(enumerate_approximation(X, cfg.N),
                                    enumerate_approximation(Y, int(np)), cfg.mem_cap);
  std::vector<Point2> pts;
  for (auto [x, y] : Q.coords()) pts.push_back({x, y});
  DimensionFit fx = dimension_estimate(X, cfg.n_min, cfg.n_max);
  DimensionFit fy = dimension_estimate(Y, cfg.n_min, cfg.n_max);
  const double gamma = cfg.content_gamma > 0 ? cfg.content_gamma : fx.slope + fy.slope;
  auto qc = verify_separated_concentration_2d(pts, cfg.rho, gamma, 1.0);
  const double grid = cfg.grid_step > 0 ? cfg.grid_step : cfg.rho / 2;
  ExceptionalResult res = exceptional_directions(pts, cfg.rho, cfg.delta,
                                                 cfg.m_count, grid, gamma,
                                                 std::max(1.0, qc.measured_c),
                                                 cfg.threads);
  write_file(out / "exceptional.csv", res.directions.to_csv("theta"));
  write_file(out / "marstrand.csv",
             MarstrandBoundReport::csv_header() + "\n" + res.report.to_csv_row() + "\n");
  write_manifest(out, cfg, "marstrand",
                 {{"measured_NE", std::to_string(res.report.measured)},
                  {"bound", fnum(res.report.bound)},
                  {"fitted", fnum(res.report.fitted)}});
  return 0;
}

int run_tree(const RunConfig& cfg, const fs::path& out) {
  InvariantSetSpec X = make_spec(cfg.x);
  InvariantSetSpec Y = make_spec(cfg.y);
  CertifyEngine eng(X, Y, cfg.gamma_target,
                    {cfg.t_min, cfg.t_max}, cfg.N, engine_options(cfg));
  const double t = cfg.has_t_interval ? (cfg.t_min + cfg.t_max) / 2 : 0.0;
  ThinResult thin;
  CertifiedRun run = eng.certify(t, &thin);

  std::ostringstream csv;
  csv << "level,nodes,gamma_prime_nodes,gamma_pp_nodes,level_cut_cost\n";
  const ProductTree& pt = eng.product_tree();
  for (int n = 0; n <= pt.N; ++n) {
    const double cut_cost =
        double(pt.tree.level_size(n)) * std::pow(pt.rbase, -n * eng.ladder().gamma4);
    csv << n << "," << pt.tree.level_size(n) << ","
        << eng.gamma_prime().kept_count(n) << ","
        << (run.completed ? thin.tree.kept_count(n) : 0) << ","
        << fnum(cut_cost) << "\n";
  }
  write_file(out / "tree_levels.csv", csv.str());

  std::ostringstream cut;
  cut << "level,index\n";
  for (const NodeId& nid : minimal_cut(Subtree::full(pt.tree), pt.rbase,
                                       eng.ladder().gamma4))
    cut << nid.level << "," << nid.index << "\n";
  write_file(out / "tree_cut.csv", cut.str());

  if (run.completed && thin.tree.kept_node_count() <= 500)
    write_file(out / "tree.dot", to_dot(thin.tree));

  write_manifest(out, cfg, "tree",
                 {{"t", fnum(t)},
                  {"m", std::to_string(eng.block().m)},
                  {"content_gamma4", fnum(pt.content_gamma4)},
                  {"reference_V", fnum(pt.reference_content_V)},
                  {"content_claim_ok", pt.content_claim_ok ? "1" : "0"},
                  {"N0", std::to_string(run.N0)},
                  {"completed", run.completed ? "1" : "0"},
                  {"all_checks_passed", run.all_checks_passed ? "1" : "0"},
                  {"certified_bound", fnum(run.certified_bound)},
                  {"mode", mode_name(run.mode)}});
  if (!run.completed) return 1;
  return run.downgrades.empty() && run.all_checks_passed ? 0 : 2;
}

std::string sweep_svg(const std::vector<SweepParamRow>& rows) {
  // dimension ratio against t, as a self-contained polyline plot
  const int W = 640, H = 420, ML = 70, MB = 50, MT = 20, MR = 20;
  std::vector<std::pair<double, double>> pts;
  for (const SweepParamRow& r : rows) pts.emplace_back(r.t, r.ratio);
  std::sort(pts.begin(), pts.end());
  double tmin = pts.front().first, tmax = pts.back().first;
  if (tmax - tmin < 1e-12) {
    tmin -= 0.5;
    tmax += 0.5;
  }
  double rmin = 0.0, rmax = 1.1;
  for (auto& [t, r] : pts) rmax = std::max(rmax, r + 0.05);
  auto px = [&](double t) {
    return ML + (t - tmin) / (tmax - tmin) * (W - ML - MR);
  };
  auto py = [&](double r) {
    return H - MB - (r - rmin) / (rmax - rmin) * (H - MB - MT);
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
     << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR
     << "\" y2=\"" << H - MB << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\""
     << H - MB << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    double t = tmin + (tmax - tmin) * k / 5;
    os << "<text x=\"" << px(t) << "\" y=\"" << H - MB + 18
       << "\" font-size=\"11\" text-anchor=\"middle\">" << fnum(t, "%.3g")
       << "</text>\n";
    double r = rmin + (rmax - rmin) * k / 5;
    os << "<text x=\"" << ML - 8 << "\" y=\"" << py(r) + 4
       << "\" font-size=\"11\" text-anchor=\"end\">" << fnum(r, "%.3g")
       << "</text>\n";
  }
  os << "<text x=\"" << (ML + W - MR) / 2 << "\" y=\"" << H - 12
     << "\" font-size=\"12\" text-anchor=\"middle\">t = log(eta/lambda)</text>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (auto& [t, r] : pts) os << px(t) << "," << py(r) << " ";
  os << "\"/>\n";
  for (auto& [t, r] : pts)
    os << "<circle cx=\"" << px(t) << "\" cy=\"" << py(r)
       << "\" r=\"3\" fill=\"firebrick\"/>\n";
  os << "</svg>\n";
  return os.str();
}

int run_sweep(const RunConfig& cfg, const fs::path& out) {
  InvariantSetSpec X = make_spec(cfg.x);
  InvariantSetSpec Y = make_spec(cfg.y);
  SweepResult res = sumset_sweep(X, Y, sweep_region(cfg), cfg.gamma_target, cfg.N,
                                 engine_options(cfg));

  std::ostringstream csv;
  csv << "t,mode,completed,N0,U,excluded_measure,J_size,shortfalls,leaf_count,"
         "fertility_ok,leafsep_ok,ballbound_ok,certified_bound,direct_content\n";
  for (const CertifiedRun& r : res.runs) {
    csv << fnum(r.t) << "," << mode_name(r.mode) << "," << (r.completed ? 1 : 0)
        << "," << r.N0 << "," << r.window_U << "," << fnum(r.window_excluded) << ","
        << r.J_size << "," << r.thin_stats.shortfalls << "," << r.leaf_count << ","
        << (r.fertility_ok ? 1 : 0) << "," << (r.leaf_separation.pass ? 1 : 0) << ","
        << (r.ball_bound.pass ? 1 : 0) << "," << fnum(r.certified_bound) << ","
        << fnum(r.direct_content) << "\n";
  }
  write_file(out / "sweep.csv", csv.str());

  std::ostringstream pcsv;
  pcsv << "lambda,eta,t,entropy,ratio\n";
  for (const SweepParamRow& r : res.params)
    pcsv << fnum(r.lambda) << "," << fnum(r.eta) << "," << fnum(r.t) << ","
         << r.entropy << "," << fnum(r.ratio) << "\n";
  write_file(out / "params.csv", pcsv.str());

  std::ostringstream sum;
  sum << "inf_ratio,sup_ratio,inf_certified,downgrades,all_completed\n";
  sum << fnum(res.inf_ratio) << "," << fnum(res.sup_ratio) << ","
      << fnum(res.inf_certified) << "," << res.downgrade_count << ","
      << (res.all_completed ? 1 : 0) << "\n";
  write_file(out / "summary.csv", sum.str());

  if (!res.params.empty()) write_file(out / "plot.svg", sweep_svg(res.params));
  write_manifest(out, cfg, "sweep",
                 {{"inf_ratio", fnum(res.inf_ratio)},
                  {"sup_ratio", fnum(res.sup_ratio)},
                  {"inf_certified", fnum(res.inf_certified)},
                  {"downgrades", std::to_string(res.downgrade_count)}});
  if (!res.all_completed) return 1;
  bool clean = res.downgrade_count == 0;
  for (const CertifiedRun& r : res.runs) clean = clean && r.all_checks_passed;
  return clean ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete fractal sumset laboratory"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string mode_override;
  std::string out_dir = "out";
  int threads = 0;
  uint64_t seed = 0;
  uint64_t mem_cap = 0;
  bool have_seed = false, have_mem = false;

  app.add_option("--config", config_path, "run configuration file")->required();
  app.add_option("--mode", mode_override, "rigorous|empirical (overrides config)");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "random seed (overrides config)")
      ->each([&](const std::string&) { have_seed = true; });
  app.add_option("--mem-cap", mem_cap, "memory cap in bytes (overrides config)")
      ->each([&](const std::string&) { have_mem = true; });

  auto* dims = app.add_subcommand("dims", "dimension estimates per set");
  auto* content = app.add_subcommand("content", "entropy/content tables over scales");
  auto* marstrand = app.add_subcommand("marstrand", "exceptional-direction sweep");
  auto* tree = app.add_subcommand("tree", "build/regularize/thin a product tree");
  auto* sweep = app.add_subcommand("sweep", "full sumset sweep with certification");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (!mode_override.empty()) {
      if (mode_override != "rigorous" && mode_override != "empirical")
        throw std::runtime_error("--mode must be rigorous or empirical");
      cfg.mode = mode_override;
    }
    if (threads > 0) cfg.threads = threads;
    if (have_seed) cfg.seed = seed;
    if (have_mem) cfg.mem_cap = mem_cap;

    fs::path out(out_dir);
    fs::create_directories(out);

    if (dims->parsed()) return run_dims(cfg, out);
    if (content->parsed()) return run_content(cfg, out);
    if (marstrand->parsed()) return run_marstrand(cfg, out);
    if (tree->parsed()) return run_tree(cfg, out);
    if (sweep->parsed()) return run_sweep(cfg, out);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
