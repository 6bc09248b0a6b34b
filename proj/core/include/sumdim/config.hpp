#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sumdim/invariant_set.hpp"
#include "sumdim/pipeline.hpp"

namespace sumdim {

struct SetConfig {
  int base = 0;
  bool digit_rule = true;
  std::vector<uint8_t> digits;
  std::vector<Word> forbidden;
};

// One run document: sections [x], [y], [run]. Parses and serializes
// round-trip (serialize(parse(s)) is a fixed point).
struct RunConfig {
  SetConfig x, y;

  std::string mode = "empirical";  // or "rigorous"
  double gamma_target = 0.5;
  int N = 3;
  int64_t m = 0;       // forced block size; 0 = auto
  int64_t m_cap = 16;  // scan limit for auto selection
  uint64_t seed = 1;
  uint64_t mem_cap = uint64_t(1) << 33;
  int threads = 1;

  int n_min = 1, n_max = 12;   // dims / content level range
  double content_gamma = 0;     // 0 = use the fitted slope

  double rho = 0.03125;         // marstrand sweep scale
  double delta = 0.5;
  double m_count = 4;           // heavy-bin count
  double grid_step = 0;         // 0 = rho/2

  bool has_t_interval = false;
  double t_min = -0.7, t_max = 0.7;
  int t_grid = 9;
  double lambda_min = 0.5, lambda_max = 2.0;
  double eta_min = 0.5, eta_max = 2.0;
  int lambda_grid = 3, eta_grid = 3;
};

// Throws std::runtime_error with line/field diagnostics on malformed input.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

InvariantSetSpec make_spec(const SetConfig& sc);

Mode parse_mode(const std::string& mode);

EngineOptions engine_options(const RunConfig& cfg);

SweepRegion sweep_region(const RunConfig& cfg);

}  // namespace sumdim
