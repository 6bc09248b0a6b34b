#include "sumdim/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sumdim {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == ',' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw std::runtime_error("config line " + std::to_string(line) + ": " + what);
}

double to_double(const std::string& v, int line) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) fail(line, "trailing characters in number '" + v + "'");
    return d;
  } catch (const std::invalid_argument&) {
    fail(line, "expected a number, got '" + v + "'");
  } catch (const std::out_of_range&) {
    fail(line, "number out of range: '" + v + "'");
  }
}

int64_t to_int(const std::string& v, int line) {
  try {
    size_t pos = 0;
    int64_t d = std::stoll(v, &pos);
    if (pos != v.size()) fail(line, "trailing characters in integer '" + v + "'");
    return d;
  } catch (const std::invalid_argument&) {
    fail(line, "expected an integer, got '" + v + "'");
  } catch (const std::out_of_range&) {
    fail(line, "integer out of range: '" + v + "'");
  }
}

void parse_set_key(SetConfig& sc, const std::string& key, const std::string& value,
                   int line) {
  if (key == "base") {
    sc.base = int(to_int(value, line));
  } else if (key == "digits") {
    sc.digit_rule = true;
    sc.digits.clear();
    for (const std::string& tok : split_list(value))
      sc.digits.push_back(uint8_t(to_int(tok, line)));
    if (sc.digits.empty()) fail(line, "digits list is empty");
  } else if (key == "forbidden") {
    sc.digit_rule = false;
    sc.forbidden.clear();
    for (const std::string& tok : split_list(value)) {
      Word w;
      for (char c : tok) {
        if (!std::isdigit(static_cast<unsigned char>(c)))
          fail(line, "forbidden words must be digit strings (base <= 10)");
        w.push_back(uint8_t(c - '0'));
      }
      if (w.size() < 2) fail(line, "forbidden word '" + tok + "' shorter than 2");
      sc.forbidden.push_back(std::move(w));
    }
    if (sc.forbidden.empty()) fail(line, "forbidden list is empty");
  } else {
    fail(line, "unknown set key '" + key + "'");
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::string section;
  bool saw_x = false, saw_y = false;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      section = s.substr(1, s.size() - 2);
      if (section != "x" && section != "y" && section != "run")
        fail(line, "unknown section [" + section + "]");
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(line, "empty key");
    if (value.empty()) fail(line, "empty value for key '" + key + "'");
    if (section == "x") {
      saw_x = true;
      parse_set_key(cfg.x, key, value, line);
    } else if (section == "y") {
      saw_y = true;
      parse_set_key(cfg.y, key, value, line);
    } else if (section == "run") {
      if (key == "mode") {
        if (value != "rigorous" && value != "empirical")
          fail(line, "mode must be rigorous or empirical");
        cfg.mode = value;
      } else if (key == "gamma_target") {
        cfg.gamma_target = to_double(value, line);
      } else if (key == "N") {
        cfg.N = int(to_int(value, line));
      } else if (key == "m") {
        cfg.m = to_int(value, line);
      } else if (key == "m_cap") {
        cfg.m_cap = to_int(value, line);
      } else if (key == "seed") {
        cfg.seed = uint64_t(to_int(value, line));
      } else if (key == "mem_cap") {
        cfg.mem_cap = uint64_t(to_int(value, line));
      } else if (key == "threads") {
        cfg.threads = int(to_int(value, line));
      } else if (key == "n_min") {
        cfg.n_min = int(to_int(value, line));
      } else if (key == "n_max") {
        cfg.n_max = int(to_int(value, line));
      } else if (key == "content_gamma") {
        cfg.content_gamma = to_double(value, line);
      } else if (key == "rho") {
        cfg.rho = to_double(value, line);
      } else if (key == "delta") {
        cfg.delta = to_double(value, line);
      } else if (key == "m_count") {
        cfg.m_count = to_double(value, line);
      } else if (key == "grid_step") {
        cfg.grid_step = to_double(value, line);
      } else if (key == "t_min") {
        cfg.t_min = to_double(value, line);
        cfg.has_t_interval = true;
      } else if (key == "t_max") {
        cfg.t_max = to_double(value, line);
        cfg.has_t_interval = true;
      } else if (key == "t_grid") {
        cfg.t_grid = int(to_int(value, line));
      } else if (key == "lambda_min") {
        cfg.lambda_min = to_double(value, line);
      } else if (key == "lambda_max") {
        cfg.lambda_max = to_double(value, line);
      } else if (key == "eta_min") {
        cfg.eta_min = to_double(value, line);
      } else if (key == "eta_max") {
        cfg.eta_max = to_double(value, line);
      } else if (key == "lambda_grid") {
        cfg.lambda_grid = int(to_int(value, line));
      } else if (key == "eta_grid") {
        cfg.eta_grid = int(to_int(value, line));
      } else {
        fail(line, "unknown run key '" + key + "'");
      }
    } else {
      fail(line, "key outside any section");
    }
  }
  if (!saw_x || cfg.x.base < 2) throw std::runtime_error("config: section [x] missing or incomplete");
  if (!saw_y || cfg.y.base < 2) throw std::runtime_error("config: section [y] missing or incomplete");
  // validate numeric ranges before dispatch
  if (cfg.N < 0) throw std::runtime_error("config: N must be >= 0");
  if (cfg.n_min < 1 || cfg.n_max < cfg.n_min)
    throw std::runtime_error("config: bad n_min/n_max range");
  if (cfg.t_grid < 1 || cfg.lambda_grid < 1 || cfg.eta_grid < 1)
    throw std::runtime_error("config: grid counts must be >= 1");
  if (cfg.threads < 1) throw std::runtime_error("config: threads must be >= 1");
  make_spec(cfg.x);
  make_spec(cfg.y);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

std::string set_to_ini(const SetConfig& sc) {
  std::ostringstream os;
  os << "base = " << sc.base << "\n";
  if (sc.digit_rule) {
    os << "digits =";
    for (uint8_t d : sc.digits) os << " " << int(d);
    os << "\n";
  } else {
    os << "forbidden =";
    for (const Word& w : sc.forbidden) {
      os << " ";
      for (uint8_t d : w) os << int(d);
    }
    os << "\n";
  }
  return os.str();
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[x]\n" << set_to_ini(cfg.x);
  os << "[y]\n" << set_to_ini(cfg.y);
  os << "[run]\n";
  os << "mode = " << cfg.mode << "\n";
  os << "gamma_target = " << num(cfg.gamma_target) << "\n";
  os << "N = " << cfg.N << "\n";
  os << "m = " << cfg.m << "\n";
  os << "m_cap = " << cfg.m_cap << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "mem_cap = " << cfg.mem_cap << "\n";
  os << "threads = " << cfg.threads << "\n";
  os << "n_min = " << cfg.n_min << "\n";
  os << "n_max = " << cfg.n_max << "\n";
  os << "content_gamma = " << num(cfg.content_gamma) << "\n";
  os << "rho = " << num(cfg.rho) << "\n";
  os << "delta = " << num(cfg.delta) << "\n";
  os << "m_count = " << num(cfg.m_count) << "\n";
  os << "grid_step = " << num(cfg.grid_step) << "\n";
  if (cfg.has_t_interval) {
    os << "t_min = " << num(cfg.t_min) << "\n";
    os << "t_max = " << num(cfg.t_max) << "\n";
  }
  os << "t_grid = " << cfg.t_grid << "\n";
  os << "lambda_min = " << num(cfg.lambda_min) << "\n";
  os << "lambda_max = " << num(cfg.lambda_max) << "\n";
  os << "eta_min = " << num(cfg.eta_min) << "\n";
  os << "eta_max = " << num(cfg.eta_max) << "\n";
  os << "lambda_grid = " << cfg.lambda_grid << "\n";
  os << "eta_grid = " << cfg.eta_grid << "\n";
  return os.str();
}

InvariantSetSpec make_spec(const SetConfig& sc) {
  if (sc.digit_rule) return InvariantSetSpec(sc.base, DigitRule{sc.digits});
  return InvariantSetSpec(sc.base, SftRule{sc.forbidden});
}

Mode parse_mode(const std::string& mode) {
  if (mode == "rigorous") return Mode::kRigorous;
  if (mode == "empirical") return Mode::kEmpirical;
  throw std::runtime_error("unknown mode: " + mode);
}

EngineOptions engine_options(const RunConfig& cfg) {
  EngineOptions opt;
  opt.mode = parse_mode(cfg.mode);
  opt.m_cap = cfg.m_cap;
  opt.forced_m = cfg.m;
  opt.mem_cap = cfg.mem_cap;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  opt.dims_n_min = cfg.n_min;
  opt.dims_n_max = cfg.n_max;
  return opt;
}

SweepRegion sweep_region(const RunConfig& cfg) {
  SweepRegion reg;
  reg.use_t_interval = cfg.has_t_interval;
  reg.t = {cfg.t_min, cfg.t_max};
  reg.t_grid = cfg.t_grid;
  reg.lambda_min = cfg.lambda_min;
  reg.lambda_max = cfg.lambda_max;
  reg.eta_min = cfg.eta_min;
  reg.eta_max = cfg.eta_max;
  reg.lambda_grid = cfg.lambda_grid;
  reg.eta_grid = cfg.eta_grid;
  return reg;
}

}  // namespace sumdim
