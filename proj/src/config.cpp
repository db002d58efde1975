#include "cvxattn/config.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cvxattn {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    std::string full = section.empty() ? key : section + "." + key;
    if (kv.count(full))
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": duplicate key " + full);
    kv[full] = val;
  }
  return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

namespace {

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw std::runtime_error("config key " + key + ": not an integer: " + v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw std::runtime_error("config key " + key + ": not a number: " + v);
  }
}

}  // namespace

RunConfig run_config_from_map(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  for (const auto& [key, val] : kv) {
    if (key == "head.kind") cfg.kind = head_kind_from_string(val);
    else if (key == "head.activation") cfg.activation = activation_from_string(val);
    else if (key == "head.beta") cfg.beta = to_double(key, val);
    else if (key == "head.loss") cfg.loss = loss_from_string(val);
    else if (key == "head.B") cfg.B = to_int(key, val);
    else if (key == "head.parametrization") cfg.parametrization = val;
    else if (key == "head.arrangement_mode") cfg.arrangement_mode = val;
    else if (key == "head.arrangement_budget") cfg.arrangement_budget = to_int(key, val);
    else if (key == "head.gates") cfg.gates = to_int(key, val);
    else if (key == "head.generic_h") cfg.generic_h = val;
    else if (key == "head.m") cfg.m = to_int(key, val);
    else if (key == "data.file") cfg.file = val;
    else if (key == "data.recipe") cfg.recipe = val;
    else if (key == "data.classes") cfg.classes = to_int(key, val);
    else if (key == "data.separation") cfg.separation = to_double(key, val);
    else if (key == "data.n") cfg.n = to_int(key, val);
    else if (key == "data.s") cfg.s = to_int(key, val);
    else if (key == "data.d") cfg.d = to_int(key, val);
    else if (key == "data.c") cfg.c = to_int(key, val);
    else if (key == "data.r") cfg.r = to_int(key, val);
    else if (key == "solver.max_iters") cfg.solver.max_iters = to_int(key, val);
    else if (key == "solver.rel_tol") cfg.solver.rel_tol = to_double(key, val);
    else if (key == "solver.restarts") cfg.solver.restarts = to_int(key, val);
    else if (key == "solver.rank_budget") cfg.solver.rank_budget = to_int(key, val);
    else if (key == "solver.seed") cfg.solver.seed = static_cast<uint64_t>(to_int(key, val));
    else if (key == "output.dir") cfg.out_dir = val;
    else throw std::runtime_error("unknown config key: " + key);
  }
  if (cfg.parametrization != "dense" && cfg.parametrization != "bm")
    throw std::runtime_error("head.parametrization must be dense or bm");
  if (cfg.arrangement_mode != "exhaustive" && cfg.arrangement_mode != "sampled")
    throw std::runtime_error("head.arrangement_mode must be exhaustive or sampled");
  if (cfg.generic_h != "identity" && cfg.generic_h != "pool" && cfg.generic_h != "fnet")
    throw std::runtime_error("head.generic_h must be identity, pool, or fnet");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_map(parse_config_file(path));
}

void apply_paper_preset(RunConfig& cfg) {
  cfg.beta = 2e-2;
  cfg.B = 5;
  cfg.m = cfg.kind == HeadKind::kSelfAttention ? 5 : 100;
  std::cerr << "warning: preset step-decay schedule has no FISTA equivalent; ignored\n";
}

}  // namespace cvxattn
