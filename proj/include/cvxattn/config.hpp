#pragma once

#include <map>
#include <string>

#include "cvxattn/heads.hpp"
#include "cvxattn/solvers.hpp"

namespace cvxattn {

// Flat key=value config with [section] headers; unknown keys are errors.
// Keys are stored as "section.key".
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> parse_config_file(const std::string& path);

struct RunConfig {
  // [head]
  HeadKind kind = HeadKind::kMixer;
  Activation activation = Activation::kLinear;
  double beta = 1e-3;
  Loss loss = Loss::kCrossEntropy;
  int B = 1;
  std::string parametrization = "dense";      // dense | bm
  std::string arrangement_mode = "sampled";   // exhaustive | sampled
  int arrangement_budget = 1000;
  int gates = 16;                              // gated: number of random gates
  std::string generic_h = "identity";          // identity | pool | fnet
  int m = 20;                                  // non-convex heads / gates
  // [data]
  std::string file;                            // embedding file; empty -> recipe
  std::string recipe = "gaussian_classes";
  int classes = 3;
  double separation = 5.0;
  int n = 60, s = 4, d = 6, c = 3, r = 1;
  // [solver]
  SolverConfig solver;
  // [output]
  std::string out_dir = "out";
};

// Validates every key; throws with the offending key name on anything
// unknown or malformed.
RunConfig run_config_from_map(const std::map<std::string, std::string>& kv);
RunConfig load_run_config(const std::string& path);

// The experimental defaults surfaced as a preset (beta=2e-2, m=100, B=5,
// self-attention m=5). Step-schedule knobs from the original setup have no
// FISTA equivalent and are ignored with a warning.
void apply_paper_preset(RunConfig& cfg);

}  // namespace cvxattn
