#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cvxattn/config.hpp"
#include "cvxattn/data.hpp"
#include "cvxattn/linalg.hpp"
#include "cvxattn/report.hpp"
#include "cvxattn/rng.hpp"
#include "cvxattn/solvers.hpp"
#include "cvxattn/verify.hpp"

namespace fs = std::filesystem;
using namespace cvxattn;

namespace {

int thread_count() {
  const char* env = std::getenv("CVXATTN_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n > 0 ? n : 1;
}

EmbeddingBatch load_batch(const RunConfig& cfg, uint64_t seed) {
  if (!cfg.file.empty()) return read_embedding_file(cfg.file);
  if (cfg.recipe == "gaussian_classes")
    return gen_gaussian_classes(cfg.n, cfg.s, cfg.d, cfg.classes, cfg.separation, seed);
  if (cfg.recipe == "blockdiag_gram")
    return gen_blockdiag_gram(cfg.n, cfg.s, cfg.d, cfg.c, cfg.B, seed);
  throw std::runtime_error("unknown data recipe: " + cfg.recipe);
}

HeadSpec spec_from_config(const RunConfig& cfg, const EmbeddingBatch& batch,
                          uint64_t seed) {
  GenericMix mix;
  if (cfg.generic_h == "pool") {
    mix.kind = GenericMix::Kind::kPool;
    mix.pool = Matrix::Constant(batch.s, batch.s, 1.0 / batch.s);
  } else if (cfg.generic_h == "fnet") {
    mix.kind = GenericMix::Kind::kFnet;
  }
  ArrangementMode mode = cfg.arrangement_mode == "exhaustive" ? ArrangementMode::kExhaustive
                                                              : ArrangementMode::kSampled;
  return make_spec(cfg.kind, cfg.activation, batch, cfg.beta, cfg.loss, cfg.B, mode,
                   cfg.arrangement_budget, seed, cfg.gates, &mix);
}

int cmd_gen_data(const RunConfig& cfg, uint64_t seed, const std::string& out) {
  EmbeddingBatch batch = load_batch(cfg, seed);
  write_embedding_file(out, batch);
  std::cout << "wrote " << out << " (n=" << batch.n << " s=" << batch.s << " d=" << batch.d
            << " r=" << batch.r << " c=" << batch.c << ")\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, uint64_t seed) {
  EmbeddingBatch batch = load_batch(cfg, seed);
  HeadSpec spec = spec_from_config(cfg, batch, seed);
  SolverConfig scfg = cfg.solver;
  scfg.seed = seed;
  fs::create_directories(cfg.out_dir);

  ConvexVars vars;
  TrainReport report;
  if (cfg.parametrization == "bm" || cfg.activation == Activation::kRelu) {
    BMResult res = bm_solve(spec, batch, scfg);
    vars = res.vars;
    report = res.report;
  } else {
    FistaResult res = fista_solve(spec, batch, scfg);
    vars = res.vars;
    report = res.report;
  }

  double top1 = -1, top5 = -1;
  if (batch.r == 1) {
    std::vector<Matrix> preds = forward(spec, vars, batch);
    top1 = topk_accuracy(preds, batch.Y, 1);
    top5 = topk_accuracy(preds, batch.Y, std::min(5, batch.c));
  }
  write_report(cfg.out_dir + "/report.json", report, top1, top5);
  write_convex_vars(cfg.out_dir + "/vars.bin", vars);
  std::cout << "loss " << report.loss << " reg " << report.reg << " total " << report.total
            << " mode " << report.mode << "\n";
  if (top1 >= 0) std::cout << "top-1 " << top1 << " top-5 " << top5 << "\n";
  if (report.diverged) {
    std::cerr << "solver diverged (recorded in report)\n";
    return 1;
  }
  return 0;
}

int cmd_verify(const std::string& suite, uint64_t seed) {
  std::vector<CheckResult> checks = verify_suite(suite, seed);
  bool all_pass = true;
  for (const CheckResult& r : checks) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.detail
              << ")\n";
    if (!r.pass) all_pass = false;
  }
  std::cout << (all_pass ? "all checks passed" : "some checks FAILED") << "\n";
  return all_pass ? 0 : 1;
}

int cmd_map(const RunConfig& cfg, const std::string& direction, const std::string& in,
            const std::string& out, uint64_t seed) {
  EmbeddingBatch batch = load_batch(cfg, seed);
  HeadSpec spec = spec_from_config(cfg, batch, seed);
  if (direction == "c2n") {
    ConvexVars vars = read_convex_vars(in);
    double cvx = objective(spec, vars, batch).total;
    NonconvexWeights w = map_convex_to_nonconvex(spec, vars);
    double ncv = nc_objective(spec, w, batch);
    write_nc_weights(out, w);
    std::cout << "convex total " << cvx << " non-convex total " << ncv << " gap "
              << std::abs(cvx - ncv) << "\n";
  } else if (direction == "n2c") {
    NonconvexWeights w = read_nc_weights(in);
    double ncv = nc_objective(spec, w, batch);
    ConvexVars vars = map_nonconvex_to_convex(spec, w);
    double cvx = objective(spec, vars, batch).total;
    write_convex_vars(out, vars);
    std::cout << "non-convex total " << ncv << " convex total " << cvx << " gap "
              << std::abs(cvx - ncv) << "\n";
  } else {
    throw std::runtime_error("map direction must be c2n or n2c");
  }
  return 0;
}

int cmd_enumerate(const RunConfig& cfg, uint64_t seed, const std::string& out) {
  EmbeddingBatch batch = load_batch(cfg, seed);
  GenericMix mix;
  ArrangementMode mode = cfg.arrangement_mode == "exhaustive" ? ArrangementMode::kExhaustive
                                                              : ArrangementMode::kSampled;
  EffectiveData data = effective_data(cfg.kind, batch, &mix, cfg.B, 0);
  ArrangementSet set = enumerate_arrangements(data, mode, cfg.arrangement_budget, seed);
  if (!out.empty()) write_arrangements(out, set);
  std::cout << set.masks.size() << " arrangements (effective rank " << set.effective_rank
            << ", bound " << cardinality_bound(set.effective_rank, data.X.rows())
            << ")\n";
  return 0;
}

int cmd_ball(int dim, int count, uint64_t seed, const std::string& kspec,
             const std::string& out) {
  Matrix K;
  if (kspec == "identity") {
    K = Matrix::Identity(dim, dim);
  } else if (kspec == "none") {
    K = Matrix::Zero(0, dim);
  } else {
    Rng rng(seed ^ 0xb5297a4dULL);
    K = rng.gaussian_matrix(dim, dim);
  }
  std::vector<BallSample> samples = sample_constrained_ball(K, count, seed);
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write: " + out);
  f << "z1,z2,z3,z4,label\n";
  for (const BallSample& s : samples) {
    Vector z = vec(s.Z);
    f << z(0);
    for (Eigen::Index i = 1; i < z.size(); ++i) f << "," << z(i);
    f << "," << (s.extreme ? "extreme" : "hull") << "\n";
  }
  std::cout << "wrote " << samples.size() << " samples to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Eigen::setNbThreads(thread_count());
  CLI::App app{"Convex reformulations of token-mixing heads"};
  app.require_subcommand(1);

  std::string config_path, out_path, mode_arg, preset, suite = "all";
  std::string direction, in_path;
  uint64_t seed = 0;
  int ball_dim = 2, ball_count = 200;
  std::string ball_k = "identity";

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "key=value config file");
    if (needs_config) opt->required();
    sub->add_option("--seed", seed, "rng seed");
    sub->add_option("--preset", preset, "named preset (paper)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate an embedding file");
  add_common(gen, true);
  gen->add_option("--out", out_path, "output file")->required();

  CLI::App* train = app.add_subcommand("train", "solve a convex head");
  add_common(train, true);
  train->add_option("--out", out_path, "output directory (overrides config)");

  CLI::App* verify = app.add_subcommand("verify", "run verification suites");
  add_common(verify, false);
  verify->add_option("--mode", suite,
                     "suite: mappings|equivalence|fno-lemma|blockdiag|grad|prox|"
                     "arrangements|all");

  CLI::App* map_cmd = app.add_subcommand("map", "convert convex <-> non-convex weights");
  add_common(map_cmd, true);
  map_cmd->add_option("--mode", direction, "c2n or n2c")->required();
  map_cmd->add_option("--in", in_path, "input weights file")->required();
  map_cmd->add_option("--out", out_path, "output weights file")->required();

  CLI::App* enum_cmd = app.add_subcommand("enumerate", "enumerate arrangements");
  add_common(enum_cmd, true);
  enum_cmd->add_option("--out", out_path, "arrangement output file");

  CLI::App* ball = app.add_subcommand("ball", "sample the constrained nuclear-norm ball");
  ball->add_option("--dim", ball_dim, "square matrix dimension");
  ball->add_option("--count", ball_count, "number of samples");
  ball->add_option("--seed", seed, "rng seed");
  ball->add_option("--k", ball_k, "constraint: identity|none|random");
  ball->add_option("--out", out_path, "output csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (preset == "paper") apply_paper_preset(cfg);
    else if (!preset.empty()) throw std::runtime_error("unknown preset: " + preset);

    if (gen->parsed()) return cmd_gen_data(cfg, seed, out_path);
    if (train->parsed()) {
      if (!out_path.empty()) cfg.out_dir = out_path;
      return cmd_train(cfg, seed);
    }
    if (verify->parsed()) return cmd_verify(suite, seed);
    if (map_cmd->parsed()) return cmd_map(cfg, direction, in_path, out_path, seed);
    if (enum_cmd->parsed()) return cmd_enumerate(cfg, seed, out_path);
    if (ball->parsed()) return cmd_ball(ball_dim, ball_count, seed, ball_k, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
