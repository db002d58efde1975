#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cvxattn/heads.hpp"
#include "cvxattn/nonconvex.hpp"
#include "cvxattn/norms.hpp"

namespace cvxattn {

struct SolverConfig {
  int max_iters = 5000;
  double rel_tol = 1e-11;  // stop when relative objective change stays below this
  int restarts = 20;       // bm_solve / nc_solve
  int rank_budget = 8;     // bm_solve latent dimension b
  uint64_t seed = 0;
  double init_scale = 0.3;
  double sufficient_decrease = 1e-4;  // backtracking line-search constant
};

struct TrainReport {
  std::vector<double> trace;  // objective after each iteration
  double loss = 0.0, reg = 0.0, total = 0.0;
  bool certificate_pass = false;  // BM runs only
  double certificate_norm = 0.0;  // max spectral norm of summed loss gradients
  std::string mode;               // "exact" (exhaustive/linear/gated) or "restricted"
  double wall_time_s = 0.0;
  uint64_t seed = 0;
  int iterations = 0;
  bool diverged = false;
};

// Accelerated proximal gradient with singular-value-thresholding prox,
// Nesterov momentum, adaptive restart on objective increase, and backtracking
// line search. Linear and gated heads only (plain nuclear norm regularizer).
struct FistaResult {
  ConvexVars vars;
  TrainReport report;
};
FistaResult fista_solve(const HeadSpec& spec, const EmbeddingBatch& batch,
                        const SolverConfig& config);

// Burer-Monteiro Z = U V^T with (beta/2)(||U||^2 + ||V||^2); cone projection
// of U's columns each step for ReLU heads; best of `restarts` random starts;
// the optimality certificate is evaluated at the returned point.
struct BMVars {
  std::vector<std::vector<BMFactors>> f;  // parallel to ConvexVars::Z
  ConvexVars to_vars() const;
};
struct BMResult {
  BMVars factors;
  ConvexVars vars;
  TrainReport report;
};
BMResult bm_solve(const HeadSpec& spec, const EmbeddingBatch& batch,
                  const SolverConfig& config);

// Realize BM factors as non-convex weights, one pair per nonzero factor
// column. Uses the raw columns rather than an SVD of the product: the solver
// keeps U's columns cone-feasible for ReLU heads, and an SVD re-factorization
// would not preserve that.
NonconvexWeights bm_to_nonconvex(const HeadSpec& spec, const BMVars& factors);

// Multi-restart full-batch gradient descent on the non-convex reference head
// with m neurons per block; returns the best restart.
struct NcResult {
  NonconvexWeights weights;
  TrainReport report;
};
NcResult nc_solve(const HeadSpec& spec, const EmbeddingBatch& batch,
                  const SolverConfig& config, int m);

// Max relative error between analytic_grad and central finite differences of
// f, over up to 50 randomly chosen coordinates.
double grad_check(const std::function<double(const Vector&)>& f, const Vector& x,
                  const Vector& analytic_grad, double eps, uint64_t seed = 0);

// "exact" when every arrangement set is provably complete (or no arrangements
// are involved); "restricted" for sampled ReLU sets.
std::string program_mode(const HeadSpec& spec);

}  // namespace cvxattn
