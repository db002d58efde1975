#pragma once

#include <stdexcept>
#include <vector>

#include "cvxattn/heads.hpp"
#include "cvxattn/types.hpp"

namespace cvxattn {

// One non-convex neuron/head. Shapes per architecture:
// sa: W1 d x d, W2 d x c | mixer: W1 s x s, W2 d x c (sigma(W1 X) W2) |
// fno: W1 sd x 1, W2 c x 1 | bfno block: W1 sd/B x 1, W2 c/B x 1 |
// generic: W1 d x 1, W2 c x 1.
struct WeightPair {
  Matrix W1, W2;
  int gate_index = -1;  // gated heads: which fixed gate drives this pair
};

struct NonconvexWeights {
  std::vector<std::vector<WeightPair>> pairs;  // [block][j]
};

std::vector<Matrix> nc_forward(const HeadSpec& spec, const NonconvexWeights& w,
                               const EmbeddingBatch& batch);
double nc_objective(const HeadSpec& spec, const NonconvexWeights& w,
                    const EmbeddingBatch& batch);

// Gradient of the full non-convex objective (loss + weight decay).
NonconvexWeights nc_gradient(const HeadSpec& spec, const NonconvexWeights& w,
                             const EmbeddingBatch& batch);

NonconvexWeights random_weights(const HeadSpec& spec, int m, uint64_t seed);
NonconvexWeights zero_weights(const HeadSpec& spec, int m);

// ReLU mapping failure: the SVD factorization of some Z violates its cone.
struct ConeViolationError : std::runtime_error {
  double magnitude;
  explicit ConeViolationError(double mag)
      : std::runtime_error("cone-violating factorization, max violation " +
                           std::to_string(mag)),
        magnitude(mag) {}
};

// ReLU mapping failure: a weight pair realizes an activation pattern that is
// not in the arrangement set.
struct PatternMissError : std::runtime_error {
  std::string pattern;
  explicit PatternMissError(std::string pat)
      : std::runtime_error("activation pattern not in arrangement set: " + pat),
        pattern(std::move(pat)) {}
};

// SVD-based construction: Z = sum sigma_j u_j v_j^T maps to pairs
// (sqrt(sigma_j) reshape(u_j), sqrt(sigma_j) reshape(v_j)^T). The mapped
// non-convex objective equals the convex objective. ReLU heads require each
// u_j to be cone-feasible for its arrangement (throws ConeViolationError).
NonconvexWeights map_convex_to_nonconvex(const HeadSpec& spec, const ConvexVars& vars);

// Z = sum vec(W1_j) vec(W2_j^T)^T, grouped by arrangement for ReLU/gated
// heads (throws PatternMissError when a realized pattern is absent).
ConvexVars map_nonconvex_to_convex(const HeadSpec& spec, const NonconvexWeights& w);

}  // namespace cvxattn
