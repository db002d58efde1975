#pragma once

#include <vector>

#include "cvxattn/arrangements.hpp"
#include "cvxattn/types.hpp"

namespace cvxattn {

// Which convex program we are in: architecture, activation, dims, loss,
// regularization strength, and (for ReLU / gated heads) the arrangement sets,
// one per block (B-FNO has one per feature group, everything else one total).
struct HeadSpec {
  HeadKind kind = HeadKind::kGenericH;
  Activation activation = Activation::kLinear;
  int s = 1, d = 1, c = 1, r = 1;
  int B = 1;  // bfno feature groups
  double beta = 0.0;
  Loss loss = Loss::kSquared;
  GenericMix mix;                            // generic_h only
  std::vector<std::vector<int>> partition;   // sa_blockdiag feature groups
  std::vector<ArrangementSet> arrangements;  // relu / gated only

  void validate() const;
  int num_blocks() const;
  // Z shape for one block of this head:
  // sa d^2 x dc | sa_blockdiag d_b*d x d_b*c | mixer s^2 x dc (permuted
  // layout, blocks Z~^{(t,k)} in R^{s x c}) | fno sd x c | bfno sd/B x c/B |
  // generic d x c.
  std::pair<int, int> z_shape(int block) const;
  int num_terms(int block) const;  // arrangements per block; 1 when linear
  int sample_block_rows() const;   // rows of effective data per sample
};

// Dense convex variables: Z[block][arrangement term].
struct ConvexVars {
  std::vector<std::vector<Matrix>> Z;
};

ConvexVars zero_vars(const HeadSpec& spec);

// ---- forward maps (one exported op per program, plus an independent
// reference evaluation path used to cross-check each primary path) ----

std::vector<Matrix> forward_sa_linear(const EmbeddingBatch& batch, const Matrix& Z);
std::vector<Matrix> forward_sa_linear_reference(const EmbeddingBatch& batch, const Matrix& Z);
std::vector<Matrix> forward_sa_blockdiag(const EmbeddingBatch& batch,
                                         const std::vector<Matrix>& Zb,
                                         const std::vector<std::vector<int>>& partition);
std::vector<Matrix> forward_sa_relu(const EmbeddingBatch& batch, const ArrangementSet& arr,
                                    const std::vector<Matrix>& Zj);
std::vector<Matrix> forward_sa_relu_reference(const EmbeddingBatch& batch,
                                              const ArrangementSet& arr,
                                              const std::vector<Matrix>& Zj);
std::vector<Matrix> forward_mixer_linear(const EmbeddingBatch& batch, const Matrix& Z);
std::vector<Matrix> forward_mixer_linear_reference(const EmbeddingBatch& batch,
                                                   const Matrix& Z);
std::vector<Matrix> forward_mixer_relu(const EmbeddingBatch& batch, const ArrangementSet& arr,
                                       const std::vector<Matrix>& Zj);
std::vector<Matrix> forward_fno(const EmbeddingBatch& batch, const std::vector<Matrix>& Zj,
                                Activation act, const ArrangementSet* arr);
std::vector<Matrix> forward_bfno(const EmbeddingBatch& batch,
                                 const std::vector<std::vector<Matrix>>& Z, Activation act,
                                 int B, const std::vector<ArrangementSet>* arr);
std::vector<Matrix> forward_generic(const EmbeddingBatch& batch, const GenericMix& mix,
                                    const std::vector<Matrix>& Zj, Activation act,
                                    const ArrangementSet* arr);

// Columns regrouped by output channel for the mixer head; permuting the
// columns leaves the nuclear norm unchanged. Storage here is the permuted
// (t,k)-block layout; this converts to the (p,t)-block layout.
Matrix mixer_grouped_layout(const Matrix& Zperm, int s, int d, int c);

std::vector<Matrix> forward(const HeadSpec& spec, const ConvexVars& vars,
                            const EmbeddingBatch& batch);
std::vector<Matrix> forward_reference(const HeadSpec& spec, const ConvexVars& vars,
                                      const EmbeddingBatch& batch);

// ---- losses (shared with the non-convex heads) ----
// r == s: per-token fitting. r == 1: predictions are mean-pooled over tokens
// first; cross-entropy is softmax CE on the pooled logits.
double loss_value(Loss loss, int r, const std::vector<Matrix>& preds,
                  const std::vector<Matrix>& Y);
std::vector<Matrix> loss_gradient(Loss loss, int r, const std::vector<Matrix>& preds,
                                  const std::vector<Matrix>& Y);

struct ObjectiveParts {
  double loss = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

// beta * sum of nuclear norms over all Z blocks/terms. For ReLU heads this is
// the plain-nuclear value, which equals the cone-constrained norm whenever the
// variables admit a cone-feasible SVD (always the case for mapped/solved
// solutions) and lower-bounds it otherwise.
double regularizer(const HeadSpec& spec, const ConvexVars& vars);
ObjectiveParts objective(const HeadSpec& spec, const ConvexVars& vars,
                         const EmbeddingBatch& batch);

// Gradient of the smooth loss term with respect to every Z (no regularizer).
ConvexVars loss_grad_vars(const HeadSpec& spec, const ConvexVars& vars,
                          const EmbeddingBatch& batch);

}  // namespace cvxattn
