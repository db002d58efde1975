#pragma once

#include <optional>
#include <vector>

#include "cvxattn/types.hpp"

namespace cvxattn {

// Effective data matrix the ReLU programs take hyperplane arrangements over.
// Rows are stacked per sample; the per-sample block depends on the head:
// X_i kron X_i (self-attention, s^2 rows), X_i^T kron I_s (mixer, s*d rows),
// circ(X_i) (FNO, s rows), circ(X_i^{(b)}) (B-FNO block b, s rows), h(X_i)
// (generic fixed mixing, s rows).
struct EffectiveData {
  Matrix X;
  std::vector<std::pair<int, int>> sample_ranges;  // (start, len) per sample
  HeadKind kind = HeadKind::kGenericH;
};

EffectiveData effective_data(HeadKind kind, const EmbeddingBatch& batch,
                             const GenericMix* h = nullptr, int B = 1, int block = 0);

enum class ArrangementMode { kExhaustive, kSampled, kGated };

// Diagonal 0/1 masks D_j = diag(1{X u_j >= 0}) with their witness directions.
struct ArrangementSet {
  std::vector<Vector> masks;      // entries in {0,1}, length = rows of X
  std::vector<Vector> witnesses;  // u_j realizing each mask (strictly off boundary)
  std::vector<Vector> gates;      // only for gated mode (h_j as given)
  ArrangementMode mode = ArrangementMode::kSampled;
  int effective_rank = 0;
  Matrix effective;  // copy of the effective data the masks were built on

  // K_j = (2 diag(masks[j]) - I) * effective
  Matrix cone(int j) const;
};

// K_j = (2 D_j - I) X; K_j u_j >= 0 for the witness.
Matrix cone_constraint(const EffectiveData& data, const Vector& mask);

// Exhaustive mode is exact and only allowed when the row space of X has
// dimension <= 2 (angular sweep over hyperplane normals). Sampled mode draws
// `budget` Gaussian directions plus perturbed pairwise-intersection
// directions; it is monotone in the budget for a fixed seed. Masks are
// returned sorted lexicographically.
ArrangementSet enumerate_arrangements(const EffectiveData& data, ArrangementMode mode,
                                      int budget, uint64_t seed);

// Fixed gates: D_j = diag(1{X h_j >= 0}), duplicates kept in order.
ArrangementSet gates_to_arrangements(const std::vector<Vector>& gates,
                                     const EffectiveData& data);

// P <= 2r (e(n-1)/r)^r from the arrangement-counting bound.
double cardinality_bound(int r, int n_rows);

// Diagonal slice of mask for sample i given the stored row ranges.
Vector sample_mask(const EffectiveData& data, const Vector& mask, int i);

}  // namespace cvxattn
