#pragma once

#include <string>

#include "cvxattn/nonconvex.hpp"
#include "cvxattn/types.hpp"

namespace cvxattn {

// k well-separated Gaussian class clusters; labels are one-hot rows (r=1,
// c=k). Class means are drawn once per class and scaled by `separation`.
EmbeddingBatch gen_gaussian_classes(int n, int s, int d, int k, double separation,
                                    uint64_t seed);

// Targets generated by running a random non-convex head on random inputs, so
// the planting weights fit exactly (zero loss at beta = 0).
struct PlantedHead {
  EmbeddingBatch batch;
  HeadSpec spec;
  NonconvexWeights weights;
};
PlantedHead gen_planted_head(HeadKind kind, Activation act, int n, int s, int d, int c,
                             uint64_t seed, int m = 2);

// Feature groups supported on disjoint token rows, so every Gram matrix is
// block diagonal with B blocks. Requires B | d and B | s.
EmbeddingBatch gen_blockdiag_gram(int n, int s, int d, int c, int B, uint64_t seed);

// Portable binary embedding format: magic "CVXATTN1", LE u32 n,s,d,r,c,
// n*s*d float64 (row-major per sample), then n*r*c float64 labels.
void write_embedding_file(const std::string& path, const EmbeddingBatch& batch);
EmbeddingBatch read_embedding_file(const std::string& path);

}  // namespace cvxattn
