#pragma once

#include <string>
#include <vector>

#include "cvxattn/data.hpp"
#include "cvxattn/solvers.hpp"

namespace cvxattn {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Shared construction helpers (also used by the test binaries).

EmbeddingBatch random_batch(int n, int s, int d, int c, int r, uint64_t seed);

// Builds a HeadSpec with arrangements attached for ReLU (enumerated on the
// head's effective data) or gated activation (random gates).
HeadSpec make_spec(HeadKind kind, Activation act, const EmbeddingBatch& batch, double beta,
                   Loss loss, int B, ArrangementMode mode, int budget, uint64_t seed,
                   int gates, const GenericMix* mix = nullptr);

// Random convex variables. For ReLU heads each Z_j is rank one with a left
// factor strictly inside its arrangement cone (perturbed witness), so the
// SVD-based mapping applies; linear/gated heads get dense Gaussian Z.
ConvexVars random_convex_vars(const HeadSpec& spec, uint64_t seed);

// Verification suites; every entry is one named pass/fail check.
std::vector<CheckResult> verify_mappings(uint64_t seed, int trials);
std::vector<CheckResult> verify_equivalence(uint64_t seed, int instances);
std::vector<CheckResult> verify_fno_lemma(uint64_t seed, int seeds);
std::vector<CheckResult> verify_blockdiag(uint64_t seed, int seeds);
std::vector<CheckResult> verify_grad(uint64_t seed);
std::vector<CheckResult> verify_prox(uint64_t seed, int trials);
std::vector<CheckResult> verify_arrangements(uint64_t seed, int seeds);

// suite in {mappings, equivalence, fno-lemma, blockdiag, grad, prox,
// arrangements, all}
std::vector<CheckResult> verify_suite(const std::string& suite, uint64_t seed);

}  // namespace cvxattn
