#pragma once

#include <vector>

#include "cvxattn/types.hpp"

namespace cvxattn {

double nuclear_norm(const Matrix& Z);

// Singular value thresholding: the prox of tau * ||.||_* at A.
Matrix svt_prox(const Matrix& A, double tau);

// Burer-Monteiro factors Z = U V^T with the (beta/2)(||U||_F^2 + ||V||_F^2)
// regularizer standing in for beta ||Z||_*.
struct BMFactors {
  Matrix U;  // a x b
  Matrix V;  // c x b

  Matrix product() const { return U * V.transpose(); }
  double frob_half_sum() const { return 0.5 * (U.squaredNorm() + V.squaredNorm()); }
};

// Rebalance (U, V) through an SVD of U V^T so the Frobenius regularizer drops
// to its minimum ||U V^T||_*; the product is unchanged up to rounding.
BMFactors rebalance(const BMFactors& f);

// Global-optimality certificate for a BM stationary point:
// passes iff ||gradient_sum||_2 <= beta + 1e-9.
struct Certificate {
  bool passes = false;
  double spectral_norm = 0.0;
};
Certificate bm_certificate(const Matrix& gradient_sum, double beta);

// Cone-constrained dual norm max{u^T G v : K u >= 0, ||u|| <= 1, ||v|| <= 1}
// = max ||G^T u|| over feasible unit u (multi-restart projected power
// iteration; lower bound of the true maximum). K with zero rows reduces to
// the spectral norm.
double cone_dual_norm(const Matrix& G, const Matrix& K, int restarts = 8,
                      uint64_t seed = 0);

// Project u onto {u : K u >= 0} (alternating projection onto half-spaces,
// capped at 50 sweeps). Exact when K has orthogonal rows; good enough at desk
// scale otherwise. Returns the projected vector.
Vector project_to_cone(const Matrix& K, const Vector& u, int max_sweeps = 50);

double cone_violation(const Matrix& K, const Vector& u);  // max(0, -min K u)

// Certified sandwich for the cone-constrained nuclear norm of Z:
// lower = ||Z||_*; upper = best sum ||u_k|| ||v_k|| over found factorizations
// Z = sum u_k v_k^T with K u_k >= 0 (multi-restart projected local search),
// +inf when no feasible factorization is found.
struct NormBounds {
  double lower = 0.0;
  double upper = 0.0;
};
NormBounds constrained_norm_bounds(const Matrix& Z, const Matrix& K, int restarts,
                                   uint64_t seed);

// Rank-1 extreme points u v^T of {Z : K u >= 0, ||Z||_* <= 1} plus convex
// combinations, for the 2x2 visualization slice (z3 = Z(1,0) fixed to 0).
struct BallSample {
  Matrix Z;
  bool extreme = false;
};
std::vector<BallSample> sample_constrained_ball(const Matrix& K, int count, uint64_t seed);

}  // namespace cvxattn
