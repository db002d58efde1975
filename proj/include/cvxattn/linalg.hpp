#pragma once

#include <complex>
#include <vector>

#include "cvxattn/types.hpp"

namespace cvxattn {

using ComplexMatrix = Eigen::MatrixXcd;

// Column-major vectorization; satisfies vec(ABC) = (C^T kron A) vec(B).
Vector vec(const Matrix& M);
Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols);

Matrix kron(const Matrix& A, const Matrix& B);

// Permutation K_{c,s} of size cs x cs with K_{c,s} vec(V) = vec(V^T) for
// V in R^{s x c}.
Matrix commutation_matrix(int c, int s);

// All s circular token shifts of X stacked side by side:
// circ(X)[t, u*d : (u+1)*d] = X[(t+u) mod s, :].
Matrix circ(const Matrix& X);

Matrix gram(const Matrix& X);  // X^T X

// Finest partition of feature indices such that |G_i[k,l]| <= tol whenever
// k and l land in different parts, for every sample i (union-find over the
// union of Gram supports). Parts are sorted, smallest index first.
std::vector<std::vector<int>> detect_gram_blocks(const EmbeddingBatch& batch, double tol);

// Deterministic thin SVD: singular values descending, sign of each left
// singular vector fixed so its largest-magnitude entry is positive.
struct Svd {
  Matrix U;
  Vector sigma;
  Matrix V;
};
Svd svd(const Matrix& A);

double spectral_norm(const Matrix& A);

// Unitary DFT matrix of size n.
ComplexMatrix dft_matrix(int n);

// Fourier-domain evaluation of the FNO block with F = F_h kron F_w:
//   f(X) = sigma((F^{-1} [ (F X)_t^T V^{(t)} ]_{t=1..s}) W1) W2.
// Serves as an oracle against the circulant form. imag_residue reports the
// largest imaginary part left after the inverse transform; treat anything
// above 1e-8 as a sign that V did not come from real spatial weights.
struct FnoFourierResult {
  Matrix pred;
  double imag_residue = 0.0;
};
FnoFourierResult fno_fourier_forward(const Matrix& X, const std::vector<ComplexMatrix>& V,
                                     const Matrix& W1, const Matrix& W2, Activation act,
                                     int h, int w);

// Lift real per-shift weights L (s matrices of size d x d) into Fourier-space
// V: V^{(t)} = sum_u F[t,u] * sqrt(s) * L[neg(u)] where neg is negation in the
// Z_h x Z_w shift group (flat index u = u_h*w + u_w). With this lift the
// Fourier forward computes the group convolution sum_u X[o (+) u] L[u]; for a
// one-dimensional factorization (h == 1 or w == 1) that is exactly
// circ(X) * fno_weight_stack(L).
std::vector<ComplexMatrix> lift_spatial_weights(const std::vector<Matrix>& L, int h, int w);

// The sd x d stack [L'[0]; L'[1]; ...] matching the lift above, so that
// circ(X) * fno_weight_stack(L) == pre-activation of the Fourier oracle.
Matrix fno_weight_stack(const std::vector<Matrix>& L);

}  // namespace cvxattn
