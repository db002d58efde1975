#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cvxattn/linalg.hpp"
#include "cvxattn/rng.hpp"

using namespace cvxattn;

TEST_CASE("vec is column-major") {
  Matrix M(2, 2);
  M << 1, 3, 2, 4;
  Vector v = vec(M);
  CHECK(v(0) == 1);
  CHECK(v(1) == 2);
  CHECK(v(2) == 3);
  CHECK(v(3) == 4);
  Matrix one(1, 1);
  one << 7;
  CHECK(vec(one)(0) == 7);
  CHECK(unvec(v, 2, 2) == M);
}

TEST_CASE("vec(ABC) == (C^T kron A) vec(B)") {
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    int n = t % 2 ? 2 : 3;
    Matrix A = rng.gaussian_matrix(n, n), B = rng.gaussian_matrix(n, n),
           C = rng.gaussian_matrix(n, n);
    Vector lhs = vec(A * B * C);
    Vector rhs = kron(C.transpose(), A) * vec(B);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("kron basics and mixed product") {
  Matrix five(1, 1);
  five << 5;
  Matrix K = kron(Matrix::Identity(2, 2), five);
  CHECK(K.rows() == 2);
  CHECK(K(0, 0) == 5);
  CHECK(K(1, 1) == 5);
  CHECK(K(0, 1) == 0);
  Matrix a(1, 1), b(1, 1);
  a << 2;
  b << 3;
  CHECK(kron(a, b)(0, 0) == 6);
  Rng rng(2);
  Matrix A = rng.gaussian_matrix(2, 2), B = rng.gaussian_matrix(2, 2),
         C = rng.gaussian_matrix(2, 2), D = rng.gaussian_matrix(2, 2);
  CHECK((kron(A, B) * kron(C, D) - kron(A * C, B * D)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("commutation matrix") {
  CHECK(commutation_matrix(1, 1)(0, 0) == 1);
  Matrix V(2, 2);
  V << 1, 2, 3, 4;
  Vector lhs = commutation_matrix(2, 2) * vec(V);
  Vector rhs = vec(Matrix(V.transpose()));
  CHECK(lhs == rhs);
  Matrix P = commutation_matrix(2, 3) * commutation_matrix(3, 2);
  CHECK((P - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() == 0.0);
  // Permutation matrix: exactly one 1 per row.
  Matrix K = commutation_matrix(2, 3);
  for (int i = 0; i < K.rows(); ++i) CHECK(K.row(i).sum() == 1.0);
}

TEST_CASE("circ shifts along tokens") {
  Matrix X1(1, 2);
  X1 << 3, 4;
  CHECK(circ(X1) == X1);
  Matrix X(2, 2);
  X << 1, 2, 3, 4;
  Matrix C = circ(X);
  Matrix expect(2, 4);
  expect << 1, 2, 3, 4, 3, 4, 1, 2;
  CHECK(C == expect);
  // Block u of circ(X) is a row permutation of X.
  Rng rng(3);
  Matrix R = rng.gaussian_matrix(4, 3);
  Matrix CR = circ(R);
  for (int u = 0; u < 4; ++u)
    for (int t = 0; t < 4; ++t)
      CHECK(CR.row(t).segment(u * 3, 3) == R.row((t + u) % 4));
}

TEST_CASE("gram") {
  Matrix X(2, 2);
  X << 1, 0, 0, 2;
  Matrix G = gram(X);
  CHECK(G(0, 0) == 1);
  CHECK(G(1, 1) == 4);
  CHECK(G(0, 1) == 0);
  CHECK(gram(Matrix::Zero(3, 2)).cwiseAbs().maxCoeff() == 0.0);
  Rng rng(4);
  Matrix R = rng.gaussian_matrix(3, 3);
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram(R));
  CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  CHECK((gram(R) - gram(R).transpose()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("detect_gram_blocks") {
  // Disjoint token supports: cols 0..1 on tokens 0..1, cols 2..3 on tokens 2..3.
  Rng rng(5);
  EmbeddingBatch batch;
  batch.n = 2;
  batch.s = 4;
  batch.d = 4;
  batch.r = 4;
  batch.c = 1;
  for (int i = 0; i < 2; ++i) {
    Matrix X = Matrix::Zero(4, 4);
    X.block(0, 0, 2, 2) = rng.gaussian_matrix(2, 2);
    X.block(2, 2, 2, 2) = rng.gaussian_matrix(2, 2);
    batch.X.push_back(X);
    batch.Y.push_back(rng.gaussian_matrix(4, 1));
  }
  auto parts = detect_gram_blocks(batch, 1e-12);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0] == std::vector<int>{0, 1});
  CHECK(parts[1] == std::vector<int>{2, 3});

  EmbeddingBatch dense;
  dense.n = 1;
  dense.s = 3;
  dense.d = 3;
  dense.r = 3;
  dense.c = 1;
  dense.X.push_back(rng.gaussian_matrix(3, 3));
  dense.Y.push_back(rng.gaussian_matrix(3, 1));
  CHECK(detect_gram_blocks(dense, 1e-12).size() == 1);

  EmbeddingBatch d1;
  d1.n = 1;
  d1.s = 2;
  d1.d = 1;
  d1.r = 2;
  d1.c = 1;
  d1.X.push_back(rng.gaussian_matrix(2, 1));
  d1.Y.push_back(rng.gaussian_matrix(2, 1));
  CHECK(detect_gram_blocks(d1, 1e-12).size() == 1);
}

TEST_CASE("svd deterministic sign and reconstruction") {
  Rng rng(6);
  Matrix A = rng.gaussian_matrix(4, 3);
  Svd dec = svd(A);
  Matrix back = dec.U * dec.sigma.asDiagonal() * dec.V.transpose();
  CHECK((back - A).cwiseAbs().maxCoeff() <= 1e-12);
  for (int j = 0; j + 1 < dec.sigma.size(); ++j) CHECK(dec.sigma(j) >= dec.sigma(j + 1));
  for (int j = 0; j < dec.U.cols(); ++j) {
    Eigen::Index imax;
    dec.U.col(j).cwiseAbs().maxCoeff(&imax);
    CHECK(dec.U(imax, j) > 0);
  }
  CHECK(spectral_norm(A) == doctest::Approx(dec.sigma(0)).epsilon(1e-12));
}

TEST_CASE("dft matrix unitary") {
  for (int n : {1, 2, 4}) {
    ComplexMatrix F = dft_matrix(n);
    ComplexMatrix I = F.adjoint() * F;
    CHECK((I - ComplexMatrix::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("fno fourier forward reduces at s=1 and matches circ form") {
  Rng rng(7);
  // s = 1: DFT of size 1 is the identity.
  Matrix X = rng.gaussian_matrix(1, 3);
  std::vector<Matrix> L = {rng.gaussian_matrix(3, 3)};
  Matrix W1 = rng.gaussian_matrix(3, 2), W2 = rng.gaussian_matrix(2, 2);
  auto V = lift_spatial_weights(L, 1, 1);
  FnoFourierResult r = fno_fourier_forward(X, V, W1, W2, Activation::kLinear, 1, 1);
  Matrix direct = X * L[0] * W1 * W2;
  CHECK((r.pred - direct).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(r.imag_residue <= 1e-10);

  // Zero W2 annihilates the output.
  FnoFourierResult z =
      fno_fourier_forward(X, V, W1, Matrix::Zero(2, 2), Activation::kRelu, 1, 1);
  CHECK(z.pred.cwiseAbs().maxCoeff() == 0.0);

  // General 1-D factorization: Fourier form equals the circulant-stack form.
  for (int s : {1, 2, 4}) {
    for (int d : {1, 2, 3}) {
      Matrix Xs = rng.gaussian_matrix(s, d);
      std::vector<Matrix> Ls;
      for (int u = 0; u < s; ++u) Ls.push_back(rng.gaussian_matrix(d, d));
      Matrix W1s = rng.gaussian_matrix(d, 2), W2s = rng.gaussian_matrix(2, 2);
      auto Vs = lift_spatial_weights(Ls, 1, s);
      for (Activation act : {Activation::kLinear, Activation::kRelu}) {
        FnoFourierResult four = fno_fourier_forward(Xs, Vs, W1s, W2s, act, 1, s);
        Matrix pre = circ(Xs) * fno_weight_stack(Ls) * W1s;
        Matrix want = (act == Activation::kRelu ? pre.cwiseMax(0.0) : pre) * W2s;
        CHECK((four.pred - want).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(four.imag_residue <= 1e-8);
      }
    }
  }
}

TEST_CASE("fno fourier forward is the shift-group convolution for 2-D factorizations") {
  // With s = 4 factored as h = w = 2 the shift group is Z_2 x Z_2; the Fourier
  // form must match an explicit group-shift evaluation.
  Rng rng(8);
  const int h = 2, w = 2, s = 4, d = 2;
  Matrix X = rng.gaussian_matrix(s, d);
  std::vector<Matrix> L;
  for (int u = 0; u < s; ++u) L.push_back(rng.gaussian_matrix(d, d));
  Matrix W1 = rng.gaussian_matrix(d, 2), W2 = rng.gaussian_matrix(2, 2);
  auto V = lift_spatial_weights(L, h, w);
  FnoFourierResult four = fno_fourier_forward(X, V, W1, W2, Activation::kLinear, h, w);
  CHECK(four.imag_residue <= 1e-8);
  Matrix O = Matrix::Zero(s, d);
  for (int oh = 0; oh < h; ++oh)
    for (int ow = 0; ow < w; ++ow)
      for (int uh = 0; uh < h; ++uh)
        for (int uw = 0; uw < w; ++uw) {
          int o = oh * w + ow;
          int src = ((oh + uh) % h) * w + (ow + uw) % w;
          O.row(o) += X.row(src) * L[uh * w + uw];
        }
  Matrix want = O * W1 * W2;
  CHECK((four.pred - want).cwiseAbs().maxCoeff() <= 1e-8);
}
