#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cvxattn/linalg.hpp"
#include "cvxattn/norms.hpp"
#include "cvxattn/rng.hpp"

using namespace cvxattn;

TEST_CASE("nuclear norm") {
  CHECK(nuclear_norm(Matrix::Identity(2, 2)) == doctest::Approx(2.0).epsilon(1e-12));
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 3;
  D(1, 1) = 1;
  CHECK(nuclear_norm(D) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(nuclear_norm(Matrix::Zero(3, 2)) == 0.0);
  // Rank one: nuclear norm equals Frobenius norm.
  Rng rng(1);
  Vector u = rng.gaussian_vector(4), v = rng.gaussian_vector(3);
  Matrix R = u * v.transpose();
  CHECK(nuclear_norm(R) == doctest::Approx(u.norm() * v.norm()).epsilon(1e-10));
  // Triangle inequality on random pairs.
  for (int t = 0; t < 5; ++t) {
    Matrix A = rng.gaussian_matrix(3, 3), B = rng.gaussian_matrix(3, 3);
    CHECK(nuclear_norm(A + B) <= nuclear_norm(A) + nuclear_norm(B) + 1e-10);
  }
}

TEST_CASE("svt prox") {
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 3;
  D(1, 1) = 1;
  Matrix P = svt_prox(D, 1.0);
  CHECK(P(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(P(1, 1)) <= 1e-12);
  CHECK(std::abs(P(0, 1)) <= 1e-12);
  // Large tau annihilates.
  Rng rng(2);
  Matrix A = rng.gaussian_matrix(3, 2);
  CHECK(svt_prox(A, 1e3).cwiseAbs().maxCoeff() <= 1e-12);
  // Prox optimality: value at prox point beats random competitors.
  double tau = 0.7;
  Matrix Q = svt_prox(A, tau);
  double fq = 0.5 * (Q - A).squaredNorm() + tau * nuclear_norm(Q);
  for (int t = 0; t < 10; ++t) {
    Matrix C = Q + 0.1 * rng.gaussian_matrix(3, 2);
    double fc = 0.5 * (C - A).squaredNorm() + tau * nuclear_norm(C);
    CHECK(fq <= fc + 1e-9);
  }
}

TEST_CASE("rebalance reaches the nuclear-norm regularizer") {
  Rng rng(3);
  Matrix U = 3.0 * rng.gaussian_matrix(4, 2);
  Matrix V = 0.2 * rng.gaussian_matrix(3, 2);
  BMFactors f{U, V};
  BMFactors g = rebalance(f);
  CHECK((g.product() - f.product()).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(g.frob_half_sum() ==
        doctest::Approx(nuclear_norm(f.product())).epsilon(1e-10));
  CHECK(g.frob_half_sum() <= f.frob_half_sum() + 1e-10);
}

TEST_CASE("unbalanced factors overshoot the nuclear norm") {
  Matrix U(1, 1), V(1, 1);
  U << 4;
  V << 1;
  BMFactors f{U, V};
  // 0.5 (16 + 1) = 8.5 > ||4||_* = 4.
  CHECK(f.frob_half_sum() == doctest::Approx(8.5));
  CHECK(f.frob_half_sum() > nuclear_norm(f.product()));
}

TEST_CASE("bm certificate thresholds") {
  Matrix G = Matrix::Zero(2, 2);
  G(0, 0) = 0.5;
  Certificate c = bm_certificate(G, 1.0);
  CHECK(c.passes);
  CHECK(c.spectral_norm == doctest::Approx(0.5));
  G(0, 0) = 1.5;
  CHECK_FALSE(bm_certificate(G, 1.0).passes);
  G(0, 0) = 1.0;
  CHECK(bm_certificate(G, 1.0).passes);  // boundary sits inside the tolerance
}

TEST_CASE("cone projection and violation") {
  Matrix K = Matrix::Identity(2, 2);
  Vector u(2);
  u << -1, 2;
  Vector p = project_to_cone(K, u);
  CHECK(cone_violation(K, p) <= 1e-10);
  CHECK(p(0) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(p(1) == doctest::Approx(2.0).epsilon(1e-10));
  Vector in(2);
  in << 1, 1;
  CHECK((project_to_cone(K, in) - in).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(cone_violation(K, u) == doctest::Approx(1.0));
  CHECK(cone_violation(Matrix::Zero(0, 2), u) == 0.0);
}

TEST_CASE("constrained norm bounds") {
  // No constraint: both bounds equal the nuclear norm.
  Rng rng(4);
  Matrix Z = rng.gaussian_matrix(2, 2);
  NormBounds nb = constrained_norm_bounds(Z, Matrix::Zero(0, 2), 8, 0);
  CHECK(nb.lower == doctest::Approx(nuclear_norm(Z)).epsilon(1e-9));
  CHECK(nb.upper == doctest::Approx(nuclear_norm(Z)).epsilon(1e-6));

  // Feasible rank-1: both bounds collapse to ||u|| ||v||.
  Vector u(2), v(2);
  u << 1, 2;
  v << 3, -1;
  Matrix R = u * v.transpose();
  NormBounds nr = constrained_norm_bounds(R, Matrix::Identity(2, 2), 8, 0);
  CHECK(nr.lower == doctest::Approx(u.norm() * v.norm()).epsilon(1e-9));
  CHECK(nr.upper == doctest::Approx(u.norm() * v.norm()).epsilon(1e-6));
  CHECK(nr.lower <= nr.upper + 1e-9);

  // Zero matrix is free.
  NormBounds nz = constrained_norm_bounds(Matrix::Zero(2, 2), Matrix::Identity(2, 2), 4, 0);
  CHECK(nz.lower == 0.0);
  CHECK(nz.upper <= 1e-9);

  // Generic constrained case: sandwich holds and upper is finite.
  Matrix K(1, 2);
  K << 1, 1;
  Matrix Zc = rng.gaussian_matrix(2, 3);
  NormBounds ng = constrained_norm_bounds(Zc, K, 16, 1);
  CHECK(ng.lower <= ng.upper + 1e-9);
  CHECK(std::isfinite(ng.upper));
}

TEST_CASE("constrained ball samples respect the constraints") {
  Matrix K = Matrix::Identity(2, 2);
  auto samples = sample_constrained_ball(K, 100, 7);
  CHECK(samples.size() >= 100);
  bool saw_extreme = false, saw_hull = false;
  for (const BallSample& s : samples) {
    CHECK(nuclear_norm(s.Z) <= 1.0 + 1e-8);
    CHECK(std::abs(s.Z(1, 0)) <= 1e-12);  // visualization slice fixes z3 = 0
    if (s.extreme) {
      saw_extreme = true;
      // Extreme points are rank one with unit nuclear norm and feasible left factor.
      Svd dec = svd(s.Z);
      CHECK(nuclear_norm(s.Z) == doctest::Approx(1.0).epsilon(1e-8));
      if (dec.sigma.size() > 1) CHECK(dec.sigma(1) <= 1e-10);
      Vector u = dec.U.col(0);
      CHECK(std::min(cone_violation(K, u), cone_violation(K, Vector(-u))) <= 1e-8);
    } else {
      saw_hull = true;
    }
  }
  CHECK(saw_extreme);
  CHECK(saw_hull);

  // Determinism.
  auto again = sample_constrained_ball(K, 100, 7);
  REQUIRE(again.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i)
    CHECK((again[i].Z - samples[i].Z).cwiseAbs().maxCoeff() == 0.0);
}
