#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cvxattn/rng.hpp"
#include "cvxattn/solvers.hpp"
#include "cvxattn/verify.hpp"

using namespace cvxattn;

namespace {

// Scalar generic head: prediction is x * z, so the objective is a 1-D
// soft-thresholding problem we can solve by hand.
EmbeddingBatch scalar_batch(double x, double y) {
  EmbeddingBatch b;
  b.n = 1;
  b.s = 1;
  b.d = 1;
  b.r = 1;
  b.c = 1;
  b.X.push_back(Matrix::Constant(1, 1, x));
  b.Y.push_back(Matrix::Constant(1, 1, y));
  return b;
}

}  // namespace

TEST_CASE("fista solves the scalar soft-thresholding problem exactly") {
  // min_z 0.5 (z - 3)^2 + |z|  ->  z* = 2, objective 0.5 + 2 = 2.5.
  EmbeddingBatch b = scalar_batch(1.0, 3.0);
  HeadSpec spec = make_spec(HeadKind::kGenericH, Activation::kLinear, b, 1.0,
                            Loss::kSquared, 1, ArrangementMode::kSampled, 4, 0, 0);
  SolverConfig cfg;
  cfg.max_iters = 2000;
  cfg.rel_tol = 1e-14;
  FistaResult res = fista_solve(spec, b, cfg);
  CHECK(res.vars.Z[0][0](0, 0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(res.report.total == doctest::Approx(2.5).epsilon(1e-8));
  CHECK(res.report.loss == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(res.report.reg == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(res.report.mode == "exact");
  CHECK_FALSE(res.report.diverged);
  CHECK(res.report.certificate_pass);
}

TEST_CASE("fista at beta = 0 matches the normal equations") {
  EmbeddingBatch b = random_batch(6, 3, 2, 2, 3, 21);
  HeadSpec spec = make_spec(HeadKind::kGenericH, Activation::kLinear, b, 0.0,
                            Loss::kSquared, 1, ArrangementMode::kSampled, 4, 0, 0);
  SolverConfig cfg;
  cfg.max_iters = 20000;
  cfg.rel_tol = 1e-15;
  FistaResult res = fista_solve(spec, b, cfg);
  // Stack rows: pred_i = X_i Z, column-separable least squares.
  Matrix A(b.n * b.s, b.d), Y(b.n * b.s, b.c);
  for (int i = 0; i < b.n; ++i) {
    A.middleRows(i * b.s, b.s) = b.X[i];
    Y.middleRows(i * b.s, b.s) = b.Y[i];
  }
  Matrix Zls = A.colPivHouseholderQr().solve(Y);
  double opt = 0.5 * (A * Zls - Y).squaredNorm();
  CHECK(res.report.total == doctest::Approx(opt).epsilon(1e-8));
}

TEST_CASE("fista rejects relu heads and is deterministic") {
  EmbeddingBatch b = random_batch(2, 2, 2, 2, 2, 22);
  HeadSpec relu = make_spec(HeadKind::kGenericH, Activation::kRelu, b, 0.1,
                            Loss::kSquared, 1, ArrangementMode::kExhaustive, 0, 0, 0);
  SolverConfig cfg;
  CHECK_THROWS(fista_solve(relu, b, cfg));

  HeadSpec lin = make_spec(HeadKind::kMixer, Activation::kLinear, b, 0.05, Loss::kSquared,
                           1, ArrangementMode::kSampled, 4, 0, 0);
  cfg.max_iters = 300;
  FistaResult a1 = fista_solve(lin, b, cfg);
  FistaResult a2 = fista_solve(lin, b, cfg);
  REQUIRE(a1.report.trace.size() == a2.report.trace.size());
  for (size_t i = 0; i < a1.report.trace.size(); ++i)
    CHECK(a1.report.trace[i] == a2.report.trace[i]);
  CHECK((a1.vars.Z[0][0] - a2.vars.Z[0][0]).cwiseAbs().maxCoeff() == 0.0);
  // Final total never exceeds the first recorded objective.
  CHECK(a1.report.total <= a1.report.trace.front() + 1e-12);
  // Adaptive restarts may push one extra objective value into the trace.
  CHECK(static_cast<int>(a1.report.trace.size()) >= a1.report.iterations);
}

TEST_CASE("gated heads run through fista") {
  EmbeddingBatch b = random_batch(3, 2, 2, 2, 2, 23);
  HeadSpec spec = make_spec(HeadKind::kSelfAttention, Activation::kGatedRelu, b, 0.05,
                            Loss::kSquared, 1, ArrangementMode::kSampled, 4, 5, 3);
  SolverConfig cfg;
  cfg.max_iters = 2000;
  FistaResult res = fista_solve(spec, b, cfg);
  CHECK_FALSE(res.report.diverged);
  CHECK(res.report.mode == "exact");
  CHECK(res.report.total == doctest::Approx(res.report.loss + res.report.reg).epsilon(1e-10));
}

TEST_CASE("bm solve certifies a small linear problem against fista") {
  EmbeddingBatch b = random_batch(3, 2, 2, 2, 2, 24);
  HeadSpec spec = make_spec(HeadKind::kFno, Activation::kLinear, b, 0.1, Loss::kSquared, 1,
                            ArrangementMode::kSampled, 4, 0, 0);
  SolverConfig cfg;
  cfg.max_iters = 3000;
  cfg.restarts = 6;
  cfg.rank_budget = 4;
  cfg.rel_tol = 1e-15;
  BMResult bm = bm_solve(spec, b, cfg);
  FistaResult fi = fista_solve(spec, b, cfg);
  CHECK(bm.report.total >= fi.report.total - 1e-9);
  if (bm.report.certificate_pass)
    CHECK(bm.report.total == doctest::Approx(fi.report.total).epsilon(1e-5));
  CHECK(bm.report.certificate_norm <= spec.beta + 1e-6);
  // Factor product matches the reported variables.
  ConvexVars vv = bm.factors.to_vars();
  CHECK((vv.Z[0][0] - bm.vars.Z[0][0]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("bm solve handles relu cones and is deterministic per seed") {
  EmbeddingBatch b = random_batch(2, 2, 2, 2, 2, 25);
  HeadSpec spec = make_spec(HeadKind::kGenericH, Activation::kRelu, b, 0.1, Loss::kSquared,
                            1, ArrangementMode::kExhaustive, 0, 0, 0);
  SolverConfig cfg;
  cfg.max_iters = 800;
  cfg.restarts = 4;
  cfg.rank_budget = 3;
  BMResult r1 = bm_solve(spec, b, cfg);
  BMResult r2 = bm_solve(spec, b, cfg);
  CHECK(r1.report.total == r2.report.total);
  CHECK(r1.report.mode == "exact");
  // Left factors satisfy their cones.
  for (size_t j = 0; j < r1.factors.f[0].size(); ++j) {
    Matrix K = spec.arrangements[0].cone(static_cast<int>(j));
    const Matrix& U = r1.factors.f[0][j].U;
    for (Eigen::Index col = 0; col < U.cols(); ++col)
      CHECK((K * U.col(col)).minCoeff() >= -1e-8);
  }
}

TEST_CASE("nc solve improves over zero weights and reports reg = total - loss") {
  EmbeddingBatch b = random_batch(3, 2, 2, 2, 2, 26);
  HeadSpec spec = make_spec(HeadKind::kMixer, Activation::kRelu, b, 0.05, Loss::kSquared,
                            1, ArrangementMode::kSampled, 40, 0, 0);
  SolverConfig cfg;
  cfg.max_iters = 800;
  cfg.restarts = 5;
  NcResult res = nc_solve(spec, b, cfg, 6);
  double zero_obj = nc_objective(spec, zero_weights(spec, 6), b);
  CHECK(res.report.total <= zero_obj + 1e-12);
  CHECK(res.report.reg == doctest::Approx(res.report.total - res.report.loss).epsilon(1e-9));
  CHECK(res.report.total == doctest::Approx(nc_objective(spec, res.weights, b)).epsilon(1e-9));
}

TEST_CASE("grad check validates eps and flags wrong gradients") {
  auto f = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  Vector x(4);
  x << 1, -2, 3, 0.5;
  CHECK(grad_check(f, x, x, 1e-5) <= 1e-8);
  Vector wrong = 2.0 * x;
  CHECK(grad_check(f, x, wrong, 1e-5) > 1e-2);
  CHECK_THROWS(grad_check(f, x, x, 1e-8));
  CHECK_THROWS(grad_check(f, x, x, 1e-2));
}

TEST_CASE("program mode flags sampled relu sets as restricted") {
  EmbeddingBatch b = random_batch(2, 2, 2, 2, 2, 27);
  HeadSpec ex = make_spec(HeadKind::kGenericH, Activation::kRelu, b, 0.1, Loss::kSquared,
                          1, ArrangementMode::kExhaustive, 0, 0, 0);
  CHECK(program_mode(ex) == "exact");
  HeadSpec sam = make_spec(HeadKind::kGenericH, Activation::kRelu, b, 0.1, Loss::kSquared,
                           1, ArrangementMode::kSampled, 10, 0, 0);
  CHECK(program_mode(sam) == "restricted");
  HeadSpec lin = make_spec(HeadKind::kGenericH, Activation::kLinear, b, 0.1, Loss::kSquared,
                           1, ArrangementMode::kSampled, 10, 0, 0);
  CHECK(program_mode(lin) == "exact");
}
