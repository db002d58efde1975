#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <limits>

#include "cvxattn/heads.hpp"
#include "cvxattn/linalg.hpp"
#include "cvxattn/norms.hpp"
#include "cvxattn/rng.hpp"
#include "cvxattn/verify.hpp"

using namespace cvxattn;

namespace {

EmbeddingBatch single(const Matrix& X, const Matrix& Y) {
  EmbeddingBatch b;
  b.n = 1;
  b.s = static_cast<int>(X.rows());
  b.d = static_cast<int>(X.cols());
  b.r = static_cast<int>(Y.rows());
  b.c = static_cast<int>(Y.cols());
  b.X.push_back(X);
  b.Y.push_back(Y);
  return b;
}

double maxdiff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

TEST_CASE("scalar self-attention forward is 8z for X = 2") {
  Matrix X(1, 1), Y(1, 1), Z(1, 1);
  X << 2;
  Y << 0;
  Z << 1;
  EmbeddingBatch b = single(X, Y);
  auto pred = forward_sa_linear(b, Z);
  CHECK(pred[0](0, 0) == doctest::Approx(8.0).epsilon(1e-14));
  Z << 0.5;
  CHECK(forward_sa_linear(b, Z)[0](0, 0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(maxdiff(forward_sa_linear(b, Z), forward_sa_linear_reference(b, Z)) <= 1e-14);
}

TEST_CASE("mixer forward on a 1x2 embedding") {
  Matrix X(1, 2), Y(1, 1), Z(1, 2);
  X << 1, 2;
  Y << 0;
  Z << 3, 4;
  EmbeddingBatch b = single(X, Y);
  auto pred = forward_mixer_linear(b, Z);
  CHECK(pred[0](0, 0) == doctest::Approx(11.0).epsilon(1e-14));
  CHECK(maxdiff(pred, forward_mixer_linear_reference(b, Z)) <= 1e-14);
}

TEST_CASE("fno forward is the circulant product") {
  Matrix X(2, 1), Y(2, 1), Z(2, 1);
  X << 1, 2;
  Y << 0, 0;
  Z << 3, 4;
  EmbeddingBatch b = single(X, Y);
  auto pred = forward_fno(b, {Z}, Activation::kLinear, nullptr);
  CHECK(pred[0](0, 0) == doctest::Approx(11.0).epsilon(1e-14));
  CHECK(pred[0](1, 0) == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("primary and reference paths agree for every head and activation") {
  for (uint64_t seed = 0; seed < 4; ++seed) {
    EmbeddingBatch b = random_batch(3, 2, 2, 2, 2, 100 + seed);
    for (HeadKind kind : {HeadKind::kSelfAttention, HeadKind::kMixer, HeadKind::kFno,
                          HeadKind::kBfno, HeadKind::kGenericH}) {
      for (Activation act :
           {Activation::kLinear, Activation::kRelu, Activation::kGatedRelu}) {
        HeadSpec spec = make_spec(kind, act, b, 0.1, Loss::kSquared, kind == HeadKind::kBfno ? 2 : 1,
                                  ArrangementMode::kSampled, 20, seed, 3);
        ConvexVars vars = random_convex_vars(spec, seed + 17);
        auto p = forward(spec, vars, b);
        auto q = forward_reference(spec, vars, b);
        REQUIRE(p.size() == b.X.size());
        CHECK(maxdiff(p, q) <= 1e-10);
      }
    }
  }
}

TEST_CASE("z shapes and zero vars") {
  EmbeddingBatch b = random_batch(2, 3, 2, 2, 3, 5);
  HeadSpec sa = make_spec(HeadKind::kSelfAttention, Activation::kLinear, b, 0.1,
                          Loss::kSquared, 1, ArrangementMode::kSampled, 10, 0, 0);
  CHECK(sa.z_shape(0) == std::pair<int, int>(4, 4));
  CHECK(sa.sample_block_rows() == 9);
  HeadSpec mx = make_spec(HeadKind::kMixer, Activation::kLinear, b, 0.1, Loss::kSquared, 1,
                          ArrangementMode::kSampled, 10, 0, 0);
  CHECK(mx.z_shape(0) == std::pair<int, int>(9, 4));
  CHECK(mx.sample_block_rows() == 6);
  HeadSpec fn = make_spec(HeadKind::kFno, Activation::kLinear, b, 0.1, Loss::kSquared, 1,
                          ArrangementMode::kSampled, 10, 0, 0);
  CHECK(fn.z_shape(0) == std::pair<int, int>(6, 2));
  HeadSpec bf = make_spec(HeadKind::kBfno, Activation::kLinear, b, 0.1, Loss::kSquared, 2,
                          ArrangementMode::kSampled, 10, 0, 0);
  CHECK(bf.num_blocks() == 2);
  CHECK(bf.z_shape(0) == std::pair<int, int>(3, 1));
  ConvexVars z = zero_vars(bf);
  REQUIRE(z.Z.size() == 2);
  REQUIRE(z.Z[0].size() == 1);
  CHECK(z.Z[0][0].rows() == 3);
  CHECK(z.Z[0][0].cols() == 1);
  CHECK(z.Z[0][0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mixer grouped layout is a column permutation") {
  Rng rng(6);
  int s = 2, d = 2, c = 2;
  Matrix Zperm = rng.gaussian_matrix(s * s, d * c);
  Matrix Zgrp = mixer_grouped_layout(Zperm, s, d, c);
  CHECK(Zgrp.rows() == Zperm.rows());
  CHECK(Zgrp.cols() == Zperm.cols());
  CHECK(nuclear_norm(Zgrp) == doctest::Approx(nuclear_norm(Zperm)).epsilon(1e-10));
  // Same multiset of entries per row (column permutation moves whole columns).
  Vector a = Zperm.colwise().norm().transpose(), bnorm = Zgrp.colwise().norm().transpose();
  std::sort(a.data(), a.data() + a.size());
  std::sort(bnorm.data(), bnorm.data() + bnorm.size());
  CHECK((a - bnorm).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("squared loss and pooling conventions") {
  Matrix P(2, 2), Y(2, 2);
  P << 1, 2, 3, 4;
  Y << 0, 0, 0, 0;
  // r == s: 0.5 * ||P - Y||_F^2.
  CHECK(loss_value(Loss::kSquared, 2, {P}, {Y}) == doctest::Approx(15.0).epsilon(1e-14));
  // r == 1: column means pooled first.
  Matrix Y1(1, 2);
  Y1 << 2, 3;
  double pooled = loss_value(Loss::kSquared, 1, {P}, {Y1});
  CHECK(pooled == doctest::Approx(0.5 * ((2.0 - 2.0) * (2.0 - 2.0) +
                                         (3.0 - 3.0) * (3.0 - 3.0))));
  // Gradient of squared loss is (P - Y) for r == s.
  auto g = loss_gradient(Loss::kSquared, 2, {P}, {Y});
  CHECK((g[0] - P).cwiseAbs().maxCoeff() <= 1e-14);
  // Cross-entropy on pooled logits is softmax CE; uniform logits, true class 0.
  Matrix L(2, 2);
  L << 1, 1, 1, 1;
  Matrix Yc(1, 2);
  Yc << 1, 0;
  CHECK(loss_value(Loss::kCrossEntropy, 1, {L}, {Yc}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("regularizer sums nuclear norms with beta") {
  EmbeddingBatch b = random_batch(2, 2, 2, 2, 2, 9);
  HeadSpec spec = make_spec(HeadKind::kBfno, Activation::kLinear, b, 0.5, Loss::kSquared, 2,
                            ArrangementMode::kSampled, 10, 0, 0);
  ConvexVars vars = random_convex_vars(spec, 3);
  double want = 0.0;
  for (const auto& blk : vars.Z)
    for (const Matrix& Z : blk) want += nuclear_norm(Z);
  CHECK(regularizer(spec, vars) == doctest::Approx(0.5 * want).epsilon(1e-12));
  ObjectiveParts parts = objective(spec, vars, b);
  CHECK(parts.total == doctest::Approx(parts.loss + parts.reg).epsilon(1e-12));
  CHECK(parts.reg == doctest::Approx(regularizer(spec, vars)).epsilon(1e-12));
}

TEST_CASE("planted linear head reaches zero loss") {
  // Targets generated by the model itself must be fit exactly.
  Rng rng(10);
  EmbeddingBatch b = random_batch(3, 2, 2, 2, 2, 11);
  HeadSpec spec = make_spec(HeadKind::kMixer, Activation::kLinear, b, 0.0, Loss::kSquared,
                            1, ArrangementMode::kSampled, 10, 0, 0);
  ConvexVars vars = random_convex_vars(spec, 12);
  b.Y = forward(spec, vars, b);
  ObjectiveParts parts = objective(spec, vars, b);
  CHECK(parts.loss <= 1e-18);
  CHECK(parts.total <= 1e-18);
}

TEST_CASE("batch validation rejects bad shapes") {
  EmbeddingBatch b = random_batch(2, 2, 2, 2, 2, 1);
  b.Y[1] = Matrix::Zero(3, 2);
  CHECK_THROWS(b.validate());
  EmbeddingBatch ok = random_batch(2, 2, 2, 2, 2, 1);
  CHECK_NOTHROW(ok.validate());
  ok.X[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(ok.validate());
}
