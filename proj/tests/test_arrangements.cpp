#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "cvxattn/arrangements.hpp"
#include "cvxattn/rng.hpp"

using namespace cvxattn;

namespace {

EffectiveData data_from(const Matrix& X) {
  EffectiveData d;
  d.X = X;
  d.sample_ranges = {{0, static_cast<int>(X.rows())}};
  d.kind = HeadKind::kGenericH;
  return d;
}

std::set<std::vector<int>> mask_set(const ArrangementSet& s) {
  std::set<std::vector<int>> out;
  for (const Vector& m : s.masks) {
    std::vector<int> v(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) v[i] = m(i) > 0.5 ? 1 : 0;
    out.insert(v);
  }
  return out;
}

}  // namespace

TEST_CASE("one-dimensional data yields exactly two masks") {
  Matrix X(2, 1);
  X << 1, -1;
  ArrangementSet set = enumerate_arrangements(data_from(X), ArrangementMode::kExhaustive, 0, 0);
  REQUIRE(set.masks.size() == 2);
  auto ms = mask_set(set);
  CHECK(ms.count({1, 0}) == 1);
  CHECK(ms.count({0, 1}) == 1);
  CHECK(set.effective_rank == 1);
  // Witnesses realize their masks strictly.
  for (size_t j = 0; j < set.masks.size(); ++j) {
    Vector a = X * set.witnesses[j];
    for (Eigen::Index t = 0; t < a.size(); ++t) {
      CHECK(std::abs(a(t)) > 1e-12);
      CHECK((a(t) >= 0 ? 1.0 : 0.0) == set.masks[j](t));
    }
  }
}

TEST_CASE("zero rows are always active") {
  Matrix X(3, 2);
  X << 1, 0, 0, 0, 0, 1;
  ArrangementSet set = enumerate_arrangements(data_from(X), ArrangementMode::kExhaustive, 0, 0);
  for (const Vector& m : set.masks) CHECK(m(1) == 1.0);
}

TEST_CASE("exhaustive rank-2 enumeration matches quadrant count") {
  // Identity rows: masks are exactly the four quadrant indicators
  // (boundary-free ones), i.e. 4 arrangements for 2 hyperplanes in the plane.
  ArrangementSet set = enumerate_arrangements(data_from(Matrix::Identity(2, 2)),
                                              ArrangementMode::kExhaustive, 0, 0);
  CHECK(set.effective_rank == 2);
  auto ms = mask_set(set);
  CHECK(ms.size() == 4);
  CHECK(ms.count({0, 0}) == 1);
  CHECK(ms.count({1, 1}) == 1);
  CHECK(ms.count({1, 0}) == 1);
  CHECK(ms.count({0, 1}) == 1);
  CHECK(static_cast<double>(ms.size()) <= cardinality_bound(2, 2));
}

TEST_CASE("exhaustive throws above rank 2") {
  Rng rng(1);
  Matrix X = rng.gaussian_matrix(4, 3);
  CHECK_THROWS(enumerate_arrangements(data_from(X), ArrangementMode::kExhaustive, 0, 0));
}

TEST_CASE("cardinality bound values") {
  CHECK(cardinality_bound(1, 2) == doctest::Approx(2.0 * std::exp(1.0)).epsilon(1e-12));
  CHECK(cardinality_bound(2, 3) ==
        doctest::Approx(4.0 * std::exp(2.0)).epsilon(1e-12));
  CHECK_THROWS(cardinality_bound(0, 2));
  CHECK_THROWS(cardinality_bound(1, 1));
}

TEST_CASE("masks are sorted lexicographically and unique") {
  Rng rng(2);
  Matrix X = rng.gaussian_matrix(5, 2);
  ArrangementSet set = enumerate_arrangements(data_from(X), ArrangementMode::kExhaustive, 0, 3);
  for (size_t j = 0; j + 1 < set.masks.size(); ++j) {
    bool less = false;
    for (Eigen::Index i = 0; i < set.masks[j].size(); ++i) {
      if (set.masks[j](i) < set.masks[j + 1](i)) {
        less = true;
        break;
      }
      if (set.masks[j](i) > set.masks[j + 1](i)) break;
    }
    CHECK(less);
  }
}

TEST_CASE("sampled mode is monotone in the budget and within the exhaustive set") {
  Rng rng(3);
  Matrix X = rng.gaussian_matrix(6, 2);
  EffectiveData d = data_from(X);
  ArrangementSet small = enumerate_arrangements(d, ArrangementMode::kSampled, 50, 11);
  ArrangementSet big = enumerate_arrangements(d, ArrangementMode::kSampled, 500, 11);
  ArrangementSet full = enumerate_arrangements(d, ArrangementMode::kExhaustive, 0, 11);
  auto ms = mask_set(small), mb = mask_set(big), mf = mask_set(full);
  for (const auto& m : ms) CHECK(mb.count(m) == 1);
  for (const auto& m : mb) CHECK(mf.count(m) == 1);
  CHECK(!ms.empty());
}

TEST_CASE("cone constraint certifies masks") {
  Rng rng(4);
  Matrix X = rng.gaussian_matrix(5, 2);
  EffectiveData d = data_from(X);
  ArrangementSet set = enumerate_arrangements(d, ArrangementMode::kExhaustive, 0, 0);
  for (size_t j = 0; j < set.masks.size(); ++j) {
    Matrix K = cone_constraint(d, set.masks[j]);
    CHECK((K * set.witnesses[j]).minCoeff() >= 0.0);
    CHECK((K - set.cone(static_cast<int>(j))).cwiseAbs().maxCoeff() == 0.0);
    // (2D - I) X construction, row by row.
    for (Eigen::Index t = 0; t < X.rows(); ++t) {
      double sgn = set.masks[j](t) > 0.5 ? 1.0 : -1.0;
      CHECK((K.row(t) - sgn * X.row(t)).cwiseAbs().maxCoeff() <= 1e-15);
    }
  }
}

TEST_CASE("gates keep duplicates and use the half-open sign rule") {
  EffectiveData d = data_from(Matrix::Identity(2, 2));
  Vector e1(2), ne1(2);
  e1 << 1, 0;
  ne1 << -1, 0;
  ArrangementSet set = gates_to_arrangements({e1, ne1, e1}, d);
  REQUIRE(set.masks.size() == 3);
  CHECK(set.masks[0](0) == 1.0);  // X e1 = (1, 0): both rows >= 0
  CHECK(set.masks[0](1) == 1.0);
  CHECK(set.masks[1](0) == 0.0);  // X (-e1) = (-1, 0): row 0 negative, row 1 zero
  CHECK(set.masks[1](1) == 1.0);
  CHECK(set.masks[2] == set.masks[0]);
  CHECK(set.gates.size() == 3);
  CHECK(set.mode == ArrangementMode::kGated);
}

TEST_CASE("sample mask slices by stored ranges") {
  EffectiveData d;
  d.X = Matrix::Zero(5, 2);
  d.sample_ranges = {{0, 2}, {2, 3}};
  Vector m(5);
  m << 1, 0, 1, 1, 0;
  Vector m0 = sample_mask(d, m, 0), m1 = sample_mask(d, m, 1);
  REQUIRE(m0.size() == 2);
  REQUIRE(m1.size() == 3);
  CHECK(m0(0) == 1.0);
  CHECK(m0(1) == 0.0);
  CHECK(m1(0) == 1.0);
  CHECK(m1(2) == 0.0);
}

TEST_CASE("effective data shapes per head") {
  Rng rng(5);
  EmbeddingBatch b;
  b.n = 2;
  b.s = 3;
  b.d = 2;
  b.r = 3;
  b.c = 2;
  for (int i = 0; i < 2; ++i) {
    b.X.push_back(rng.gaussian_matrix(3, 2));
    b.Y.push_back(rng.gaussian_matrix(3, 2));
  }
  CHECK(effective_data(HeadKind::kSelfAttention, b).X.rows() == 2 * 9);
  CHECK(effective_data(HeadKind::kSelfAttention, b).X.cols() == 4);
  CHECK(effective_data(HeadKind::kMixer, b).X.rows() == 2 * 6);
  CHECK(effective_data(HeadKind::kMixer, b).X.cols() == 9);
  CHECK(effective_data(HeadKind::kFno, b).X.rows() == 2 * 3);
  CHECK(effective_data(HeadKind::kFno, b).X.cols() == 6);
  GenericMix mix;
  mix.kind = GenericMix::Kind::kIdentity;
  EffectiveData g = effective_data(HeadKind::kGenericH, b, &mix);
  CHECK(g.X.rows() == 2 * 3);
  CHECK(g.X.cols() == 2);
  // B-FNO block 1 of a d=2 embedding uses column 1 only.
  EffectiveData bf = effective_data(HeadKind::kBfno, b, nullptr, 2, 1);
  CHECK(bf.X.rows() == 2 * 3);
  CHECK(bf.X.cols() == 3);
}
