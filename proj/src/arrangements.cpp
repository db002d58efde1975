#include "cvxattn/arrangements.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "cvxattn/linalg.hpp"
#include "cvxattn/rng.hpp"

namespace cvxattn {

namespace {

constexpr double kBoundaryTol = 1e-12;

// Rows with negligible norm can never be strictly signed; they count as
// always-active (1{0 >= 0} = 1) and are ignored by the strict-sign check.
bool negligible_row(const Matrix& X, int t) { return X.row(t).norm() <= kBoundaryTol; }

// Mask realized by direction u, or nullopt if some row sits too close to the
// hyperplane for the pattern to be stable.
std::optional<Vector> strict_mask(const Matrix& X, const Vector& u) {
  const double scale = std::max(u.norm(), 1e-300);
  Vector m(X.rows());
  Vector a = X * u;
  for (int t = 0; t < X.rows(); ++t) {
    if (negligible_row(X, t)) {
      m(t) = 1.0;
      continue;
    }
    if (std::abs(a(t)) <= kBoundaryTol * scale) return std::nullopt;
    m(t) = a(t) > 0 ? 1.0 : 0.0;
  }
  return m;
}

struct MaskLess {
  bool operator()(const Vector& a, const Vector& b) const {
    for (int i = 0; i < a.size(); ++i) {
      if (a(i) != b(i)) return a(i) < b(i);
    }
    return false;
  }
};

}  // namespace

EffectiveData effective_data(HeadKind kind, const EmbeddingBatch& batch, const GenericMix* h,
                             int B, int block) {
  batch.validate();
  EffectiveData out;
  out.kind = kind;
  std::vector<Matrix> blocks;
  blocks.reserve(batch.n);
  for (int i = 0; i < batch.n; ++i) {
    const Matrix& Xi = batch.X[i];
    switch (kind) {
      case HeadKind::kSelfAttention:
      case HeadKind::kSelfAttentionBlockDiag:
        blocks.push_back(kron(Xi, Xi));
        break;
      case HeadKind::kMixer:
        blocks.push_back(kron(Xi.transpose(), Matrix::Identity(batch.s, batch.s)));
        break;
      case HeadKind::kFno:
        blocks.push_back(circ(Xi));
        break;
      case HeadKind::kBfno: {
        if (B < 1 || batch.d % B != 0)
          throw std::invalid_argument("bfno: B must divide d");
        if (block < 0 || block >= B) throw std::invalid_argument("bfno: bad block index");
        int db = batch.d / B;
        blocks.push_back(circ(Xi.middleCols(block * db, db)));
        break;
      }
      case HeadKind::kGenericH: {
        Matrix hx = h ? h->apply(Xi) : Xi;
        if (hx.rows() != batch.s || hx.cols() != batch.d)
          throw std::invalid_argument("generic mix must map s x d to s x d");
        blocks.push_back(hx);
        break;
      }
    }
  }
  int rows = 0;
  for (const Matrix& b : blocks) rows += static_cast<int>(b.rows());
  out.X.resize(rows, blocks[0].cols());
  int at = 0;
  for (const Matrix& b : blocks) {
    out.sample_ranges.emplace_back(at, static_cast<int>(b.rows()));
    out.X.middleRows(at, b.rows()) = b;
    at += static_cast<int>(b.rows());
  }
  return out;
}

Matrix ArrangementSet::cone(int j) const {
  return (2.0 * masks.at(j).array() - 1.0).matrix().asDiagonal() * effective;
}

Matrix cone_constraint(const EffectiveData& data, const Vector& mask) {
  if (mask.size() != data.X.rows()) throw std::invalid_argument("mask length mismatch");
  return (2.0 * mask.array() - 1.0).matrix().asDiagonal() * data.X;
}

Vector sample_mask(const EffectiveData& data, const Vector& mask, int i) {
  auto [start, len] = data.sample_ranges.at(i);
  return mask.segment(start, len);
}

double cardinality_bound(int r, int n_rows) {
  if (r < 1 || n_rows < 2) throw std::invalid_argument("cardinality_bound needs r>=1, n>=2");
  return 2.0 * r * std::pow(M_E * (n_rows - 1) / static_cast<double>(r), r);
}

ArrangementSet enumerate_arrangements(const EffectiveData& data, ArrangementMode mode,
                                      int budget, uint64_t seed) {
  const Matrix& X = data.X;
  Svd dec = svd(X);
  int rank = 0;
  double sig_tol = 1e-12 * std::max(1.0, dec.sigma.size() ? dec.sigma(0) : 0.0);
  for (int j = 0; j < dec.sigma.size(); ++j)
    if (dec.sigma(j) > sig_tol) ++rank;

  std::map<Vector, Vector, MaskLess> found;  // mask -> witness
  auto offer = [&](const Vector& u) {
    auto m = strict_mask(X, u);
    if (m && !found.count(*m)) found.emplace(*m, u);
  };

  if (mode == ArrangementMode::kExhaustive) {
    if (rank > 2)
      throw std::invalid_argument(
          "exhaustive enumeration supports effective dimension <= 2 only");
    if (rank == 0) {
      Vector u = Vector::Zero(X.cols());
      if (X.cols() > 0) u(0) = 1.0;
      ArrangementSet set;
      set.masks.push_back(Vector::Ones(X.rows()));
      set.witnesses.push_back(u);
      set.mode = mode;
      set.effective_rank = 0;
      set.effective = X;
      return set;
    }
    Matrix Q = dec.V.leftCols(rank);  // orthonormal basis of the row space
    if (rank == 1) {
      offer(Q.col(0));
      offer(-Q.col(0));
    } else {
      // Angular sweep: hyperplane normals in the plane are the projected rows;
      // each row kills directions at two angles, cells are the arcs between.
      std::vector<double> crit;
      for (int t = 0; t < X.rows(); ++t) {
        if (negligible_row(X, t)) continue;
        Eigen::Vector2d g = (X.row(t) * Q).transpose();
        double base = std::atan2(g(1), g(0));
        for (double off : {M_PI / 2, -M_PI / 2}) {
          double a = std::fmod(base + off, 2 * M_PI);
          if (a < 0) a += 2 * M_PI;
          crit.push_back(a);
        }
      }
      if (crit.empty()) crit.push_back(0.0);
      std::sort(crit.begin(), crit.end());
      for (size_t k = 0; k < crit.size(); ++k) {
        double a = crit[k];
        double b = (k + 1 < crit.size()) ? crit[k + 1] : crit[0] + 2 * M_PI;
        if (b - a <= 1e-13) continue;
        double mid = 0.5 * (a + b);
        offer(Q.col(0) * std::cos(mid) + Q.col(1) * std::sin(mid));
      }
    }
  } else if (mode == ArrangementMode::kSampled) {
    if (budget < 1) throw std::invalid_argument("sampled mode needs budget >= 1");
    Rng rng(seed);
    for (int k = 0; k < budget; ++k) {
      Vector g = rng.gaussian_vector(X.cols());
      offer(g);
      // Perturbed direction near the hyperplane of a random row: lands in the
      // two cells adjacent to that boundary, which plain sampling can miss.
      int t = static_cast<int>(rng.uniform_index(X.rows()));
      if (!negligible_row(X, t)) {
        Vector xt = X.row(t).transpose();
        Vector u = g - xt * (xt.dot(g) / xt.squaredNorm());
        if (u.norm() > 1e-12) {
          double delta = 1e-6 * u.norm() / xt.norm();
          offer(u + delta * xt);
          offer(u - delta * xt);
        }
      }
    }
  } else {
    throw std::invalid_argument("gated mode: use gates_to_arrangements");
  }

  ArrangementSet set;
  set.mode = mode;
  set.effective_rank = rank;
  set.effective = X;
  for (auto& [m, u] : found) {
    set.masks.push_back(m);
    set.witnesses.push_back(u);
  }
  return set;
}

ArrangementSet gates_to_arrangements(const std::vector<Vector>& gates,
                                     const EffectiveData& data) {
  ArrangementSet set;
  set.mode = ArrangementMode::kGated;
  set.effective = data.X;
  Svd dec = svd(data.X);
  double sig_tol = 1e-12 * std::max(1.0, dec.sigma.size() ? dec.sigma(0) : 0.0);
  for (int j = 0; j < dec.sigma.size(); ++j)
    if (dec.sigma(j) > sig_tol) ++set.effective_rank;
  for (const Vector& h : gates) {
    if (h.size() != data.X.cols()) throw std::invalid_argument("gate dimension mismatch");
    Vector a = data.X * h;
    Vector m(a.size());
    for (int t = 0; t < a.size(); ++t) m(t) = a(t) >= 0 ? 1.0 : 0.0;
    set.masks.push_back(m);
    set.witnesses.push_back(h);
    set.gates.push_back(h);
  }
  return set;
}

}  // namespace cvxattn
