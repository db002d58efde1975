#include "cvxattn/nonconvex.hpp"

#include <cmath>

#include "cvxattn/linalg.hpp"
#include "cvxattn/norms.hpp"
#include "cvxattn/rng.hpp"
#include "cvxattn/solvers.hpp"

namespace cvxattn {

namespace {

struct Shapes {
  int w1_rows, w1_cols, w2_rows, w2_cols;
};

Shapes weight_shapes(const HeadSpec& spec) {
  switch (spec.kind) {
    case HeadKind::kSelfAttention:
      return {spec.d, spec.d, spec.d, spec.c};
    case HeadKind::kMixer:
      return {spec.s, spec.s, spec.d, spec.c};
    case HeadKind::kFno:
      return {spec.s * spec.d, 1, spec.c, 1};
    case HeadKind::kBfno:
      return {spec.s * spec.d / spec.B, 1, spec.c / spec.B, 1};
    case HeadKind::kGenericH:
      return {spec.d, 1, spec.c, 1};
    default:
      throw std::invalid_argument("head has no non-convex reference form");
  }
}

// Activation mask (sigma'(A) for ReLU, the fixed gate pattern for gated ReLU,
// ones for linear), shaped like the pre-activation A.
Matrix act_mask(const HeadSpec& spec, int block, const WeightPair& pair, int sample,
                const Matrix& A) {
  switch (spec.activation) {
    case Activation::kLinear:
      return Matrix::Ones(A.rows(), A.cols());
    case Activation::kRelu:
      return (A.array() > 0.0).cast<double>();
    case Activation::kGatedRelu: {
      const ArrangementSet& arr = spec.arrangements.at(block);
      if (pair.gate_index < 0 || pair.gate_index >= static_cast<int>(arr.masks.size()))
        throw std::invalid_argument("gated pair without a valid gate index");
      Eigen::Index len = A.size();
      Vector slice = arr.masks[pair.gate_index].segment(sample * len, len);
      return unvec(slice, A.rows(), A.cols());
    }
  }
  throw std::logic_error("unreachable");
}

// Pre-activation for one pair on one sample.
Matrix pre_activation(const HeadSpec& spec, int block, const WeightPair& pair,
                      const Matrix& X) {
  switch (spec.kind) {
    case HeadKind::kSelfAttention:
      return X * pair.W1 * X.transpose();  // s x s, column t <-> mask chunk t
    case HeadKind::kMixer:
      return pair.W1 * X;  // s x d, column k <-> mask chunk k
    case HeadKind::kFno:
      return circ(X) * pair.W1;  // s x 1
    case HeadKind::kBfno: {
      int db = spec.d / spec.B;
      return circ(X.middleCols(block * db, db)) * pair.W1;  // s x 1
    }
    case HeadKind::kGenericH:
      return spec.mix.apply(X) * pair.W1;  // s x 1
    default:
      throw std::invalid_argument("head has no non-convex reference form");
  }
}

}  // namespace

std::vector<Matrix> nc_forward(const HeadSpec& spec, const NonconvexWeights& w,
                               const EmbeddingBatch& batch) {
  spec.validate();
  if (static_cast<int>(w.pairs.size()) != spec.num_blocks())
    throw std::invalid_argument("nc_forward: block count mismatch");
  std::vector<Matrix> preds(batch.n, Matrix::Zero(batch.s, batch.c));
  const int cb = spec.kind == HeadKind::kBfno ? spec.c / spec.B : spec.c;
  for (int i = 0; i < batch.n; ++i) {
    const Matrix& X = batch.X[i];
    for (int b = 0; b < spec.num_blocks(); ++b) {
      for (const WeightPair& pair : w.pairs[b]) {
        Matrix A = pre_activation(spec, b, pair, X);
        Matrix S = act_mask(spec, b, pair, i, A);
        Matrix act = S.cwiseProduct(A);
        Matrix out;
        switch (spec.kind) {
          case HeadKind::kSelfAttention:
            out = act * X * pair.W2;
            break;
          case HeadKind::kMixer:
            out = act * pair.W2;
            break;
          default:  // fno / bfno / generic: act is s x 1, W2 a column
            out = act * pair.W2.transpose();
            break;
        }
        if (spec.kind == HeadKind::kBfno)
          preds[i].middleCols(b * cb, cb) += out;
        else
          preds[i] += out;
      }
    }
  }
  return preds;
}

double nc_objective(const HeadSpec& spec, const NonconvexWeights& w,
                    const EmbeddingBatch& batch) {
  double reg = 0.0;
  for (const auto& blk : w.pairs)
    for (const WeightPair& p : blk) reg += p.W1.squaredNorm() + p.W2.squaredNorm();
  return loss_value(spec.loss, spec.r, nc_forward(spec, w, batch), batch.Y) +
         0.5 * spec.beta * reg;
}

NonconvexWeights nc_gradient(const HeadSpec& spec, const NonconvexWeights& w,
                             const EmbeddingBatch& batch) {
  std::vector<Matrix> R =
      loss_gradient(spec.loss, spec.r, nc_forward(spec, w, batch), batch.Y);
  NonconvexWeights g;
  g.pairs.resize(w.pairs.size());
  for (size_t b = 0; b < w.pairs.size(); ++b)
    for (const WeightPair& p : w.pairs[b])
      g.pairs[b].push_back({spec.beta * p.W1, spec.beta * p.W2, p.gate_index});

  const int cb = spec.kind == HeadKind::kBfno ? spec.c / spec.B : spec.c;
  for (int i = 0; i < batch.n; ++i) {
    const Matrix& X = batch.X[i];
    for (int b = 0; b < spec.num_blocks(); ++b) {
      for (size_t j = 0; j < w.pairs[b].size(); ++j) {
        const WeightPair& p = w.pairs[b][j];
        Matrix A = pre_activation(spec, b, p, X);
        Matrix S = act_mask(spec, b, p, i, A);
        Matrix act = S.cwiseProduct(A);
        Matrix Ri = spec.kind == HeadKind::kBfno ? R[i].middleCols(b * cb, cb) : R[i];
        switch (spec.kind) {
          case HeadKind::kSelfAttention: {
            Matrix XW2 = X * p.W2;
            g.pairs[b][j].W2 += X.transpose() * act.transpose() * Ri;
            Matrix dA = (Ri * XW2.transpose()).cwiseProduct(S);
            g.pairs[b][j].W1 += X.transpose() * dA * X;
            break;
          }
          case HeadKind::kMixer: {
            g.pairs[b][j].W2 += act.transpose() * Ri;
            Matrix dA = (Ri * p.W2.transpose()).cwiseProduct(S);
            g.pairs[b][j].W1 += dA * X.transpose();
            break;
          }
          default: {
            Matrix C;
            if (spec.kind == HeadKind::kFno) {
              C = circ(X);
            } else if (spec.kind == HeadKind::kBfno) {
              int db = spec.d / spec.B;
              C = circ(X.middleCols(b * db, db));
            } else {
              C = spec.mix.apply(X);
            }
            g.pairs[b][j].W2 += Ri.transpose() * act;
            Vector dA = (Ri * p.W2).cwiseProduct(S);
            g.pairs[b][j].W1 += C.transpose() * dA;
            break;
          }
        }
      }
    }
  }
  return g;
}

NonconvexWeights zero_weights(const HeadSpec& spec, int m) {
  Shapes sh = weight_shapes(spec);
  NonconvexWeights w;
  w.pairs.resize(spec.num_blocks());
  for (auto& blk : w.pairs)
    blk.assign(m, {Matrix::Zero(sh.w1_rows, sh.w1_cols), Matrix::Zero(sh.w2_rows, sh.w2_cols),
                   -1});
  return w;
}

NonconvexWeights random_weights(const HeadSpec& spec, int m, uint64_t seed) {
  Shapes sh = weight_shapes(spec);
  Rng rng(seed);
  double s1 = 1.0 / std::sqrt(static_cast<double>(sh.w1_rows));
  double s2 = 1.0 / std::sqrt(static_cast<double>(sh.w2_rows));
  NonconvexWeights w;
  w.pairs.resize(spec.num_blocks());
  for (int b = 0; b < spec.num_blocks(); ++b) {
    for (int j = 0; j < m; ++j) {
      WeightPair p;
      p.W1 = rng.gaussian_matrix(sh.w1_rows, sh.w1_cols, s1);
      p.W2 = rng.gaussian_matrix(sh.w2_rows, sh.w2_cols, s2);
      if (spec.activation == Activation::kGatedRelu) {
        int gates = static_cast<int>(spec.arrangements.at(b).masks.size());
        p.gate_index = gates > 0 ? j % gates : -1;
      }
      w.pairs[b].push_back(std::move(p));
    }
  }
  return w;
}

namespace {

// Architecture-specific reshapes between factor vectors and weight matrices.
Matrix u_to_w1(const HeadSpec& spec, const Vector& u) {
  Shapes sh = weight_shapes(spec);
  return unvec(u, sh.w1_rows, sh.w1_cols);
}

Matrix v_to_w2(const HeadSpec& spec, const Vector& v) {
  Shapes sh = weight_shapes(spec);
  if (sh.w2_cols == 1) return v;
  // v holds vec(W2^T) in column-major chunks of c.
  return unvec(v, sh.w2_cols, sh.w2_rows).transpose();
}

Vector w1_to_u(const HeadSpec& spec, const Matrix& W1) { return vec(W1); }

Vector w2_to_v(const HeadSpec& spec, const Matrix& W2) {
  Shapes sh = weight_shapes(spec);
  if (sh.w2_cols == 1) return W2.col(0);
  return vec(Matrix(W2.transpose()));
}

}  // namespace

NonconvexWeights bm_to_nonconvex(const HeadSpec& spec, const BMVars& factors) {
  spec.validate();
  NonconvexWeights w;
  w.pairs.resize(spec.num_blocks());
  for (int b = 0; b < spec.num_blocks(); ++b) {
    for (int j = 0; j < spec.num_terms(b); ++j) {
      const BMFactors& f = factors.f.at(b).at(j);
      for (Eigen::Index k = 0; k < f.U.cols(); ++k) {
        if (f.U.col(k).norm() * f.V.col(k).norm() < 1e-14) continue;
        WeightPair pair;
        pair.W1 = u_to_w1(spec, f.U.col(k));
        pair.W2 = v_to_w2(spec, f.V.col(k));
        if (spec.activation == Activation::kGatedRelu) pair.gate_index = j;
        w.pairs[b].push_back(std::move(pair));
      }
    }
  }
  return w;
}

NonconvexWeights map_convex_to_nonconvex(const HeadSpec& spec, const ConvexVars& vars) {
  spec.validate();
  NonconvexWeights w;
  w.pairs.resize(spec.num_blocks());
  for (int b = 0; b < spec.num_blocks(); ++b) {
    for (int j = 0; j < spec.num_terms(b); ++j) {
      const Matrix& Z = vars.Z.at(b).at(j);
      if (Z.norm() == 0.0) continue;
      Svd dec = svd(Z);
      double cutoff = 1e-12 * dec.sigma(0);
      for (Eigen::Index k = 0; k < dec.sigma.size(); ++k) {
        if (dec.sigma(k) <= cutoff) continue;
        Vector u = dec.U.col(k), v = dec.V.col(k);
        if (spec.activation == Activation::kRelu) {
          // u v^T == (-u)(-v)^T, so resolve the SVD sign ambiguity in favor of
          // the cone before rejecting the factorization.
          Matrix K = spec.arrangements[b].cone(j);
          double viol = cone_violation(K, u);
          if (viol > 1e-8) {
            double viol_neg = cone_violation(K, Vector(-u));
            if (viol_neg <= 1e-8) {
              u = -u;
              v = -v;
            } else {
              throw ConeViolationError(std::min(viol, viol_neg));
            }
          }
        }
        double root = std::sqrt(dec.sigma(k));
        WeightPair pair;
        pair.W1 = root * u_to_w1(spec, u);
        pair.W2 = root * v_to_w2(spec, v);
        if (spec.activation == Activation::kGatedRelu) pair.gate_index = j;
        w.pairs[b].push_back(std::move(pair));
      }
    }
  }
  return w;
}

ConvexVars map_nonconvex_to_convex(const HeadSpec& spec, const NonconvexWeights& w) {
  spec.validate();
  ConvexVars vars = zero_vars(spec);
  for (int b = 0; b < spec.num_blocks(); ++b) {
    for (const WeightPair& pair : w.pairs.at(b)) {
      if (pair.W1.norm() == 0.0 || pair.W2.norm() == 0.0) continue;
      Vector u = w1_to_u(spec, pair.W1);
      Vector v = w2_to_v(spec, pair.W2);
      int term = 0;
      if (spec.activation == Activation::kRelu) {
        const ArrangementSet& arr = spec.arrangements[b];
        Vector a = arr.effective * u;
        Vector pat(a.size());
        for (Eigen::Index t = 0; t < a.size(); ++t) pat(t) = a(t) >= 0 ? 1.0 : 0.0;
        term = -1;
        for (size_t j = 0; j < arr.masks.size(); ++j)
          if ((arr.masks[j] - pat).cwiseAbs().maxCoeff() < 0.5) {
            term = static_cast<int>(j);
            break;
          }
        if (term < 0) {
          std::string s;
          for (Eigen::Index t = 0; t < pat.size(); ++t) s += pat(t) > 0.5 ? '1' : '0';
          throw PatternMissError(s);
        }
      } else if (spec.activation == Activation::kGatedRelu) {
        term = pair.gate_index;
        if (term < 0 || term >= spec.num_terms(b))
          throw std::invalid_argument("gated pair without a valid gate index");
      }
      vars.Z[b][term] += u * v.transpose();
    }
  }
  return vars;
}

}  // namespace cvxattn
