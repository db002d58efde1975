#include "cvxattn/heads.hpp"

#include <cmath>
#include <stdexcept>

#include "cvxattn/linalg.hpp"
#include "cvxattn/norms.hpp"

namespace cvxattn {

void HeadSpec::validate() const {
  if (s < 1 || d < 1 || c < 1) throw std::invalid_argument("dims must be >= 1");
  if (r != 1 && r != s) throw std::invalid_argument("r must be 1 or s");
  if (beta < 0) throw std::invalid_argument("beta must be >= 0");
  if (kind == HeadKind::kBfno && (B < 1 || d % B != 0 || c % B != 0))
    throw std::invalid_argument("bfno: B must divide d and c");
  if (kind == HeadKind::kSelfAttentionBlockDiag && partition.empty())
    throw std::invalid_argument("sa_blockdiag needs a feature partition");
  if (activation != Activation::kLinear &&
      static_cast<int>(arrangements.size()) != num_blocks())
    throw std::invalid_argument("relu/gated heads need one arrangement set per block");
}

int HeadSpec::num_blocks() const {
  if (kind == HeadKind::kBfno) return B;
  if (kind == HeadKind::kSelfAttentionBlockDiag) return static_cast<int>(partition.size());
  return 1;
}

std::pair<int, int> HeadSpec::z_shape(int block) const {
  switch (kind) {
    case HeadKind::kSelfAttention:
      return {d * d, d * c};
    case HeadKind::kSelfAttentionBlockDiag: {
      int db = static_cast<int>(partition.at(block).size());
      return {db * d, db * c};
    }
    case HeadKind::kMixer:
      return {s * s, d * c};
    case HeadKind::kFno:
      return {s * d, c};
    case HeadKind::kBfno:
      return {s * d / B, c / B};
    case HeadKind::kGenericH:
      return {d, c};
  }
  throw std::logic_error("unreachable");
}

int HeadSpec::num_terms(int block) const {
  if (activation == Activation::kLinear) return 1;
  return static_cast<int>(arrangements.at(block).masks.size());
}

int HeadSpec::sample_block_rows() const {
  switch (kind) {
    case HeadKind::kSelfAttention:
    case HeadKind::kSelfAttentionBlockDiag:
      return s * s;
    case HeadKind::kMixer:
      return s * d;
    default:
      return s;
  }
}

ConvexVars zero_vars(const HeadSpec& spec) {
  ConvexVars vars;
  vars.Z.resize(spec.num_blocks());
  for (int b = 0; b < spec.num_blocks(); ++b) {
    auto [rows, cols] = spec.z_shape(b);
    vars.Z[b].assign(spec.num_terms(b), Matrix::Zero(rows, cols));
  }
  return vars;
}

namespace {

void check_shape(const Matrix& Z, int rows, int cols, const char* what) {
  if (Z.rows() != rows || Z.cols() != cols)
    throw std::invalid_argument(std::string(what) + ": Z shape mismatch");
}

// Mask slice D_j^{(i)} for sample i given per-sample block length.
Vector mask_slice(const Vector& mask, int i, int block_rows) {
  return mask.segment(static_cast<Eigen::Index>(i) * block_rows, block_rows);
}

}  // namespace

std::vector<Matrix> forward_sa_linear(const EmbeddingBatch& batch, const Matrix& Z) {
  const int d = batch.d, c = batch.c;
  check_shape(Z, d * d, d * c, "sa_linear");
  std::vector<Matrix> preds(batch.n);
  for (int i = 0; i < batch.n; ++i) {
    Matrix G = gram(batch.X[i]);
    // Optimized contraction: Yhat = X * M with M = sum_{k,l} G[k,l] Z^{(k,l)}.
    Matrix M = Matrix::Zero(d, c);
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l) M += G(k, l) * Z.block(k * d, l * c, d, c);
    preds[i] = batch.X[i] * M;
  }
  return preds;
}

std::vector<Matrix> forward_sa_linear_reference(const EmbeddingBatch& batch, const Matrix& Z) {
  const int d = batch.d, c = batch.c;
  check_shape(Z, d * d, d * c, "sa_linear");
  std::vector<Matrix> preds(batch.n);
  for (int i = 0; i < batch.n; ++i) {
    Matrix G = gram(batch.X[i]);
    Matrix Y = Matrix::Zero(batch.s, c);
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l)
        Y += G(k, l) * (batch.X[i] * Z.block(k * d, l * c, d, c));
    preds[i] = Y;
  }
  return preds;
}

std::vector<Matrix> forward_sa_blockdiag(const EmbeddingBatch& batch,
                                         const std::vector<Matrix>& Zb,
                                         const std::vector<std::vector<int>>& partition) {
  const int d = batch.d, c = batch.c;
  if (Zb.size() != partition.size()) throw std::invalid_argument("blockdiag: block count");
  std::vector<Matrix> preds(batch.n, Matrix::Zero(batch.s, c));
  for (int i = 0; i < batch.n; ++i) {
    Matrix G = gram(batch.X[i]);
    for (size_t b = 0; b < partition.size(); ++b) {
      const auto& feats = partition[b];
      int db = static_cast<int>(feats.size());
      check_shape(Zb[b], db * d, db * c, "sa_blockdiag");
      Matrix M = Matrix::Zero(d, c);
      for (int k = 0; k < db; ++k)
        for (int l = 0; l < db; ++l)
          M += G(feats[k], feats[l]) * Zb[b].block(k * d, l * c, d, c);
      preds[i] += batch.X[i] * M;
    }
  }
  return preds;
}

std::vector<Matrix> forward_sa_relu(const EmbeddingBatch& batch, const ArrangementSet& arr,
                                    const std::vector<Matrix>& Zj) {
  const int s = batch.s, d = batch.d, c = batch.c;
  if (Zj.size() != arr.masks.size()) throw std::invalid_argument("sa_relu: term count");
  std::vector<Matrix> preds(batch.n, Matrix::Zero(s, c));
  for (int i = 0; i < batch.n; ++i) {
    const Matrix& X = batch.X[i];
    for (size_t j = 0; j < Zj.size(); ++j) {
      check_shape(Zj[j], d * d, d * c, "sa_relu");
      Vector Di = mask_slice(arr.masks[j], i, s * s);
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          // G_{i,j}^{(k,l)} = sum_t X[t,k] X[t,l] D_j^{(i,t)} (diagonal s x s)
          Vector g = Vector::Zero(s);
          for (int t = 0; t < s; ++t)
            g += X(t, k) * X(t, l) * Di.segment(t * s, s);
          preds[i] += g.asDiagonal() * (X * Zj[j].block(k * d, l * c, d, c));
        }
    }
  }
  return preds;
}

std::vector<Matrix> forward_sa_relu_reference(const EmbeddingBatch& batch,
                                              const ArrangementSet& arr,
                                              const std::vector<Matrix>& Zj) {
  // Kronecker definition of G_{i,j} = (X_i kron I_s)^T D_j^{(i)} (X_i kron I_s).
  const int s = batch.s, d = batch.d, c = batch.c;
  std::vector<Matrix> preds(batch.n, Matrix::Zero(s, c));
  for (int i = 0; i < batch.n; ++i) {
    Matrix XI = kron(batch.X[i], Matrix::Identity(s, s));
    for (size_t j = 0; j < Zj.size(); ++j) {
      Vector Di = mask_slice(arr.masks[j], i, s * s);
      Matrix G = XI.transpose() * Di.asDiagonal() * XI;  // ds x ds
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          preds[i] += G.block(k * s, l * s, s, s) *
                      (batch.X[i] * Zj[j].block(k * d, l * c, d, c));
    }
  }
  return preds;
}

Matrix mixer_grouped_layout(const Matrix& Zperm, int s, int d, int c) {
  check_shape(Zperm, s * s, d * c, "mixer layout");
  // permuted column index k*c + p  ->  grouped column index p*d + k
  Matrix Z(s * s, d * c);
  for (int k = 0; k < d; ++k)
    for (int p = 0; p < c; ++p) Z.col(p * d + k) = Zperm.col(k * c + p);
  return Z;
}

std::vector<Matrix> forward_mixer_linear(const EmbeddingBatch& batch, const Matrix& Z) {
  const int s = batch.s, d = batch.d, c = batch.c;
  check_shape(Z, s * s, d * c, "mixer_linear");
  // Grouped path: f_p = Z^{(p)} applied to the token rows of X_i, where
  // Z^{(p,t)}[o,k] corresponds to permuted-layout entry Z~[t*s+o, k*c+p].
  Matrix Zgrp = mixer_grouped_layout(Z, s, d, c);
  std::vector<Matrix> preds(batch.n);
  for (int i = 0; i < batch.n; ++i) {
    Matrix Y(s, c);
    for (int p = 0; p < c; ++p) {
      Vector f = Vector::Zero(s);
      for (int t = 0; t < s; ++t)
        f += Zgrp.block(t * s, p * d, s, d) * batch.X[i].row(t).transpose();
      Y.col(p) = f;
    }
    preds[i] = Y;
  }
  return preds;
}

std::vector<Matrix> forward_mixer_linear_reference(const EmbeddingBatch& batch,
                                                   const Matrix& Z) {
  const int s = batch.s, d = batch.d, c = batch.c;
  check_shape(Z, s * s, d * c, "mixer_linear");
  std::vector<Matrix> preds(batch.n, Matrix::Zero(s, c));
  for (int i = 0; i < batch.n; ++i)
    for (int t = 0; t < s; ++t)
      for (int k = 0; k < d; ++k)
        preds[i] += batch.X[i](t, k) * Z.block(t * s, k * c, s, c);
  return preds;
}

std::vector<Matrix> forward_mixer_relu(const EmbeddingBatch& batch, const ArrangementSet& arr,
                                       const std::vector<Matrix>& Zj) {
  const int s = batch.s, d = batch.d, c = batch.c;
  if (Zj.size() != arr.masks.size()) throw std::invalid_argument("mixer_relu: term count");
  std::vector<Matrix> preds(batch.n, Matrix::Zero(s, c));
  for (int i = 0; i < batch.n; ++i)
    for (size_t j = 0; j < Zj.size(); ++j) {
      check_shape(Zj[j], s * s, d * c, "mixer_relu");
      Vector Di = mask_slice(arr.masks[j], i, s * d);
      for (int t = 0; t < s; ++t)
        for (int k = 0; k < d; ++k)
          preds[i] += batch.X[i](t, k) * (Di.segment(k * s, s).asDiagonal() *
                                          Zj[j].block(t * s, k * c, s, c));
    }
  return preds;
}

std::vector<Matrix> forward_fno(const EmbeddingBatch& batch, const std::vector<Matrix>& Zj,
                                Activation act, const ArrangementSet* arr) {
  const int s = batch.s, d = batch.d, c = batch.c;
  std::vector<Matrix> preds(batch.n, Matrix::Zero(s, c));
  if (act == Activation::kLinear) {
    if (Zj.size() != 1) throw std::invalid_argument("fno linear: single Z expected");
    check_shape(Zj[0], s * d, c, "fno");
    for (int i = 0; i < batch.n; ++i) preds[i] = circ(batch.X[i]) * Zj[0];
    return preds;
  }
  if (!arr || Zj.size() != arr->masks.size())
    throw std::invalid_argument("fno relu: arrangements required");
  for (int i = 0; i < batch.n; ++i) {
    Matrix C = circ(batch.X[i]);
    for (size_t j = 0; j < Zj.size(); ++j) {
      check_shape(Zj[j], s * d, c, "fno");
      preds[i] += mask_slice(arr->masks[j], i, s).asDiagonal() * (C * Zj[j]);
    }
  }
  return preds;
}

std::vector<Matrix> forward_bfno(const EmbeddingBatch& batch,
                                 const std::vector<std::vector<Matrix>>& Z, Activation act,
                                 int B, const std::vector<ArrangementSet>* arr) {
  const int s = batch.s, d = batch.d, c = batch.c;
  if (B < 1 || d % B != 0 || c % B != 0)
    throw std::invalid_argument("bfno: B must divide d and c");
  if (static_cast<int>(Z.size()) != B) throw std::invalid_argument("bfno: block count");
  const int db = d / B, cb = c / B;
  std::vector<Matrix> preds(batch.n, Matrix::Zero(s, c));
  for (int i = 0; i < batch.n; ++i)
    for (int b = 0; b < B; ++b) {
      Matrix C = circ(batch.X[i].middleCols(b * db, db));
      if (act == Activation::kLinear) {
        if (Z[b].size() != 1) throw std::invalid_argument("bfno linear: single Z per block");
        check_shape(Z[b][0], s * db, cb, "bfno");
        preds[i].middleCols(b * cb, cb) = C * Z[b][0];
      } else {
        if (!arr || Z[b].size() != (*arr)[b].masks.size())
          throw std::invalid_argument("bfno relu: arrangements required");
        for (size_t j = 0; j < Z[b].size(); ++j) {
          check_shape(Z[b][j], s * db, cb, "bfno");
          preds[i].middleCols(b * cb, cb) +=
              mask_slice((*arr)[b].masks[j], i, s).asDiagonal() * (C * Z[b][j]);
        }
      }
    }
  return preds;
}

std::vector<Matrix> forward_generic(const EmbeddingBatch& batch, const GenericMix& mix,
                                    const std::vector<Matrix>& Zj, Activation act,
                                    const ArrangementSet* arr) {
  const int s = batch.s, d = batch.d, c = batch.c;
  std::vector<Matrix> preds(batch.n, Matrix::Zero(s, c));
  for (int i = 0; i < batch.n; ++i) {
    Matrix H = mix.apply(batch.X[i]);
    if (act == Activation::kLinear) {
      if (Zj.size() != 1) throw std::invalid_argument("generic linear: single Z expected");
      check_shape(Zj[0], d, c, "generic");
      preds[i] = H * Zj[0];
    } else {
      if (!arr || Zj.size() != arr->masks.size())
        throw std::invalid_argument("generic relu: arrangements required");
      for (size_t j = 0; j < Zj.size(); ++j) {
        check_shape(Zj[j], d, c, "generic");
        preds[i] += mask_slice(arr->masks[j], i, s).asDiagonal() * (H * Zj[j]);
      }
    }
  }
  return preds;
}

std::vector<Matrix> forward(const HeadSpec& spec, const ConvexVars& vars,
                            const EmbeddingBatch& batch) {
  spec.validate();
  const bool linear = spec.activation == Activation::kLinear;
  switch (spec.kind) {
    case HeadKind::kSelfAttention:
      return linear ? forward_sa_linear(batch, vars.Z[0][0])
                    : forward_sa_relu(batch, spec.arrangements[0], vars.Z[0]);
    case HeadKind::kSelfAttentionBlockDiag: {
      if (!linear) throw std::invalid_argument("sa_blockdiag supports linear activation");
      std::vector<Matrix> Zb;
      for (const auto& blk : vars.Z) Zb.push_back(blk[0]);
      return forward_sa_blockdiag(batch, Zb, spec.partition);
    }
    case HeadKind::kMixer:
      return linear ? forward_mixer_linear(batch, vars.Z[0][0])
                    : forward_mixer_relu(batch, spec.arrangements[0], vars.Z[0]);
    case HeadKind::kFno:
      return forward_fno(batch, vars.Z[0], spec.activation,
                         linear ? nullptr : &spec.arrangements[0]);
    case HeadKind::kBfno:
      return forward_bfno(batch, vars.Z, spec.activation, spec.B,
                          linear ? nullptr : &spec.arrangements);
    case HeadKind::kGenericH:
      return forward_generic(batch, spec.mix, vars.Z[0], spec.activation,
                             linear ? nullptr : &spec.arrangements[0]);
  }
  throw std::logic_error("unreachable");
}

std::vector<Matrix> forward_reference(const HeadSpec& spec, const ConvexVars& vars,
                                      const EmbeddingBatch& batch) {
  spec.validate();
  if (spec.kind == HeadKind::kSelfAttention) {
    return spec.activation == Activation::kLinear
               ? forward_sa_linear_reference(batch, vars.Z[0][0])
               : forward_sa_relu_reference(batch, spec.arrangements[0], vars.Z[0]);
  }
  if (spec.kind == HeadKind::kMixer && spec.activation == Activation::kLinear)
    return forward_mixer_linear_reference(batch, vars.Z[0][0]);
  return forward(spec, vars, batch);
}

namespace {

Eigen::RowVectorXd pooled(const Matrix& P) { return P.colwise().mean(); }

Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& z) {
  Eigen::RowVectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

double loss_value(Loss loss, int r, const std::vector<Matrix>& preds,
                  const std::vector<Matrix>& Y) {
  double total = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (r == 1) {
      Eigen::RowVectorXd p = pooled(preds[i]);
      if (loss == Loss::kSquared) {
        total += 0.5 * (p - Y[i].row(0)).squaredNorm();
      } else {
        double lse = std::log((p.array() - p.maxCoeff()).exp().sum()) + p.maxCoeff();
        total += lse - p.dot(Y[i].row(0));
      }
    } else {
      if (loss != Loss::kSquared)
        throw std::invalid_argument("cross-entropy requires r == 1");
      total += 0.5 * (preds[i] - Y[i]).squaredNorm();
    }
  }
  return total;
}

std::vector<Matrix> loss_gradient(Loss loss, int r, const std::vector<Matrix>& preds,
                                  const std::vector<Matrix>& Y) {
  std::vector<Matrix> grads(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    if (r == 1) {
      Eigen::RowVectorXd p = pooled(preds[i]);
      Eigen::RowVectorXd gp = (loss == Loss::kSquared)
                                  ? Eigen::RowVectorXd(p - Y[i].row(0))
                                  : Eigen::RowVectorXd(softmax(p) - Y[i].row(0));
      grads[i] = Matrix::Ones(preds[i].rows(), 1) * gp / preds[i].rows();
    } else {
      if (loss != Loss::kSquared)
        throw std::invalid_argument("cross-entropy requires r == 1");
      grads[i] = preds[i] - Y[i];
    }
  }
  return grads;
}

double regularizer(const HeadSpec& spec, const ConvexVars& vars) {
  double total = 0.0;
  for (const auto& blk : vars.Z)
    for (const Matrix& Z : blk) total += nuclear_norm(Z);
  return spec.beta * total;
}

ObjectiveParts objective(const HeadSpec& spec, const ConvexVars& vars,
                         const EmbeddingBatch& batch) {
  ObjectiveParts parts;
  parts.loss = loss_value(spec.loss, spec.r, forward(spec, vars, batch), batch.Y);
  parts.reg = regularizer(spec, vars);
  parts.total = parts.loss + parts.reg;
  return parts;
}

ConvexVars loss_grad_vars(const HeadSpec& spec, const ConvexVars& vars,
                          const EmbeddingBatch& batch) {
  spec.validate();
  std::vector<Matrix> R = loss_gradient(spec.loss, spec.r, forward(spec, vars, batch), batch.Y);
  ConvexVars grad = zero_vars(spec);
  const int s = spec.s, d = spec.d, c = spec.c;
  const bool linear = spec.activation == Activation::kLinear;

  for (int i = 0; i < batch.n; ++i) {
    const Matrix& X = batch.X[i];
    switch (spec.kind) {
      case HeadKind::kSelfAttention: {
        if (linear) {
          Matrix G = gram(X);
          Matrix XtR = X.transpose() * R[i];
          for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l)
              grad.Z[0][0].block(k * d, l * c, d, c) += G(k, l) * XtR;
        } else {
          const ArrangementSet& arr = spec.arrangements[0];
          for (size_t j = 0; j < arr.masks.size(); ++j) {
            Vector Di = arr.masks[j].segment(static_cast<Eigen::Index>(i) * s * s, s * s);
            for (int k = 0; k < d; ++k)
              for (int l = 0; l < d; ++l) {
                Vector g = Vector::Zero(s);
                for (int t = 0; t < s; ++t)
                  g += X(t, k) * X(t, l) * Di.segment(t * s, s);
                grad.Z[0][j].block(k * d, l * c, d, c) +=
                    X.transpose() * (g.asDiagonal() * R[i]);
              }
          }
        }
        break;
      }
      case HeadKind::kSelfAttentionBlockDiag: {
        Matrix G = gram(X);
        Matrix XtR = X.transpose() * R[i];
        for (size_t b = 0; b < spec.partition.size(); ++b) {
          const auto& feats = spec.partition[b];
          for (size_t k = 0; k < feats.size(); ++k)
            for (size_t l = 0; l < feats.size(); ++l)
              grad.Z[b][0].block(k * d, l * c, d, c) += G(feats[k], feats[l]) * XtR;
        }
        break;
      }
      case HeadKind::kMixer: {
        for (int j = 0; j < spec.num_terms(0); ++j) {
          for (int t = 0; t < s; ++t)
            for (int k = 0; k < d; ++k) {
              Matrix masked = R[i];
              if (!linear) {
                Vector Dk = spec.arrangements[0].masks[j].segment(
                    static_cast<Eigen::Index>(i) * s * d + k * s, s);
                masked = Dk.asDiagonal() * R[i];
              }
              grad.Z[0][j].block(t * s, k * c, s, c) += X(t, k) * masked;
            }
        }
        break;
      }
      case HeadKind::kFno: {
        Matrix Ct = circ(X).transpose();
        for (int j = 0; j < spec.num_terms(0); ++j) {
          if (linear) {
            grad.Z[0][j] += Ct * R[i];
          } else {
            Vector Di = spec.arrangements[0].masks[j].segment(
                static_cast<Eigen::Index>(i) * s, s);
            grad.Z[0][j] += Ct * (Di.asDiagonal() * R[i]);
          }
        }
        break;
      }
      case HeadKind::kBfno: {
        const int db = d / spec.B, cb = c / spec.B;
        for (int b = 0; b < spec.B; ++b) {
          Matrix Ct = circ(X.middleCols(b * db, db)).transpose();
          Matrix Rb = R[i].middleCols(b * cb, cb);
          for (int j = 0; j < spec.num_terms(b); ++j) {
            if (linear) {
              grad.Z[b][j] += Ct * Rb;
            } else {
              Vector Di = spec.arrangements[b].masks[j].segment(
                  static_cast<Eigen::Index>(i) * s, s);
              grad.Z[b][j] += Ct * (Di.asDiagonal() * Rb);
            }
          }
        }
        break;
      }
      case HeadKind::kGenericH: {
        Matrix Ht = spec.mix.apply(X).transpose();
        for (int j = 0; j < spec.num_terms(0); ++j) {
          if (linear) {
            grad.Z[0][j] += Ht * R[i];
          } else {
            Vector Di = spec.arrangements[0].masks[j].segment(
                static_cast<Eigen::Index>(i) * s, s);
            grad.Z[0][j] += Ht * (Di.asDiagonal() * R[i]);
          }
        }
        break;
      }
    }
  }
  return grad;
}

}  // namespace cvxattn
