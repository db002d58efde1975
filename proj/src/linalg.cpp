#include "cvxattn/linalg.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cvxattn {

Matrix GenericMix::apply(const Matrix& X) const {
  switch (kind) {
    case Kind::kIdentity:
      return X;
    case Kind::kPool: {
      if (pool.rows() != X.rows() || pool.cols() != X.rows())
        throw std::invalid_argument("pool matrix must be s x s");
      return pool * X;
    }
    case Kind::kFnet: {
      // FNet mixes with DFTs along both axes and keeps the real part.
      ComplexMatrix Fs = dft_matrix(static_cast<int>(X.rows()));
      ComplexMatrix Fd = dft_matrix(static_cast<int>(X.cols()));
      return (Fs * X.cast<std::complex<double>>() * Fd.transpose()).real();
    }
  }
  throw std::logic_error("unreachable");
}

void EmbeddingBatch::validate() const {
  if (n < 1) throw std::invalid_argument("batch needs at least one sample");
  if (r != 1 && r != s) throw std::invalid_argument("label rows must be 1 or s");
  if (static_cast<int>(X.size()) != n || static_cast<int>(Y.size()) != n)
    throw std::invalid_argument("sample count mismatch");
  for (int i = 0; i < n; ++i) {
    if (X[i].rows() != s || X[i].cols() != d) throw std::invalid_argument("X dims mismatch");
    if (Y[i].rows() != r || Y[i].cols() != c) throw std::invalid_argument("Y dims mismatch");
    if (!X[i].allFinite() || !Y[i].allFinite())
      throw std::invalid_argument("non-finite batch entries");
  }
}

const char* to_string(HeadKind k) {
  switch (k) {
    case HeadKind::kSelfAttention: return "sa";
    case HeadKind::kSelfAttentionBlockDiag: return "sa_blockdiag";
    case HeadKind::kMixer: return "mixer";
    case HeadKind::kFno: return "fno";
    case HeadKind::kBfno: return "bfno";
    case HeadKind::kGenericH: return "generic_h";
  }
  return "?";
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kGatedRelu: return "gated_relu";
  }
  return "?";
}

const char* to_string(Loss l) {
  return l == Loss::kSquared ? "squared" : "cross_entropy";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "sa") return HeadKind::kSelfAttention;
  if (s == "sa_blockdiag") return HeadKind::kSelfAttentionBlockDiag;
  if (s == "mixer") return HeadKind::kMixer;
  if (s == "fno") return HeadKind::kFno;
  if (s == "bfno") return HeadKind::kBfno;
  if (s == "generic_h") return HeadKind::kGenericH;
  throw std::invalid_argument("unknown head kind: " + s);
}

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "relu") return Activation::kRelu;
  if (s == "gated_relu") return Activation::kGatedRelu;
  throw std::invalid_argument("unknown activation: " + s);
}

Loss loss_from_string(const std::string& s) {
  if (s == "squared") return Loss::kSquared;
  if (s == "cross_entropy") return Loss::kCrossEntropy;
  throw std::invalid_argument("unknown loss: " + s);
}

Vector vec(const Matrix& M) {
  return Eigen::Map<const Vector>(M.data(), M.size());
}

Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw std::invalid_argument("unvec size mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

Matrix commutation_matrix(int c, int s) {
  if (c < 1 || s < 1) throw std::invalid_argument("commutation dims must be >= 1");
  Matrix K = Matrix::Zero(c * s, c * s);
  // vec(V)[j*s + i] = V(i,j) for V in R^{s x c}; vec(V^T)[i*c + j] = V(i,j).
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < c; ++j) K(i * c + j, j * s + i) = 1.0;
  return K;
}

Matrix circ(const Matrix& X) {
  const Eigen::Index s = X.rows(), d = X.cols();
  Matrix out(s, s * d);
  for (Eigen::Index u = 0; u < s; ++u)
    for (Eigen::Index t = 0; t < s; ++t) out.block(t, u * d, 1, d) = X.row((t + u) % s);
  return out;
}

Matrix gram(const Matrix& X) { return X.transpose() * X; }

std::vector<std::vector<int>> detect_gram_blocks(const EmbeddingBatch& batch, double tol) {
  if (tol < 0) throw std::invalid_argument("tol must be >= 0");
  const int d = batch.d;
  std::vector<int> parent(d);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Matrix& Xi : batch.X) {
    Matrix G = gram(Xi);
    for (int k = 0; k < d; ++k)
      for (int l = k + 1; l < d; ++l)
        if (std::abs(G(k, l)) > tol) parent[find(k)] = find(l);
  }
  std::vector<std::vector<int>> parts;
  std::vector<int> where(d, -1);
  for (int k = 0; k < d; ++k) {
    int root = find(k);
    if (where[root] < 0) {
      where[root] = static_cast<int>(parts.size());
      parts.emplace_back();
    }
    parts[where[root]].push_back(k);
  }
  return parts;
}

Svd svd(const Matrix& A) {
  Eigen::JacobiSVD<Matrix> dec(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Svd out{dec.matrixU(), dec.singularValues(), dec.matrixV()};
  for (Eigen::Index j = 0; j < out.U.cols(); ++j) {
    Eigen::Index imax;
    out.U.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.U(imax, j) < 0) {
      out.U.col(j) = -out.U.col(j);
      out.V.col(j) = -out.V.col(j);
    }
  }
  return out;
}

double spectral_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(A).singularValues()(0);
}

ComplexMatrix dft_matrix(int n) {
  ComplexMatrix F(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double phase = -2.0 * M_PI * static_cast<double>(a) * static_cast<double>(b) / n;
      F(a, b) = scale * std::complex<double>(std::cos(phase), std::sin(phase));
    }
  return F;
}

static Matrix apply_activation(const Matrix& A, Activation act) {
  if (act == Activation::kLinear) return A;
  if (act == Activation::kRelu) return A.cwiseMax(0.0);
  throw std::invalid_argument("gated activation needs explicit gates");
}

FnoFourierResult fno_fourier_forward(const Matrix& X, const std::vector<ComplexMatrix>& V,
                                     const Matrix& W1, const Matrix& W2, Activation act,
                                     int h, int w) {
  const int s = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  if (h * w != s) throw std::invalid_argument("h*w must equal s");
  if (static_cast<int>(V.size()) != s) throw std::invalid_argument("V needs s token weights");
  for (const auto& Vt : V)
    if (Vt.rows() != d || Vt.cols() != d) throw std::invalid_argument("V^{(t)} must be d x d");

  ComplexMatrix F = [&] {
    ComplexMatrix Fh = dft_matrix(h), Fw = dft_matrix(w);
    ComplexMatrix out(s, s);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < h; ++j)
        out.block(i * w, j * w, w, w) = Fh(i, j) * Fw;
    return out;
  }();

  ComplexMatrix FX = F * X.cast<std::complex<double>>();
  ComplexMatrix mixed(s, d);
  for (int t = 0; t < s; ++t) mixed.row(t) = FX.row(t) * V[t];
  ComplexMatrix O = F.adjoint() * mixed;  // F is unitary, so F^{-1} = F^*

  FnoFourierResult res;
  res.imag_residue = O.imag().cwiseAbs().maxCoeff();
  res.pred = apply_activation(O.real() * W1, act) * W2;
  return res;
}

std::vector<ComplexMatrix> lift_spatial_weights(const std::vector<Matrix>& L, int h, int w) {
  const int s = h * w;
  if (static_cast<int>(L.size()) != s) throw std::invalid_argument("need s spatial weights");
  ComplexMatrix Fh = dft_matrix(h), Fw = dft_matrix(w);
  const double root_s = std::sqrt(static_cast<double>(s));
  std::vector<ComplexMatrix> V(s);
  for (int t = 0; t < s; ++t) {
    int th = t / w, tw = t % w;
    ComplexMatrix Vt = ComplexMatrix::Zero(L[0].rows(), L[0].cols());
    for (int u = 0; u < s; ++u) {
      int uh = u / w, uw = u % w;
      int neg = ((h - uh) % h) * w + (w - uw) % w;  // group negation in Z_h x Z_w
      Vt += Fh(th, uh) * Fw(tw, uw) * (root_s * L[neg].cast<std::complex<double>>());
    }
    V[t] = Vt;
  }
  return V;
}

Matrix fno_weight_stack(const std::vector<Matrix>& L) {
  const int s = static_cast<int>(L.size());
  const Eigen::Index d = L[0].cols();
  Matrix out(s * L[0].rows(), d);
  for (int u = 0; u < s; ++u) out.middleRows(u * L[0].rows(), L[0].rows()) = L[u];
  return out;
}

}  // namespace cvxattn
