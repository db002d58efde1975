#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cvxattn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Token-mixing architectures covered by the library.
enum class HeadKind { kSelfAttention, kSelfAttentionBlockDiag, kMixer, kFno, kBfno, kGenericH };

enum class Activation { kLinear, kRelu, kGatedRelu };

enum class Loss { kSquared, kCrossEntropy };

// Fixed (non-learnable) token mixing h(X) for the generic head.
struct GenericMix {
  enum class Kind { kIdentity, kPool, kFnet } kind = Kind::kIdentity;
  Matrix pool;  // s x s, used when kind == kPool

  Matrix apply(const Matrix& X) const;
};

// Training set {X_i in R^{s x d}, Y_i in R^{r x c}}, r in {1, s}.
struct EmbeddingBatch {
  int n = 0, s = 0, d = 0, r = 0, c = 0;
  std::vector<Matrix> X;
  std::vector<Matrix> Y;

  void validate() const;  // throws on dim mismatch / non-finite entries
};

const char* to_string(HeadKind k);
const char* to_string(Activation a);
const char* to_string(Loss l);
HeadKind head_kind_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);
Loss loss_from_string(const std::string& s);

}  // namespace cvxattn
