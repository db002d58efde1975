#include "cvxattn/data.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cvxattn/rng.hpp"

namespace cvxattn {

EmbeddingBatch gen_gaussian_classes(int n, int s, int d, int k, double separation,
                                    uint64_t seed) {
  if (k < 2) throw std::invalid_argument("gaussian_classes: need k >= 2");
  Rng rng(seed);
  std::vector<Matrix> means;
  for (int cls = 0; cls < k; ++cls) means.push_back(rng.gaussian_matrix(s, d, separation));
  EmbeddingBatch batch;
  batch.n = n;
  batch.s = s;
  batch.d = d;
  batch.r = 1;
  batch.c = k;
  for (int i = 0; i < n; ++i) {
    int cls = i % k;  // balanced classes
    batch.X.push_back(means[cls] + rng.gaussian_matrix(s, d));
    Matrix y = Matrix::Zero(1, k);
    y(0, cls) = 1.0;
    batch.Y.push_back(y);
  }
  batch.validate();
  return batch;
}

PlantedHead gen_planted_head(HeadKind kind, Activation act, int n, int s, int d, int c,
                             uint64_t seed, int m) {
  Rng rng(seed);
  PlantedHead out;
  out.spec.kind = kind;
  out.spec.activation = act;
  out.spec.s = s;
  out.spec.d = d;
  out.spec.c = c;
  out.spec.r = s;
  out.spec.beta = 0.0;
  out.batch.n = n;
  out.batch.s = s;
  out.batch.d = d;
  out.batch.r = s;
  out.batch.c = c;
  for (int i = 0; i < n; ++i) out.batch.X.push_back(rng.gaussian_matrix(s, d));
  if (act != Activation::kLinear)
    throw std::invalid_argument("planted_head: linear activation only");
  out.weights = random_weights(out.spec, m, seed + 1);
  out.batch.Y = nc_forward(out.spec, out.weights, out.batch);
  out.batch.validate();
  return out;
}

EmbeddingBatch gen_blockdiag_gram(int n, int s, int d, int c, int B, uint64_t seed) {
  if (B < 1 || d % B != 0 || s % B != 0)
    throw std::invalid_argument("blockdiag_gram: B must divide d and s");
  Rng rng(seed);
  EmbeddingBatch batch;
  batch.n = n;
  batch.s = s;
  batch.d = d;
  batch.r = s;
  batch.c = c;
  const int db = d / B, sb = s / B;
  for (int i = 0; i < n; ++i) {
    // Feature group b lives only on token rows of group b, so cross-group
    // Gram entries vanish identically.
    Matrix X = Matrix::Zero(s, d);
    for (int b = 0; b < B; ++b)
      X.block(b * sb, b * db, sb, db) = rng.gaussian_matrix(sb, db);
    batch.X.push_back(X);
    batch.Y.push_back(rng.gaussian_matrix(s, c));
  }
  batch.validate();
  return batch;
}

namespace {

void write_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<char*>(b), 4);
}

uint32_t read_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f64(std::ofstream& f, double v) {
  static_assert(sizeof(double) == 8);
  f.write(reinterpret_cast<const char*>(&v), 8);
}

double read_f64(std::ifstream& f) {
  double v;
  f.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

void write_embedding_file(const std::string& path, const EmbeddingBatch& batch) {
  batch.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write("CVXATTN1", 8);
  write_u32(f, batch.n);
  write_u32(f, batch.s);
  write_u32(f, batch.d);
  write_u32(f, batch.r);
  write_u32(f, batch.c);
  for (const Matrix& X : batch.X)
    for (int i = 0; i < X.rows(); ++i)
      for (int j = 0; j < X.cols(); ++j) write_f64(f, X(i, j));
  for (const Matrix& Y : batch.Y)
    for (int i = 0; i < Y.rows(); ++i)
      for (int j = 0; j < Y.cols(); ++j) write_f64(f, Y(i, j));
  if (!f) throw std::runtime_error("write failed: " + path);
}

EmbeddingBatch read_embedding_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "CVXATTN1", 8) != 0)
    throw std::runtime_error("bad embedding file magic: " + path);
  EmbeddingBatch batch;
  batch.n = static_cast<int>(read_u32(f));
  batch.s = static_cast<int>(read_u32(f));
  batch.d = static_cast<int>(read_u32(f));
  batch.r = static_cast<int>(read_u32(f));
  batch.c = static_cast<int>(read_u32(f));
  for (int k = 0; k < batch.n; ++k) {
    Matrix X(batch.s, batch.d);
    for (int i = 0; i < batch.s; ++i)
      for (int j = 0; j < batch.d; ++j) X(i, j) = read_f64(f);
    batch.X.push_back(std::move(X));
  }
  for (int k = 0; k < batch.n; ++k) {
    Matrix Y(batch.r, batch.c);
    for (int i = 0; i < batch.r; ++i)
      for (int j = 0; j < batch.c; ++j) Y(i, j) = read_f64(f);
    batch.Y.push_back(std::move(Y));
  }
  if (!f) throw std::runtime_error("truncated embedding file: " + path);
  batch.validate();
  return batch;
}

}  // namespace cvxattn
