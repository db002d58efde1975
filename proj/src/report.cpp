#include "cvxattn/report.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace cvxattn {

std::string report_to_json(const TrainReport& rep, double top1, double top5) {
  nlohmann::ordered_json j;
  j["loss"] = rep.loss;
  j["reg"] = rep.reg;
  j["total"] = rep.total;
  j["certificate_pass"] = rep.certificate_pass;
  j["certificate_norm"] = rep.certificate_norm;
  j["mode"] = rep.mode;
  j["iterations"] = rep.iterations;
  j["seed"] = rep.seed;
  j["diverged"] = rep.diverged;
  j["wall_time_s"] = rep.wall_time_s;
  if (top1 >= 0) j["top1"] = top1;
  if (top5 >= 0) j["top5"] = top5;
  j["trace"] = rep.trace;
  return j.dump(2);
}

void write_report(const std::string& path, const TrainReport& rep, double top1,
                  double top5) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write report: " + path);
  f << report_to_json(rep, top1, top5) << "\n";
}

namespace {

void put_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<char*>(b), 4);
}

uint32_t get_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_matrix(std::ofstream& f, const Matrix& M) {
  put_u32(f, static_cast<uint32_t>(M.rows()));
  put_u32(f, static_cast<uint32_t>(M.cols()));
  f.write(reinterpret_cast<const char*>(M.data()),
          static_cast<std::streamsize>(sizeof(double)) * M.size());
}

Matrix get_matrix(std::ifstream& f) {
  uint32_t rows = get_u32(f), cols = get_u32(f);
  Matrix M(rows, cols);
  f.read(reinterpret_cast<char*>(M.data()),
         static_cast<std::streamsize>(sizeof(double)) * M.size());
  return M;
}

void put_vector(std::ofstream& f, const Vector& v) {
  put_u32(f, static_cast<uint32_t>(v.size()));
  f.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double)) * v.size());
}

Vector get_vector(std::ifstream& f) {
  uint32_t n = get_u32(f);
  Vector v(n);
  f.read(reinterpret_cast<char*>(v.data()),
         static_cast<std::streamsize>(sizeof(double)) * v.size());
  return v;
}

void check_magic(std::ifstream& f, const char* magic, const std::string& path) {
  char buf[8];
  f.read(buf, 8);
  if (!f || std::string(buf, 8) != std::string(magic, 8))
    throw std::runtime_error("bad file magic in " + path);
}

}  // namespace

void write_convex_vars(const std::string& path, const ConvexVars& vars) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write: " + path);
  f.write("CVXVARS1", 8);
  put_u32(f, static_cast<uint32_t>(vars.Z.size()));
  for (const auto& blk : vars.Z) {
    put_u32(f, static_cast<uint32_t>(blk.size()));
    for (const Matrix& Z : blk) put_matrix(f, Z);
  }
}

ConvexVars read_convex_vars(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  check_magic(f, "CVXVARS1", path);
  ConvexVars vars;
  uint32_t nb = get_u32(f);
  vars.Z.resize(nb);
  for (uint32_t b = 0; b < nb; ++b) {
    uint32_t nt = get_u32(f);
    for (uint32_t j = 0; j < nt; ++j) vars.Z[b].push_back(get_matrix(f));
  }
  if (!f) throw std::runtime_error("truncated file: " + path);
  return vars;
}

void write_nc_weights(const std::string& path, const NonconvexWeights& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write: " + path);
  f.write("CVXWNC1\0", 8);
  put_u32(f, static_cast<uint32_t>(w.pairs.size()));
  for (const auto& blk : w.pairs) {
    put_u32(f, static_cast<uint32_t>(blk.size()));
    for (const WeightPair& p : blk) {
      put_matrix(f, p.W1);
      put_matrix(f, p.W2);
      put_u32(f, static_cast<uint32_t>(p.gate_index + 1));  // -1 stored as 0
    }
  }
}

NonconvexWeights read_nc_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  check_magic(f, "CVXWNC1\0", path);
  NonconvexWeights w;
  uint32_t nb = get_u32(f);
  w.pairs.resize(nb);
  for (uint32_t b = 0; b < nb; ++b) {
    uint32_t np = get_u32(f);
    for (uint32_t j = 0; j < np; ++j) {
      WeightPair p;
      p.W1 = get_matrix(f);
      p.W2 = get_matrix(f);
      p.gate_index = static_cast<int>(get_u32(f)) - 1;
      w.pairs[b].push_back(std::move(p));
    }
  }
  if (!f) throw std::runtime_error("truncated file: " + path);
  return w;
}

void write_arrangements(const std::string& path, const ArrangementSet& set) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write: " + path);
  f.write("CVXARR1\0", 8);
  put_u32(f, static_cast<uint32_t>(set.mode));
  put_u32(f, static_cast<uint32_t>(set.effective_rank));
  put_matrix(f, set.effective);
  put_u32(f, static_cast<uint32_t>(set.masks.size()));
  for (size_t j = 0; j < set.masks.size(); ++j) {
    put_vector(f, set.masks[j]);
    put_vector(f, set.witnesses[j]);
  }
  put_u32(f, static_cast<uint32_t>(set.gates.size()));
  for (const Vector& g : set.gates) put_vector(f, g);
}

ArrangementSet read_arrangements(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  check_magic(f, "CVXARR1\0", path);
  ArrangementSet set;
  set.mode = static_cast<ArrangementMode>(get_u32(f));
  set.effective_rank = static_cast<int>(get_u32(f));
  set.effective = get_matrix(f);
  uint32_t nm = get_u32(f);
  for (uint32_t j = 0; j < nm; ++j) {
    set.masks.push_back(get_vector(f));
    set.witnesses.push_back(get_vector(f));
  }
  uint32_t ng = get_u32(f);
  for (uint32_t j = 0; j < ng; ++j) set.gates.push_back(get_vector(f));
  if (!f) throw std::runtime_error("truncated file: " + path);
  return set;
}

double topk_accuracy(const std::vector<Matrix>& preds, const std::vector<Matrix>& Y, int k) {
  if (preds.empty()) return 0.0;
  int hits = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    Eigen::RowVectorXd p = preds[i].colwise().mean();
    Eigen::Index truth;
    Y[i].row(0).maxCoeff(&truth);
    double pt = p(truth);
    int better = 0;
    for (Eigen::Index j = 0; j < p.size(); ++j)
      if (p(j) > pt) ++better;
    if (better < k) ++hits;
  }
  return static_cast<double>(hits) / preds.size();
}

}  // namespace cvxattn
