#include "cvxattn/norms.hpp"

#include <cmath>
#include <optional>
#include <limits>
#include <stdexcept>

#include "cvxattn/linalg.hpp"
#include "cvxattn/rng.hpp"

namespace cvxattn {

double nuclear_norm(const Matrix& Z) {
  if (Z.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(Z).singularValues().sum();
}

Matrix svt_prox(const Matrix& A, double tau) {
  if (tau < 0) throw std::invalid_argument("svt_prox: tau must be >= 0");
  if (tau == 0.0) return A;
  Svd dec = svd(A);
  Vector shrunk = (dec.sigma.array() - tau).max(0.0);
  return dec.U * shrunk.asDiagonal() * dec.V.transpose();
}

BMFactors rebalance(const BMFactors& f) {
  const Eigen::Index b = f.U.cols();
  Svd dec = svd(f.product());
  BMFactors out;
  out.U = Matrix::Zero(f.U.rows(), b);
  out.V = Matrix::Zero(f.V.rows(), b);
  Eigen::Index k = std::min<Eigen::Index>(b, dec.sigma.size());
  for (Eigen::Index j = 0; j < k; ++j) {
    double root = std::sqrt(dec.sigma(j));
    out.U.col(j) = root * dec.U.col(j);
    out.V.col(j) = root * dec.V.col(j);
  }
  return out;
}

Certificate bm_certificate(const Matrix& gradient_sum, double beta) {
  Certificate cert;
  cert.spectral_norm = spectral_norm(gradient_sum);
  cert.passes = cert.spectral_norm <= beta + 1e-9;
  return cert;
}

double cone_dual_norm(const Matrix& G, const Matrix& K, int restarts, uint64_t seed) {
  if (K.rows() == 0) return spectral_norm(G);
  Rng rng(seed ^ 0x51d9f3b2ull);
  const Eigen::Index n = G.rows();
  double best = 0.0;
  auto ascend = [&](Vector u) {
    u = project_to_cone(K, u);
    if (u.norm() < 1e-12) return;
    u /= u.norm();
    for (int it = 0; it < 200; ++it) {
      Vector w = G * (G.transpose() * u);
      if (w.norm() < 1e-15) break;
      Vector next = project_to_cone(K, w);
      if (next.norm() < 1e-14) break;
      next /= next.norm();
      if ((next - u).norm() < 1e-13) {
        u = next;
        break;
      }
      u = next;
    }
    best = std::max(best, (G.transpose() * u).norm());
  };
  Svd dec = svd(G);
  if (dec.U.cols() > 0) {
    ascend(dec.U.col(0));
    ascend(Vector(-dec.U.col(0)));
  }
  for (int r = 0; r < restarts; ++r) ascend(rng.gaussian_vector(static_cast<int>(n)));
  return best;
}

Vector project_to_cone(const Matrix& K, const Vector& u, int max_sweeps) {
  if (K.rows() == 0) return u;
  Vector x = u;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double worst = 0.0;
    for (int i = 0; i < K.rows(); ++i) {
      double nrm2 = K.row(i).squaredNorm();
      if (nrm2 <= 1e-300) continue;
      double a = K.row(i).dot(x);
      if (a < 0) {
        x -= (a / nrm2) * K.row(i).transpose();
        worst = std::min(worst, a);
      }
    }
    if (worst == 0.0) break;
  }
  return x;
}

double cone_violation(const Matrix& K, const Vector& u) {
  if (K.rows() == 0) return 0.0;
  return std::max(0.0, -(K * u).minCoeff());
}

namespace {

// Sum of ||u_k|| ||v_k|| after per-pair balancing (the balanced value equals
// the unbalanced product, so no rescaling is actually needed).
double pair_norm_sum(const BMFactors& f) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < f.U.cols(); ++k)
    total += f.U.col(k).norm() * f.V.col(k).norm();
  return total;
}

}  // namespace

NormBounds constrained_norm_bounds(const Matrix& Z, const Matrix& K, int restarts,
                                   uint64_t seed) {
  if (restarts < 1) throw std::invalid_argument("constrained_norm_bounds: restarts >= 1");
  NormBounds out;
  out.lower = nuclear_norm(Z);
  out.upper = std::numeric_limits<double>::infinity();
  if (Z.size() == 0 || Z.norm() == 0.0) {
    out.upper = 0.0;
    return out;
  }
  const Eigen::Index a = Z.rows(), c = Z.cols();
  const Eigen::Index b = std::min(a, c) + 2;  // slack columns help the search
  const double fit_tol = 1e-8 * std::max(1.0, Z.norm());

  auto project_cols = [&](Matrix& U) {
    for (Eigen::Index k = 0; k < U.cols(); ++k)
      U.col(k) = project_to_cone(K, U.col(k));
  };

  for (int rs = 0; rs < restarts; ++rs) {
    BMFactors f;
    if (rs == 0) {
      // SVD warm start: exact and optimal whenever the cone does not bite.
      Svd dec = svd(Z);
      f.U = Matrix::Zero(a, b);
      f.V = Matrix::Zero(c, b);
      for (Eigen::Index j = 0; j < dec.sigma.size() && j < b; ++j) {
        double root = std::sqrt(dec.sigma(j));
        f.U.col(j) = root * dec.U.col(j);
        f.V.col(j) = root * dec.V.col(j);
      }
    } else {
      Rng rng(seed + static_cast<uint64_t>(rs));
      f.U = rng.gaussian_matrix(a, b, 0.5);
      f.V = rng.gaussian_matrix(c, b, 0.5);
    }
    project_cols(f.U);

    // Penalized local search: rho * fit + smooth surrogate of the norm sum,
    // with cone projection after every step and rho annealed upward.
    const double eps = 1e-10;
    for (double rho : {1e2, 1e4, 1e6}) {
      double step = 1e-2;
      auto value = [&](const BMFactors& g) {
        double v = rho * (g.product() - Z).squaredNorm();
        for (Eigen::Index k = 0; k < b; ++k)
          v += std::sqrt((g.U.col(k).squaredNorm() + eps) *
                         (g.V.col(k).squaredNorm() + eps));
        return v;
      };
      double cur = value(f);
      for (int it = 0; it < 400; ++it) {
        Matrix R = 2.0 * rho * (f.product() - Z);
        Matrix gU = R * f.V, gV = R.transpose() * f.U;
        for (Eigen::Index k = 0; k < b; ++k) {
          double nu = std::sqrt(f.U.col(k).squaredNorm() + eps);
          double nv = std::sqrt(f.V.col(k).squaredNorm() + eps);
          gU.col(k) += (nv / nu) * f.U.col(k);
          gV.col(k) += (nu / nv) * f.V.col(k);
        }
        bool moved = false;
        for (int bt = 0; bt < 30; ++bt) {
          BMFactors trial{f.U - step * gU, f.V - step * gV};
          project_cols(trial.U);
          double tv = value(trial);
          if (tv < cur - 1e-12) {
            f = trial;
            cur = tv;
            step *= 1.5;
            moved = true;
            break;
          }
          step *= 0.5;
        }
        if (!moved) break;
      }
    }

    // Polish the fit: V is unconstrained, so solve for it exactly given U.
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(f.U);
    f.V = cod.solve(Z).transpose();

    if ((f.product() - Z).norm() <= fit_tol) {
      bool feasible = true;
      for (Eigen::Index k = 0; k < b; ++k)
        if (cone_violation(K, f.U.col(k)) > 1e-8 * std::max(1.0, f.U.col(k).norm()))
          feasible = false;
      if (feasible) out.upper = std::min(out.upper, pair_norm_sum(f));
    }
  }
  if (out.upper < out.lower) out.upper = out.lower;  // numerical guard on the sandwich
  return out;
}

std::vector<BallSample> sample_constrained_ball(const Matrix& K, int count, uint64_t seed) {
  std::vector<BallSample> out;
  if (count < 1) return out;
  Rng rng(seed);
  std::vector<Matrix> extremes;
  const int dim = 2;  // 2x2 visualization slice

  auto feasible_unit = [&](const Vector& u0) -> std::optional<Vector> {
    Vector u = project_to_cone(K, u0);
    if (u.norm() < 1e-9) return std::nullopt;
    return u / u.norm();
  };

  int attempts = 0;
  while (static_cast<int>(extremes.size()) < count && attempts < 100 * count) {
    ++attempts;
    Matrix Z;
    if (attempts % 2 == 0) {
      // z3 = Z(1,0) = 0 via u with zero second coordinate (when cone-feasible)
      Vector u(dim);
      u << (rng.uniform() < 0.5 ? 1.0 : -1.0), 0.0;
      if (cone_violation(K, u) > 1e-12) continue;
      Vector v = rng.gaussian_vector(dim);
      if (v.norm() < 1e-12) continue;
      Z = u * (v / v.norm()).transpose();
    } else {
      // z3 = 0 via v with zero first coordinate; u any cone-feasible unit
      auto u = feasible_unit(rng.gaussian_vector(dim));
      if (!u) continue;
      Vector v(dim);
      v << 0.0, (rng.uniform() < 0.5 ? 1.0 : -1.0);
      Z = (*u) * v.transpose();
    }
    extremes.push_back(Z);
    out.push_back({Z, true});
  }
  // Convex combinations stay in the hull (and keep z3 = 0).
  const int hull = count;
  for (int k = 0; k < hull && extremes.size() >= 2; ++k) {
    int i = static_cast<int>(rng.uniform_index(extremes.size()));
    int j = static_cast<int>(rng.uniform_index(extremes.size()));
    double lam = rng.uniform();
    out.push_back({lam * extremes[i] + (1 - lam) * extremes[j], false});
  }
  return out;
}

}  // namespace cvxattn
