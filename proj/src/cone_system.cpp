#include "conereg/cone_system.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "conereg/errors.hpp"
#include "conereg/kernels.hpp"

namespace conereg {

Eigen::VectorXd ConeSystem::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(m);
  for (int i = 0; i < m; ++i) {
    out[i] = row_dot(i, x);
  }
  return out;
}

Eigen::VectorXd ConeSystem::multipliers_from_residual(
    const Eigen::VectorXd& r) const {
  return gram->solve(apply(r));
}

Eigen::VectorXd ConeSystem::apply_transpose(const Eigen::VectorXd& lam) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i) {
    const double li = lam[i];
    if (li == 0.0) continue;
    out[i] += band(i, 0) * li;
    out[i + 1] += band(i, 1) * li;
    out[i + 2] += band(i, 2) * li;
  }
  return out;
}

ConeSystem build_cone_system(const Signal& signal, bool normalize_rows) {
  ConeSystem cone;
  cone.n = signal.size();
  cone.m = cone.n - 2;
  cone.weights = signal.w;
  cone.normalized_rows = normalize_rows;

  cone.band.resize(cone.m, 3);
  for (int i = 0; i < cone.m; ++i) {
    const double d1 = signal.z[i + 1] - signal.z[i];
    const double d2 = signal.z[i + 2] - signal.z[i + 1];
    double c0 = 1.0 / d1;
    double c2 = 1.0 / d2;
    double c1 = -(c0 + c2);
    if (normalize_rows) {
      const double norm = std::sqrt(c0 * c0 + c1 * c1 + c2 * c2);
      c0 /= norm;
      c1 /= norm;
      c2 /= norm;
    }
    cone.band(i, 0) = c0;
    cone.band(i, 1) = c1;
    cone.band(i, 2) = c2;
  }

  cone.A = Eigen::MatrixXd::Zero(cone.m, cone.n);
  for (int i = 0; i < cone.m; ++i) {
    cone.A(i, i) = cone.band(i, 0);
    cone.A(i, i + 1) = cone.band(i, 1);
    cone.A(i, i + 2) = cone.band(i, 2);
  }

  cone.row_metric.resize(cone.m);
  for (int i = 0; i < cone.m; ++i) {
    cone.row_metric[i] = cone.band(i, 0) * cone.band(i, 0) / signal.w[i] +
                         cone.band(i, 1) * cone.band(i, 1) / signal.w[i + 1] +
                         cone.band(i, 2) * cone.band(i, 2) / signal.w[i + 2];
  }

  // Polar edges gamma^i = W^{-1} A_i^T, then a W-orthonormal pair spanning
  // the affine sequences, which A annihilates.
  cone.gamma = Eigen::MatrixXd::Zero(cone.n, cone.n);
  for (int i = 0; i < cone.m; ++i) {
    cone.gamma(i, i) = cone.band(i, 0) / signal.w[i];
    cone.gamma(i + 1, i) = cone.band(i, 1) / signal.w[i + 1];
    cone.gamma(i + 2, i) = cone.band(i, 2) / signal.w[i + 2];
  }
  const Eigen::VectorXd& w = signal.w;
  auto wdot = [&w](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a.array() * w.array() * b.array()).sum();
  };
  Eigen::VectorXd g_const = Eigen::VectorXd::Ones(cone.n);
  g_const /= std::sqrt(wdot(g_const, g_const));
  Eigen::VectorXd g_lin = signal.z - wdot(signal.z, g_const) * g_const;
  g_lin /= std::sqrt(wdot(g_lin, g_lin));
  cone.gamma.col(cone.m) = g_const;
  cone.gamma.col(cone.m + 1) = g_lin;

  // Dual frame: beta^T W gamma = -I. The first m columns are
  // -W^{-1} A^T (A W^{-1} A^T)^{-1}; the Gram matrix is pentadiagonal SPD,
  // so a banded Cholesky handles it in O(m) per column.
  Eigen::MatrixXd gram_bands = Eigen::MatrixXd::Zero(cone.m, 3);
  for (int i = 0; i < cone.m; ++i) {
    gram_bands(i, 0) = cone.row_metric[i];
    if (i + 1 < cone.m) {
      gram_bands(i, 1) = cone.band(i, 1) * cone.band(i + 1, 0) / w[i + 1] +
                         cone.band(i, 2) * cone.band(i + 1, 1) / w[i + 2];
    }
    if (i + 2 < cone.m) {
      gram_bands(i, 2) = cone.band(i, 2) * cone.band(i + 2, 0) / w[i + 2];
    }
  }
  cone.gram.emplace(gram_bands, 2);

  cone.beta = Eigen::MatrixXd::Zero(cone.n, cone.n);
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(cone.m);
  for (int j = 0; j < cone.m; ++j) {
    unit[j] = -1.0;
    const Eigen::VectorXd coeff = cone.gram->solve(unit);
    unit[j] = 0.0;
    cone.beta.col(j) =
        (cone.apply_transpose(coeff).array() / w.array()).matrix();
  }
  cone.beta.col(cone.m) = -g_const;
  cone.beta.col(cone.m + 1) = -g_lin;

  return cone;
}

EqualityProjection project_equality(const Signal& signal,
                                    const ConeSystem& cone,
                                    const ActiveSet& active) {
  const int r = static_cast<int>(active.size());
  std::vector<char> seen(cone.m, 0);
  for (int idx : active) {
    if (idx < 0 || idx >= cone.m) {
      throw InvalidInput("active index " + std::to_string(idx) +
                         " out of range [0, " + std::to_string(cone.m) + ")");
    }
    if (seen[idx]) {
      throw InvalidInput("active index " + std::to_string(idx) + " repeated");
    }
    seen[idx] = 1;
  }

  EqualityProjection out;
  if (r == 0) {
    out.x = signal.y;
    out.lambda = Eigen::VectorXd(0);
    return out;
  }

  // Stationarity x = y - W^{-1} A_J^T lambda with A_J x = 0 gives
  // (A_J W^{-1} A_J^T) lambda = A_J y. Factor W^{-1/2} A_J^T by column-
  // pivoted QR so rank deficiency is detected, not regularized.
  const Eigen::ArrayXd inv_sqrt_w = signal.w.array().rsqrt();
  Eigen::MatrixXd scaled(cone.n, r);
  Eigen::VectorXd rhs(r);
  for (int k = 0; k < r; ++k) {
    scaled.col(k) =
        (cone.A.row(active[k]).transpose().array() * inv_sqrt_w).matrix();
    rhs[k] = cone.row_dot(active[k], signal.y);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  if (std::abs(qr.matrixR()(r - 1, r - 1)) <= 1e-12) {
    throw RankDeficiencyError(
        "restricted constraint rows are linearly dependent; the equality "
        "projection is not uniquely determined");
  }
  const auto rmat = qr.matrixR().topLeftCorner(r, r);
  auto gram_solve = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd t = qr.colsPermutation().transpose() * b;
    t = rmat.template triangularView<Eigen::Upper>().transpose().solve(t);
    t = rmat.template triangularView<Eigen::Upper>().solve(t);
    return Eigen::VectorXd(qr.colsPermutation() * t);
  };
  out.lambda = gram_solve(rhs);

  auto apply_correction = [&](const Eigen::VectorXd& delta) {
    for (int k = 0; k < r; ++k) {
      const int i = active[k];
      const double dk = delta[k];
      out.x[i] -= cone.band(i, 0) * dk / signal.w[i];
      out.x[i + 1] -= cone.band(i, 1) * dk / signal.w[i + 1];
      out.x[i + 2] -= cone.band(i, 2) * dk / signal.w[i + 2];
    }
  };
  out.x = signal.y;
  apply_correction(out.lambda);

  // The multipliers can dwarf the restricted-row residuals they must zero
  // out, so the freshly built point carries their rounding. Refine in place
  // against the violations actually left in x; the target sits below the
  // products' own rounding, so accumulate each row in extended precision.
  const double floor_tol =
      1e-15 * (1.0 + rhs.cwiseAbs().maxCoeff()) +
      4.0 * std::numeric_limits<double>::epsilon() *
          (1.0 + signal.y.cwiseAbs().maxCoeff());
  Eigen::VectorXd viol(r);
  for (int pass = 0; pass < 4; ++pass) {
    for (int k = 0; k < r; ++k) {
      const int i = active[k];
      long double s = 0.0L;
      for (int t = 0; t < 3; ++t) {
        s += static_cast<long double>(cone.band(i, t)) * out.x[i + t];
      }
      viol[k] = static_cast<double>(s);
    }
    if (viol.cwiseAbs().maxCoeff() <= floor_tol) break;
    const Eigen::VectorXd delta = gram_solve(viol);
    out.lambda += delta;
    apply_correction(delta);
  }
  return out;
}

double KktCertificate::max_residual() const {
  return std::max(std::max(primal_residual, dual_residual),
                  std::max(complementarity, stationarity));
}

KktCertificate kkt_certificate(const Signal& signal, const ConeSystem& cone,
                               const Eigen::VectorXd& x,
                               const Eigen::VectorXd& lambda) {
  if (x.size() != cone.n || lambda.size() != cone.m) {
    throw InvalidInput("certificate arguments have wrong lengths");
  }
  if (!x.allFinite() || !lambda.allFinite()) {
    throw InvalidInput("certificate arguments must be finite");
  }
  const Eigen::VectorXd ax = cone.apply(x);
  KktCertificate cert;
  cert.primal_residual = std::max(0.0, ax.maxCoeff());
  cert.dual_residual = std::max(0.0, -lambda.minCoeff());
  cert.complementarity = (lambda.array() * ax.array()).abs().maxCoeff();
  const Eigen::VectorXd pullback =
      (cone.apply_transpose(lambda).array() / signal.w.array()).matrix();
  cert.stationarity = (x - signal.y + pullback).lpNorm<Eigen::Infinity>();
  return cert;
}

MoreauSplit moreau_split(const Eigen::VectorXd& y,
                         const Eigen::VectorXd& x_hat) {
  MoreauSplit out;
  out.polar = y - x_hat;
  out.inner = x_hat.dot(out.polar);
  return out;
}

MoreauSplit moreau_split(const Eigen::VectorXd& y,
                         const Eigen::VectorXd& x_hat,
                         const Eigen::VectorXd& w) {
  MoreauSplit out;
  out.polar = y - x_hat;
  out.inner = (x_hat.array() * w.array() * out.polar.array()).sum();
  return out;
}

double polar_cone_distance(const ConeSystem& cone, const Eigen::VectorXd& v) {
  if (v.size() != cone.n) {
    throw InvalidInput("vector has wrong length");
  }
  const Eigen::ArrayXd s = cone.weights.array().sqrt();
  const Eigen::MatrixXd edges =
      cone.gamma.leftCols(cone.m).array().colwise() * s;
  const Eigen::VectorXd target = (v.array() * s).matrix();
  const Eigen::VectorXd coeff = nonnegative_least_squares(edges, target);
  return (target - edges * coeff).norm();
}

}  // namespace conereg
