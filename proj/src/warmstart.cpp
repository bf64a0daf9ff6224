#include "conereg/warmstart.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "conereg/errors.hpp"

namespace conereg {

PavResult pav_warm_start(const Signal& signal, const ConeSystem& cone,
                         double feas_tol) {
  const int n = cone.n;
  const int m = cone.m;
  if (!(feas_tol > 0.0)) throw InvalidInput("feas_tol must be positive");
  const Eigen::VectorXd& z = signal.z;
  const Eigen::VectorXd& y = signal.y;
  const Eigen::VectorXd& w = signal.w;

  PavResult out;
  out.x = y;

  // Weighted fit of a continuous piecewise-linear curve with the given
  // breakpoint indices; the hat-basis normal equations are tridiagonal.
  std::vector<int> breaks;
  auto refit = [&]() {
    const int k = static_cast<int>(breaks.size());
    Eigen::MatrixXd bands = Eigen::MatrixXd::Zero(k, 2);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (int j = 0; j < k; ++j) {
      bands(j, 0) += w[breaks[j]];
      rhs[j] += w[breaks[j]] * y[breaks[j]];
    }
    for (int j = 0; j + 1 < k; ++j) {
      const int a = breaks[j];
      const int b = breaks[j + 1];
      for (int t = a + 1; t < b; ++t) {
        const double v = (z[t] - z[a]) / (z[b] - z[a]);
        const double u = 1.0 - v;
        bands(j, 0) += w[t] * u * u;
        bands(j + 1, 0) += w[t] * v * v;
        bands(j, 1) += w[t] * u * v;
        rhs[j] += w[t] * u * y[t];
        rhs[j + 1] += w[t] * v * y[t];
      }
    }
    const BandedSpdSolver chol(bands, 1);
    const Eigen::VectorXd theta = chol.solve(rhs);
    for (int j = 0; j + 1 < k; ++j) {
      const int a = breaks[j];
      const int b = breaks[j + 1];
      out.x[a] = theta[j];
      for (int t = a + 1; t < b; ++t) {
        const double v = (z[t] - z[a]) / (z[b] - z[a]);
        out.x[t] = (1.0 - v) * theta[j] + v * theta[j + 1];
      }
    }
    out.x[breaks.back()] = theta[k - 1];
  };

  double vscale = 0.0;
  for (int i = 0; i < m; ++i) {
    vscale = std::max(vscale, std::abs(cone.row_dot(i, y)));
  }
  const double vtol = 1e-12 * (1.0 + vscale);

  // Each pass welds every constraint the current iterate violates, then
  // re-projects the data onto the welded equality structure: a continuous
  // piecewise-linear fit broken only at the still-open constraints. Welded
  // constraints stay welded, so the pass count is bounded by the
  // constraint count and the guard below is unreachable short of a bug.
  std::vector<char> welded(m, 0);
  const long pass_cap = 10L * n;
  for (long pass = 0;; ++pass) {
    if (pass > pass_cap) {
      throw SolverInternalError(
          "feasibility projection pass failed to terminate");
    }
    bool any_new = false;
    for (int i = 0; i < m; ++i) {
      if (!welded[i] && cone.row_dot(i, out.x) > vtol) {
        welded[i] = 1;
        any_new = true;
        ++out.projections;
      }
    }
    if (!any_new) break;
    breaks.clear();
    breaks.push_back(0);
    for (int s = 0; s < m; ++s) {
      if (!welded[s]) breaks.push_back(s + 1);
    }
    breaks.push_back(n - 1);
    refit();
  }

  double worst = 0.0;
  for (int i = 0; i < m; ++i) {
    worst = std::max(worst, cone.row_dot(i, out.x));
  }
  if (worst > feas_tol) {
    throw SolverInternalError(
        "feasibility projection pass failed to terminate");
  }

  for (int i = 0; i < m; ++i) {
    if (welded[i]) out.saturated_estimate.push_back(i);
  }
  return out;
}

SolverResult brute_force_project(const Signal& signal, const ConeSystem& cone,
                                 double tol) {
  const int m = cone.m;
  if (m > 20) {
    throw InvalidInput("exhaustive reference is limited to 20 constraints");
  }

  bool found = false;
  Eigen::VectorXd best_x;
  Eigen::VectorXd best_lam;
  KktCertificate best_cert;
  int best_bits = m + 1;

  const std::uint32_t total = 1u << m;
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    ActiveSet active;
    for (int j = 0; j < m; ++j) {
      if (mask & (1u << j)) active.push_back(j);
    }
    const EqualityProjection pol = project_equality(signal, cone, active);
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(m);
    for (std::size_t k = 0; k < active.size(); ++k) {
      lam[active[k]] = pol.lambda[static_cast<int>(k)];
    }
    const KktCertificate cert = kkt_certificate(signal, cone, pol.x, lam);
    if (!cert.passes(tol)) continue;

    if (found &&
        (pol.x - best_x).cwiseAbs().maxCoeff() >
            1e-8 * (1.0 + best_x.cwiseAbs().maxCoeff())) {
      throw SolverInternalError(
          "two saturation patterns describe different certified optima");
    }
    const int bits = std::popcount(mask);
    if (!found || bits < best_bits) {
      found = true;
      best_x = pol.x;
      best_lam = lam;
      best_cert = cert;
      best_bits = bits;
    }
  }

  if (!found) {
    throw SolverInternalError("no saturation pattern passed the certificate");
  }

  SolverResult out;
  out.x_hat = best_x;
  out.lambda_hat = best_lam;
  out.active_set =
      support_of(best_lam, 1e-12 * (1.0 + best_lam.cwiseAbs().maxCoeff()));
  out.converged = true;
  out.certificate = best_cert;
  return out;
}

}  // namespace conereg
