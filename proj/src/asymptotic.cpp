#include "conereg/asymptotic.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "conereg/errors.hpp"
#include "conereg/kernels.hpp"
#include "trace_recorder.hpp"

namespace conereg {

namespace {

// Subtracts step * W^{-1} A_i^T from the three touched coordinates.
inline void pull_row(const ConeSystem& cone, const Eigen::VectorXd& w, int i,
                     double step, Eigen::VectorXd& x) {
  x[i] -= step * cone.band(i, 0) / w[i];
  x[i + 1] -= step * cone.band(i, 1) / w[i + 1];
  x[i + 2] -= step * cone.band(i, 2) / w[i + 2];
}

double weighted_sq_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
  return (v.array() * v.array() * w.array()).sum();
}

}  // namespace

SolverTrace hildreth_solve(const Signal& signal, const ConeSystem& cone,
                           const IterControl& ctl,
                           const HildrethOptions& opts) {
  const int m = cone.m;
  std::vector<int> order = opts.order;
  if (order.empty()) {
    order.resize(m);
    for (int i = 0; i < m; ++i) order[i] = i;
  } else {
    std::vector<char> seen(m, 0);
    for (int i : order) {
      if (i < 0 || i >= m || seen[i]) {
        throw InvalidInput("hildreth order must be a permutation of 0..m-1");
      }
      seen[i] = 1;
    }
    if (static_cast<int>(order.size()) != m) {
      throw InvalidInput("hildreth order must cover all constraints");
    }
  }

  TraceRecorder rec(signal, cone, ctl);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd r = signal.y;

  long cycle = 0;
  bool converged = false;
  while (cycle < ctl.max_iterations) {
    ++cycle;
    for (int i : order) {
      const double a = cone.row_dot(i, r);
      const double next = std::max(0.0, lambda[i] + a / cone.row_metric[i]);
      const double delta = next - lambda[i];
      if (delta != 0.0) {
        lambda[i] = next;
        pull_row(cone, signal.w, i, delta, r);
      }
    }
    if (rec.due(cycle)) {
      // Rebuild r from lambda so incremental round-off cannot accumulate.
      r = signal.y -
          (cone.apply_transpose(lambda).array() / signal.w.array()).matrix();
      const auto d = rec.sample(cycle, r, lambda, weighted_sq_norm(r, signal.w));
      if (d != TraceRecorder::Decision::kContinue) {
        converged = d == TraceRecorder::Decision::kConverged;
        break;
      }
    } else if (rec.over_budget()) {
      break;
    }
  }
  return rec.finish(cycle, r, lambda, converged);
}

SolverTrace dykstra_solve(const Signal& signal, const ConeSystem& cone,
                          const IterControl& ctl) {
  const int m = cone.m;
  TraceRecorder rec(signal, cone, ctl);

  // Correction i is -theta[i] * W^{-1} A_i^T with theta >= 0; theta doubles
  // as the multiplier estimate.
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd x = signal.y;

  long cycle = 0;
  bool converged = false;
  while (cycle < ctl.max_iterations) {
    ++cycle;
    for (int i = 0; i < m; ++i) {
      // v = x with the old correction removed; A_i v without forming v.
      const double av = cone.row_dot(i, x) + theta[i] * cone.row_metric[i];
      const double next = av > 0.0 ? av / cone.row_metric[i] : 0.0;
      const double delta = next - theta[i];
      if (delta != 0.0) {
        pull_row(cone, signal.w, i, delta, x);
        theta[i] = next;
      }
    }
    if (rec.due(cycle)) {
      const auto d = rec.sample(cycle, x, theta);
      if (d != TraceRecorder::Decision::kContinue) {
        converged = d == TraceRecorder::Decision::kConverged;
        break;
      }
    } else if (rec.over_budget()) {
      break;
    }
  }
  return rec.finish(cycle, x, theta, converged);
}

SolverTrace lsps_solve(const Signal& signal, const ConeSystem& cone,
                       const IterControl& ctl, const LspsOptions& opts) {
  if (!(opts.relaxation > 0.0)) {
    throw InvalidInput("relaxation must be positive");
  }
  if (opts.relaxation > 2.0 && !opts.allow_over_relaxation) {
    throw InvalidInput("relaxation beyond 2 requires allow_over_relaxation");
  }
  const int m = cone.m;
  TraceRecorder rec(signal, cone, ctl);

  Eigen::VectorXd x = signal.y;
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(cone.n);

  long cycle = 0;
  bool converged = false;
  while (cycle < ctl.max_iterations) {
    ++cycle;
    shift.setZero();
    for (int i = 0; i < m; ++i) {
      const double a = cone.row_dot(i, x);
      if (a > 0.0) {
        const double step = a / cone.row_metric[i];
        shift[i] += step * cone.band(i, 0) / signal.w[i];
        shift[i + 1] += step * cone.band(i, 1) / signal.w[i + 1];
        shift[i + 2] += step * cone.band(i, 2) / signal.w[i + 2];
      }
    }
    // Averaged projection step: the mean over copies moves x by -shift / m.
    x.noalias() -= (opts.relaxation / m) * shift;

    if (rec.due(cycle)) {
      const Eigen::VectorXd lambda =
          cone.multipliers_from_residual(signal.y - x);
      const auto d = rec.sample(cycle, x, lambda);
      if (d != TraceRecorder::Decision::kContinue) {
        converged = d == TraceRecorder::Decision::kConverged;
        break;
      }
    } else if (rec.over_budget()) {
      break;
    }
  }
  return rec.finish(cycle, x, cone.multipliers_from_residual(signal.y - x),
                    converged);
}

namespace {

// Largest eigenvalue of the constraint Gram matrix A W^{-1} A^T by power
// iteration; deterministic start vector.
double gram_spectral_radius(const Signal& signal, const ConeSystem& cone) {
  const int m = cone.m;
  Eigen::VectorXd v(m);
  for (int i = 0; i < m; ++i) {
    v[i] = 1.0 + 0.5 * std::sin(static_cast<double>(i));
  }
  v.normalize();
  double value = 0.0;
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd av =
        (cone.apply_transpose(v).array() / signal.w.array()).matrix();
    Eigen::VectorXd next = cone.apply(av);
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    next /= norm;
    const double prev = value;
    value = norm;
    v = next;
    if (it > 10 && std::abs(value - prev) <= 1e-12 * value) break;
  }
  return value;
}

}  // namespace

SolverTrace uzawa_solve(const Signal& signal, const ConeSystem& cone,
                        const IterControl& ctl, const UzawaOptions& opts) {
  const int m = cone.m;
  double rho;
  if (opts.step_size) {
    rho = *opts.step_size;
    if (!(rho > 0.0)) {
      throw InvalidInput("uzawa step size must be positive");
    }
  } else {
    const double top = gram_spectral_radius(signal, cone);
    rho = top > 0.0 ? 1.0 / top : 1.0;
  }

  TraceRecorder rec(signal, cone, ctl);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd x = signal.y;
  const Eigen::VectorXd ay = cone.apply(signal.y);

  // Dual objective 2 mu^T A y - mu^T (A W^{-1} A^T) mu; ascent stalls into
  // persistent decrease exactly when the step is unstable.
  double dual_prev = 0.0;
  int decreasing_run = 0;

  long iter = 0;
  bool converged = false;
  while (iter < ctl.max_iterations) {
    ++iter;
    x = signal.y -
        (cone.apply_transpose(mu).array() / signal.w.array()).matrix();
    const Eigen::VectorXd ax = cone.apply(x);
    mu = (mu + rho * ax).cwiseMax(0.0);

    const double dual =
        2.0 * mu.dot(ay) - mu.dot(cone.apply((cone.apply_transpose(mu).array() /
                                              signal.w.array())
                                                 .matrix()));
    if (!std::isfinite(dual)) {
      throw DivergenceError("uzawa dual objective overflowed at iteration " +
                            std::to_string(iter) + "; step size " +
                            std::to_string(rho) + " is unstable");
    }
    if (dual < dual_prev) {
      if (++decreasing_run >= 100) {
        throw DivergenceError(
            "uzawa dual objective decreased for 100 consecutive iterations; "
            "step size " +
            std::to_string(rho) + " is unstable");
      }
    } else {
      decreasing_run = 0;
    }
    dual_prev = dual;

    if (rec.due(iter)) {
      const auto d = rec.sample(iter, x, mu);
      if (d != TraceRecorder::Decision::kContinue) {
        converged = d == TraceRecorder::Decision::kConverged;
        break;
      }
    } else if (rec.over_budget()) {
      break;
    }
  }
  x = signal.y - (cone.apply_transpose(mu).array() / signal.w.array()).matrix();
  return rec.finish(iter, x, mu, converged);
}

SolverTrace admm_solve(const Signal& signal, const ConeSystem& cone,
                       const IterControl& ctl, const AdmmOptions& opts) {
  if (!(opts.gamma > 0.0)) {
    throw InvalidInput("admm gamma must be positive");
  }
  const int n = cone.n;
  const int m = cone.m;
  const double inv_gamma = 1.0 / opts.gamma;

  // Bands of 2W + (1/gamma) A^T A; pentadiagonal, factored once.
  Eigen::MatrixXd bands = Eigen::MatrixXd::Zero(n, 3);
  for (int i = 0; i < m; ++i) {
    for (int t1 = 0; t1 < 3; ++t1) {
      for (int t2 = t1; t2 < 3; ++t2) {
        bands(i + t1, t2 - t1) += inv_gamma * cone.band(i, t1) * cone.band(i, t2);
      }
    }
  }
  for (int j = 0; j < n; ++j) {
    bands(j, 0) += 2.0 * signal.w[j];
  }
  const BandedSpdSolver xsolver(std::move(bands), 2);

  TraceRecorder rec(signal, cone, ctl);
  const Eigen::VectorXd wy2 = 2.0 * (signal.w.array() * signal.y.array()).matrix();
  Eigen::VectorXd x = signal.y;
  Eigen::VectorXd z = cone.apply(x).cwiseMin(0.0);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);

  long iter = 0;
  bool converged = false;
  while (iter < ctl.max_iterations) {
    ++iter;
    const Eigen::VectorXd rhs =
        wy2 + inv_gamma * cone.apply_transpose(z - lambda);
    x = xsolver.solve(rhs);
    const Eigen::VectorXd ax = cone.apply(x);
    z = (ax + lambda).cwiseMin(0.0);
    lambda += ax - z;

    if (rec.due(iter)) {
      const auto d =
          rec.sample(iter, x, lambda * (0.5 * inv_gamma));
      if (d != TraceRecorder::Decision::kContinue) {
        converged = d == TraceRecorder::Decision::kConverged;
        break;
      }
    } else if (rec.over_budget()) {
      break;
    }
  }
  SolverTrace trace =
      rec.finish(iter, x, lambda * (0.5 * inv_gamma), converged);
  trace.stats["admm_coupling_residual"] = (cone.apply(x) - z).norm();
  return trace;
}

}  // namespace conereg
