#include "trace_recorder.hpp"

#include <cmath>
#include <limits>

namespace conereg {

TraceSample TraceRecorder::make_sample(long iteration, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& lambda,
                                       double objective) {
  TraceSample s;
  s.iteration = iteration;
  s.cpu_seconds = timer_.elapsed_seconds();
  if (std::isnan(objective)) {
    const Eigen::ArrayXd d = (signal_.y - x).array();
    s.objective = (d * d * signal_.w.array()).sum();
  } else {
    s.objective = objective;
  }
  s.certificate = kkt_certificate(signal_, cone_, x, lambda);
  if (ctl_.reference) {
    s.distance_to_reference = (x - *ctl_.reference).norm();
  }
  return s;
}

TraceRecorder::Decision TraceRecorder::sample(long iteration,
                                              const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& lambda,
                                              double objective) {
  samples_.push_back(make_sample(iteration, x, lambda, objective));
  last_sampled_iteration_ = iteration;
  const TraceSample& s = samples_.back();
  if (s.certificate.passes(ctl_.stop_tolerance)) {
    return Decision::kConverged;
  }
  if (s.distance_to_reference &&
      *s.distance_to_reference <= ctl_.reference_tolerance) {
    return Decision::kConverged;
  }
  if (over_budget()) {
    return Decision::kExhausted;
  }
  return Decision::kContinue;
}

SolverTrace TraceRecorder::finish(long iteration, Eigen::VectorXd x,
                                  Eigen::VectorXd lambda, bool converged) {
  if (last_sampled_iteration_ != iteration) {
    samples_.push_back(
        make_sample(iteration, x, lambda,
                    std::numeric_limits<double>::quiet_NaN()));
    last_sampled_iteration_ = iteration;
  }
  SolverTrace trace;
  trace.samples = std::move(samples_);
  trace.iterations = iteration;
  trace.result.certificate = kkt_certificate(signal_, cone_, x, lambda);
  trace.result.x_hat = std::move(x);
  trace.result.lambda_hat = std::move(lambda);
  const double lam_tol =
      1e-12 * (1.0 + trace.result.lambda_hat.cwiseAbs().maxCoeff());
  trace.result.active_set = support_of(trace.result.lambda_hat, lam_tol);
  trace.result.converged = converged;
  return trace;
}

}  // namespace conereg
