#pragma once

#include <limits>
#include <utility>

#include "conereg/cone_system.hpp"
#include "conereg/signal.hpp"
#include "conereg/solver_types.hpp"

namespace conereg {

// Shared bookkeeping for iterative solvers: stride-based sampling, stopping
// on certificate tolerance / reference distance / CPU budget, and assembly
// of the final SolverTrace. The iterate passed to sample() is whatever the
// solver would return if stopped at that moment.
class TraceRecorder {
 public:
  enum class Decision { kContinue, kConverged, kExhausted };

  TraceRecorder(const Signal& signal, const ConeSystem& cone,
                const IterControl& ctl)
      : signal_(signal), cone_(cone), ctl_(ctl) {}

  bool due(long iteration) const {
    const int stride = ctl_.trace_stride < 1 ? 1 : ctl_.trace_stride;
    return iteration == 1 || iteration % stride == 0;
  }

  bool over_budget() const {
    return ctl_.cpu_budget_seconds &&
           timer_.elapsed_seconds() >= *ctl_.cpu_budget_seconds;
  }

  // Records a sample for the current iterate and evaluates the stopping
  // rules. `objective` defaults to the weighted squared misfit when NaN.
  Decision sample(long iteration, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& lambda,
                  double objective = std::numeric_limits<double>::quiet_NaN());

  // Builds the trace. Appends a terminal sample unless the last recorded
  // one is already at `iteration` with the same iterate.
  SolverTrace finish(long iteration, Eigen::VectorXd x, Eigen::VectorXd lambda,
                     bool converged);

  double elapsed_seconds() const { return timer_.elapsed_seconds(); }

 private:
  TraceSample make_sample(long iteration, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& lambda, double objective);

  const Signal& signal_;
  const ConeSystem& cone_;
  const IterControl& ctl_;
  CpuTimer timer_;
  std::vector<TraceSample> samples_;
  long last_sampled_iteration_ = -1;
};

}  // namespace conereg
