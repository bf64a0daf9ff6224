#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "conereg/cone_system.hpp"

namespace conereg {

// Iteration budget and stopping policy shared by every solver.
//
// A solver stops with converged = true when its KKT certificate reaches
// stop_tolerance, or, if a reference solution is supplied (benchmark mode),
// when the Euclidean distance to it falls below reference_tolerance.
// It stops with converged = false when max_iterations or the CPU budget is
// exhausted; the best iterate so far is still returned.
struct IterControl {
  long max_iterations = 1'000'000;
  double stop_tolerance = 1e-8;
  std::optional<double> cpu_budget_seconds;
  int trace_stride = 100;

  std::optional<Eigen::VectorXd> reference;
  double reference_tolerance = 1e-6;
};

// Thread CPU time stopwatch; wall time is never used for budgets.
class CpuTimer {
 public:
  CpuTimer();
  double elapsed_seconds() const;

 private:
  double start_;
};

struct TraceSample {
  long iteration = 0;
  double cpu_seconds = 0.0;
  double objective = 0.0;  // weighted squared distance ||y - x||^2_W
  KktCertificate certificate;
  std::optional<double> distance_to_reference;
};

struct SolverResult {
  Eigen::VectorXd x_hat;
  Eigen::VectorXd lambda_hat;  // length m
  ActiveSet active_set;        // indices with lambda_hat > 0
  bool converged = false;
  KktCertificate certificate;
};

struct SolverTrace {
  std::vector<TraceSample> samples;
  SolverResult result;
  long iterations = 0;

  // Constraint indices left unsaturated at the reported solution, per the
  // solver's own bookkeeping (basis for the sector walk, hinge set for the
  // span-fitting method, block boundaries for the block method).
  ActiveSet hinges;

  // Solver-specific counters: sector crossings, deflations, block counts,
  // restarts, perturbation events.
  std::map<std::string, double> stats;
};

// Indices with lambda > tol, ascending.
ActiveSet support_of(const Eigen::VectorXd& lambda, double tol = 0.0);

}  // namespace conereg
