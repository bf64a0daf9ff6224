#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "conereg/registry.hpp"
#include "conereg/solver_types.hpp"

namespace conereg {

// Families of synthetic test signals on the abscissae z = 1..n:
//   S1: a piecewise curve (sine arc, line, cubic) with fixed junction
//       coefficients; concave on each piece.
//   S2: i.i.d. standard Gaussian draws.
//   S3: an unnormalized sinc arc, sin(t)/t at t = 6z/n - 1.
// Additive Gaussian noise of standard deviation sigma is applied on top;
// everything is a pure function of the spec (fixed generator + fixed
// Gaussian transform, documented in the README).
enum class SignalFamily { kS1, kS2, kS3 };

std::string family_name(SignalFamily family);
SignalFamily parse_family(const std::string& name);  // case-insensitive

struct SignalSpec {
  SignalFamily family = SignalFamily::kS1;
  int n = 50;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

// Noise-free curve for the spec (zeros plus the Gaussian draws for S2).
Eigen::VectorXd signal_truth(const SignalSpec& spec);

Signal generate_signal(const SignalSpec& spec);

// Ground truth for distance curves. Small systems (m <= 20) use the
// exhaustive oracle; larger ones run two structurally different exact
// solvers and require agreement.
struct ReferenceSolution {
  Eigen::VectorXd x;
  std::string method;  // "exhaustive" or "cross-checked"
};

ReferenceSolution reference_solution(const Signal& signal,
                                     const ConeSystem& cone);

// Agreement gate used by reference_solution, exposed separately so fault
// tests can feed it disagreeing inputs. Both results must be converged with
// passing certificates and matching points; returns a's point.
ReferenceSolution combine_references(const SolverResult& a,
                                     const SolverResult& b,
                                     double agreement_tol = 1e-7,
                                     double certificate_tol = 1e-8);

struct BenchmarkSample {
  double cpu_s = 0.0;
  double l2_distance = 0.0;
  double kkt_primal = 0.0;
  double kkt_dual = 0.0;
  double kkt_comp = 0.0;
};

struct ExperimentRecord {
  SignalSpec spec;
  std::string solver;
  std::string config_hash;
  std::string reference_id;
  double budget_s = 0.0;
  std::vector<BenchmarkSample> samples;
  std::string status;  // completed | exhausted | error
  std::string error_message;
};

struct GridOptions {
  std::vector<double> budgets = {0.1, 1.0, 10.0};
  int jobs = 1;  // concurrency cap; cells are independent
  int trace_stride = 100;
  double stop_tolerance = 1e-8;
  double reference_tolerance = 1e-6;
  SolverConfig config;
};

// Runs every (spec, solver, budget) cell. References are computed once per
// spec; a cell that throws is recorded with status "error" and the grid
// continues. Output order is the deterministic cell order regardless of
// the number of worker threads.
std::vector<ExperimentRecord> run_grid(const std::vector<SignalSpec>& specs,
                                       const std::vector<std::string>& solvers,
                                       const GridOptions& opts = {});

// CSV with the fixed header
// solver,family,n,sigma,seed,budget_s,cpu_s,l2_distance,kkt_primal,
// kkt_dual,kkt_comp,status and one row per sample.
void export_records(const std::vector<ExperimentRecord>& records,
                    const std::string& path);

// Parses a file written by export_records back into records (the fields the
// CSV carries; config hash and reference id are not persisted).
std::vector<ExperimentRecord> read_records(const std::string& path);

// Per-cell summary (terminal distance, status) suitable for plotting.
void export_summary(const std::vector<ExperimentRecord>& records,
                    const std::string& path);

}  // namespace conereg
