#pragma once

#include "conereg/cone_system.hpp"
#include "conereg/solver_types.hpp"

namespace conereg {

// Fast feasibility pass: repeatedly welds the constraints the current
// iterate violates and re-projects the data onto the welded equality
// structure, a continuous piecewise-linear fit broken only at the still
// open constraints. Welds are never undone, so the pass count is bounded
// by the constraint count; each pass costs one tridiagonal solve. The
// result is primal feasible but not optimal. Welded constraints come back
// as a warm-start estimate of the saturated set; `projections` counts the
// welds.
struct PavResult {
  Eigen::VectorXd x;
  ActiveSet saturated_estimate;
  long projections = 0;
};

PavResult pav_warm_start(const Signal& signal, const ConeSystem& cone,
                         double feas_tol = 1e-8);

// Exhaustive reference projection for small problems (at most 20
// constraints): enumerates every saturation pattern, solves the equality
// projection for each, keeps the candidates whose KKT certificate passes at
// `tol`, and requires all of them to describe one point. Returns that point
// with the multipliers of the smallest passing pattern.
SolverResult brute_force_project(const Signal& signal, const ConeSystem& cone,
                                 double tol = 1e-9);

}  // namespace conereg
