#pragma once

#include <optional>

#include "conereg/kernels.hpp"
#include "conereg/solver_types.hpp"

namespace conereg {

// Exact solvers that terminate in finitely many steps. All report a
// polished solution recomputed from the discovered saturation structure by
// an equality projection, cross-checked against their own reconstruction.

// Sector walk over the primal-dual frame pair. The data is split as
// y = u + v with v the weighted affine fit; the walk tracks the mixed basis
// (beta columns for slack constraints, gamma columns otherwise) along the
// segment from the start point to u, swapping one basis column per sector
// crossing through rank-one inverse updates, until every basis coordinate
// of u is nonnegative. The default start is the affine fit itself, i.e. the
// reduced-space origin with the all-beta basis.
struct MpdbOptions {
  // Warm start: constraints believed saturated at the solution. Their
  // complement seeds the beta side of the basis. Walk still starts at the
  // reduced-space origin.
  std::optional<ActiveSet> saturated_init;

  // Explicit start point inside the cone; enables a genuine segment walk
  // with strictly decreasing distance to u at each crossing.
  std::optional<Eigen::VectorXd> start_point;

  long max_crossings = 0;  // 0 = 50 n + 1000
  int refresh_period = TrackedInverse::kDefaultRefreshPeriod;
};

SolverTrace mpdb_solve(const Signal& signal, const ConeSystem& cone,
                       const IterControl& ctl = {},
                       const MpdbOptions& opts = {});

// Hinge fitting: project y onto the span of the slack-constraint frame
// columns (plus the affine pair), add the most violated frame direction
// while suboptimal, drop the most negative coefficient while infeasible.
// Never revisits an index set; the misfit strictly decreases across
// consecutive feasible iterates.
struct MeyerOptions {
  std::optional<ActiveSet> hinges_init;  // explicit initial hinge set
  bool start_full = false;               // all constraints slack at start
};

SolverTrace meyer_solve(const Signal& signal, const ConeSystem& cone,
                        const IterControl& ctl = {},
                        const MeyerOptions& opts = {});

// Nearest-point recursion on the polar frame: locate a critical edge by
// tangency tests and two-dimensional distance reductions, deflate the
// problem along that edge (projecting the target and remaining edges onto
// its orthogonal complement), and recurse on one fewer edge; at most m
// deflations.
SolverTrace critical_index_solve(const Signal& signal, const ConeSystem& cone,
                                 const IterControl& ctl = {});

// Active-set iteration on maximal affine runs ("blocks") for uniformly
// spaced abscissae. Saturated constraints make x affine within each block;
// the reduced system couples per-block affine coefficients through
// cumulative-moment conditions, one per unsaturated constraint plus two
// global ones. Violations trigger one block merge or split per iteration.
struct BlockOptions {
  // Initial saturated set; blocks are its maximal runs. Default: all
  // constraints, a single affine block.
  std::optional<ActiveSet> saturated_init;
};

SolverTrace block_active_set_solve(const Signal& signal,
                                   const ConeSystem& cone,
                                   const IterControl& ctl = {},
                                   const BlockOptions& opts = {});

}  // namespace conereg
