#pragma once

#include <optional>
#include <vector>

#include "conereg/solver_types.hpp"

namespace conereg {

// Iterative solvers that approach the projection in the limit. All honor
// IterControl the same way: `iterations` counts full sweeps for the cyclic
// methods (hildreth, dykstra, lsps) and single updates for uzawa and admm;
// samples land at iteration 1, every trace_stride-th iteration, and at exit.

// Cyclic coordinate descent on the dual. Always starts from lambda = 0.
// Each step applies lambda_i <- max(0, lambda_i + (A_i r) / (A_i W^{-1}
// A_i^T)) with r = y - W^{-1} A^T lambda maintained incrementally. Sample
// objectives hold the dual objective r^T W r, which never increases.
struct HildrethOptions {
  // Visiting order of the m constraints within a sweep; empty = 0..m-1.
  // Must be a permutation.
  std::vector<int> order;
};

SolverTrace hildreth_solve(const Signal& signal, const ConeSystem& cone,
                           const IterControl& ctl = {},
                           const HildrethOptions& opts = {});

// Cyclic projections with per-constraint correction terms. Each sub-step
// removes constraint i's previous correction and projects onto the single
// halfspace A_i x <= 0 (a weighted straight-line fit over the three touched
// points when violated). The corrections are scalar multiples of W^{-1}
// A_i^T; their running sum keeps iterate = y - W^{-1} A^T lambda, which is
// exactly the certificate's stationarity residual.
SolverTrace dykstra_solve(const Signal& signal, const ConeSystem& cone,
                          const IterControl& ctl = {});

// Parallel projections in the m-fold product space: project the current
// point onto every halfspace at once, average, and relax toward the
// average. Multipliers for certificates are recovered by least squares.
struct LspsOptions {
  double relaxation = 1.0;  // in (0, 2] unless over-relaxation is enabled
  bool allow_over_relaxation = false;
};

SolverTrace lsps_solve(const Signal& signal, const ConeSystem& cone,
                       const IterControl& ctl = {},
                       const LspsOptions& opts = {});

// Dual projected gradient ascent: exact primal minimization
// x = y - W^{-1} A^T mu, then mu <- max(0, mu + rho A x). The default step
// is 1 / lambda_max(A W^{-1} A^T), estimated by power iteration. A step
// outside the stable range makes the dual objective fall persistently;
// after 100 consecutive decreases DivergenceError is raised.
struct UzawaOptions {
  std::optional<double> step_size;
};

SolverTrace uzawa_solve(const Signal& signal, const ConeSystem& cone,
                        const IterControl& ctl = {},
                        const UzawaOptions& opts = {});

// Splitting iteration on f(x) + g(z) with f the weighted misfit, g the
// indicator of {z <= 0}, and coupling A x = z:
//   x: solve (2W + (1/gamma) A^T A) x = 2 W y + (1/gamma) A^T (z - lambda),
//   z: min(0, A x + lambda),
//   lambda: lambda + A x - z.
// The x-system is pentadiagonal SPD; its banded factorization is computed
// once. Certificate multipliers are lambda / (2 gamma).
struct AdmmOptions {
  double gamma = 1.0;
};

SolverTrace admm_solve(const Signal& signal, const ConeSystem& cone,
                       const IterControl& ctl = {},
                       const AdmmOptions& opts = {});

}  // namespace conereg
