#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "conereg/kernels.hpp"
#include "conereg/signal.hpp"

namespace conereg {

// A set of constraint indices in [0, m). Solvers document whether a given
// set holds saturated constraints (A_i x = 0) or their complement.
using ActiveSet = std::vector<int>;

// Constraint system describing the concavity cone K = {x : A x <= 0} for a
// signal, together with the edge frame of its polar cone and the dual frame.
//
// Row i of A encodes a nonpositive second divided difference over the
// abscissa triple (z_i, z_{i+1}, z_{i+2}): with d1 = z_{i+1} - z_i and
// d2 = z_{i+2} - z_{i+1}, the nonzeros are 1/d1, -(1/d1 + 1/d2), 1/d2.
// Each row sums to zero and annihilates sequences affine in z.
//
// All geometry is taken in the inner product <a, b>_W = a^T W b with
// W = diag(weights):
//   gamma columns 0..m-1   edges of the polar cone, W^{-1} A_i^T,
//   gamma columns m, m+1   a W-orthonormal basis of span{1, z},
//   beta                   the dual frame, beta^T W gamma = -Identity.
// With unit weights gamma_i = A_i^T exactly and beta^T gamma = -I.
struct ConeSystem {
  int n = 0;  // signal length
  int m = 0;  // constraint count, n - 2

  Eigen::VectorXd weights;
  bool normalized_rows = false;

  // Per-row nonzeros: row i touches positions i, i+1, i+2 with band(i, 0..2).
  Eigen::Matrix<double, Eigen::Dynamic, 3> band;
  Eigen::MatrixXd A;  // m x n dense copy of the band

  Eigen::MatrixXd gamma;  // n x n, column j holds gamma^{j+1}
  Eigen::MatrixXd beta;   // n x n, column j holds beta^{j+1}

  // row_metric[i] = A_i W^{-1} A_i^T, the step denominators of the
  // coordinate methods.
  Eigen::VectorXd row_metric;

  // Cached banded Cholesky of the pentadiagonal Gram matrix A W^{-1} A^T.
  std::optional<BandedSpdSolver> gram;

  // Least-squares multipliers for a primal residual r = y - x: the unique
  // lambda with A W^{-1} A^T lambda = A r. When r lies in the polar cone
  // frame exactly, this recovers the stationarity multipliers.
  Eigen::VectorXd multipliers_from_residual(const Eigen::VectorXd& r) const;

  double row_dot(int i, const Eigen::VectorXd& x) const {
    return band(i, 0) * x[i] + band(i, 1) * x[i + 1] + band(i, 2) * x[i + 2];
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;            // A x
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& lam) const;  // A^T lam
};

ConeSystem build_cone_system(const Signal& signal, bool normalize_rows = false);

// Weighted projection onto the subspace {x : A_J x = 0} for the row subset
// J = active. Multipliers satisfy x = y - W^{-1} A_J^T lambda and are
// returned in the order of `active`. Throws RankDeficiencyError when the
// selected rows are linearly dependent; never regularizes.
struct EqualityProjection {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
};

EqualityProjection project_equality(const Signal& signal,
                                    const ConeSystem& cone,
                                    const ActiveSet& active);

// KKT residuals of a candidate primal-dual pair. All fields are >= 0;
// a pair within tol of optimal has max_residual() <= tol.
struct KktCertificate {
  double primal_residual = 0.0;   // max_i max(0, (A x)_i)
  double dual_residual = 0.0;     // max_i max(0, -lambda_i)
  double complementarity = 0.0;   // max_i |lambda_i (A x)_i|
  double stationarity = 0.0;      // || x - y + W^{-1} A^T lambda ||_inf

  double max_residual() const;
  bool passes(double tol) const { return max_residual() <= tol; }
};

KktCertificate kkt_certificate(const Signal& signal, const ConeSystem& cone,
                               const Eigen::VectorXd& x,
                               const Eigen::VectorXd& lambda);

// Splits y into a candidate projection and its complement y - x_hat,
// reporting the inner product <x_hat, y - x_hat>_W. For an exact projection
// pair the inner product vanishes and the complement lies in the polar cone.
struct MoreauSplit {
  Eigen::VectorXd polar;
  double inner = 0.0;
};

MoreauSplit moreau_split(const Eigen::VectorXd& y,
                         const Eigen::VectorXd& x_hat);
MoreauSplit moreau_split(const Eigen::VectorXd& y,
                         const Eigen::VectorXd& x_hat,
                         const Eigen::VectorXd& w);

// W-metric distance from v to the polar cone pos{gamma^1..gamma^m},
// computed as a nonnegative least-squares residual. Zero (up to round-off)
// certifies membership.
double polar_cone_distance(const ConeSystem& cone, const Eigen::VectorXd& v);

}  // namespace conereg
