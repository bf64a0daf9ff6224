#pragma once

#include <Eigen/Dense>

namespace conereg {

// Square matrix paired with a running inverse maintained through rank-one
// updates A <- A + u v^T via the identity
//   (A + u v^T)^{-1} = A^{-1} - (z w^T) / (1 + lam),
//   z = A^{-1} u,  w = A^{-T} v,  lam = v^T z.
// An update with |1 + lam| <= denominator_threshold raises
// SingularUpdateError and leaves the state untouched. After refresh_period
// accepted updates the inverse is recomputed from scratch to shed
// accumulated round-off, so update_count() stays below refresh_period.
class TrackedInverse {
 public:
  static constexpr double kDenominatorThreshold = 1e-12;
  static constexpr int kDefaultRefreshPeriod = 150;

  explicit TrackedInverse(Eigen::MatrixXd matrix,
                          int refresh_period = kDefaultRefreshPeriod);

  void rank_one_update(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

  // Recompute the inverse from the tracked matrix and reset the counter.
  void refresh();

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::MatrixXd& inverse() const { return inverse_; }
  int update_count() const { return update_count_; }
  int refresh_period() const { return refresh_period_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    return inverse_ * rhs;
  }

 private:
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd inverse_;
  int refresh_period_;
  int update_count_ = 0;
};

// Tall matrix with full column rank paired with its pseudoinverse,
// maintained through column appends: for B = [A x],
//   B^+ = [A^+ - A^+ x w^+; w^+],  w = (I - A A^+) x,
// where w^+ = w^T / ||w||^2. An append with ||w||^2 <= dependence_threshold
// means x is in the column span already; that raises RankDeficiencyError.
// Column removal is not incremental: call remove_column, which rebuilds by
// QR.
class TrackedPinv {
 public:
  static constexpr double kDependenceThreshold = 1e-12;

  explicit TrackedPinv(const Eigen::MatrixXd& columns);

  void append_column(const Eigen::VectorXd& x);
  void remove_column(int index);

  const Eigen::MatrixXd& columns() const { return columns_; }
  const Eigen::MatrixXd& pinv() const { return pinv_; }
  int cols() const { return static_cast<int>(columns_.cols()); }

 private:
  void rebuild();

  Eigen::MatrixXd columns_;  // n x r
  Eigen::MatrixXd pinv_;     // r x n
};

// Orthogonal projection of y onto the column span of `basis` via a thin QR
// factorization, with the expansion coefficients of the projection in the
// given columns. Equivalent to the normal-equation solution but rank-safe:
// a triangular pivot at or below 1e-12 raises RankDeficiencyError.
struct SpanProjection {
  Eigen::VectorXd projection;
  Eigen::VectorXd coefficients;
};

SpanProjection qr_project_onto_span(const Eigen::MatrixXd& basis,
                                    const Eigen::VectorXd& y);

// Same projection in the inner product <a,b> = a^T diag(w) b.
SpanProjection qr_project_onto_span(const Eigen::MatrixXd& basis,
                                    const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& w);

// Moore-Penrose pseudoinverse through a full-rank Cholesky factorization of
// the Gram matrix A^T A with rank-revealing pivot skipping. Independent of
// the QR and SVD routes, which makes it a useful cross-check.
Eigen::MatrixXd cholesky_pinv(const Eigen::MatrixXd& a,
                              double pivot_threshold = 1e-12);

// Symmetric positive definite banded system solver. Bands are given as an
// n x (h+1) array: column 0 is the main diagonal, column d holds
// band(i, d) = M(i + d, i) for the d-th subdiagonal. The Cholesky factor is
// computed once and cached; solves are O(n h). A pivot at or below the
// threshold raises RankDeficiencyError (the matrix is not positive definite
// to working precision).
class BandedSpdSolver {
 public:
  static constexpr double kPivotThreshold = 1e-12;

  BandedSpdSolver(Eigen::MatrixXd bands, int half_bandwidth);

  static BandedSpdSolver from_dense(const Eigen::MatrixXd& m,
                                    int half_bandwidth);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  int size() const { return n_; }
  int half_bandwidth() const { return h_; }

 private:
  int n_;
  int h_;
  Eigen::MatrixXd factor_;  // banded lower Cholesky factor, same layout
};

// Lawson-Hanson active-set solve of min_{x >= 0} ||a x - b||_2. The
// stationarity tolerance applies to the dual vector a^T (b - a x).
Eigen::VectorXd nonnegative_least_squares(const Eigen::MatrixXd& a,
                                          const Eigen::VectorXd& b,
                                          double tol = 1e-10);

}  // namespace conereg
