#include "conereg/kernels.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "conereg/errors.hpp"

namespace conereg {

namespace {

Eigen::MatrixXd invert_or_throw(const Eigen::MatrixXd& m) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) {
    throw RankDeficiencyError("matrix of size " + std::to_string(m.rows()) +
                              " is singular; cannot track its inverse");
  }
  return lu.inverse();
}

}  // namespace

TrackedInverse::TrackedInverse(Eigen::MatrixXd matrix, int refresh_period)
    : matrix_(std::move(matrix)), refresh_period_(refresh_period) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() == 0) {
    throw InvalidInput("tracked inverse needs a nonempty square matrix");
  }
  if (refresh_period_ < 1) {
    throw InvalidInput("refresh period must be >= 1");
  }
  inverse_ = invert_or_throw(matrix_);
}

void TrackedInverse::rank_one_update(const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& v) {
  if (u.size() != matrix_.rows() || v.size() != matrix_.rows()) {
    throw InvalidInput("rank-one update vectors must match matrix dimension");
  }
  const Eigen::VectorXd z = inverse_ * u;
  const double denom = 1.0 + v.dot(z);
  if (std::abs(denom) <= kDenominatorThreshold) {
    throw SingularUpdateError(
        "rank-one update denominator " + std::to_string(denom) +
        " is within threshold of zero; update would be singular");
  }
  const Eigen::VectorXd w = inverse_.transpose() * v;
  inverse_.noalias() -= z * (w.transpose() / denom);
  matrix_.noalias() += u * v.transpose();
  ++update_count_;
  if (update_count_ >= refresh_period_) {
    refresh();
  }
}

void TrackedInverse::refresh() {
  inverse_ = invert_or_throw(matrix_);
  update_count_ = 0;
}

TrackedPinv::TrackedPinv(const Eigen::MatrixXd& columns) : columns_(columns) {
  if (columns_.cols() < 1 || columns_.rows() < columns_.cols()) {
    throw InvalidInput("tracked pseudoinverse needs a tall nonempty matrix");
  }
  rebuild();
}

void TrackedPinv::rebuild() {
  const auto r = columns_.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(columns_);
  const Eigen::MatrixXd& qrm = qr.matrixR();
  if (std::abs(qrm(r - 1, r - 1)) <= kDependenceThreshold) {
    throw RankDeficiencyError(
        "columns are linearly dependent; pseudoinverse tracking requires "
        "full column rank");
  }
  pinv_ = qr.solve(Eigen::MatrixXd::Identity(columns_.rows(), columns_.rows()));
}

void TrackedPinv::append_column(const Eigen::VectorXd& x) {
  if (x.size() != columns_.rows()) {
    throw InvalidInput("appended column has wrong length");
  }
  const Eigen::VectorXd coeffs = pinv_ * x;
  const Eigen::VectorXd w = x - columns_ * coeffs;
  const double ns = w.squaredNorm();
  if (ns <= kDependenceThreshold) {
    throw RankDeficiencyError(
        "appended column lies in the current span (residual norm^2 = " +
        std::to_string(ns) + ")");
  }
  const Eigen::RowVectorXd wplus = w.transpose() / ns;

  Eigen::MatrixXd next(pinv_.rows() + 1, pinv_.cols());
  next.topRows(pinv_.rows()) = pinv_ - coeffs * wplus;
  next.bottomRows(1) = wplus;
  pinv_ = std::move(next);

  columns_.conservativeResize(Eigen::NoChange, columns_.cols() + 1);
  columns_.col(columns_.cols() - 1) = x;
}

void TrackedPinv::remove_column(int index) {
  if (index < 0 || index >= cols()) {
    throw InvalidInput("column index out of range");
  }
  if (cols() == 1) {
    throw InvalidInput("cannot remove the last tracked column");
  }
  const auto r = columns_.cols();
  Eigen::MatrixXd reduced(columns_.rows(), r - 1);
  reduced.leftCols(index) = columns_.leftCols(index);
  reduced.rightCols(r - 1 - index) = columns_.rightCols(r - 1 - index);
  columns_ = std::move(reduced);
  rebuild();
}

namespace {

SpanProjection span_project_impl(const Eigen::MatrixXd& basis,
                                 const Eigen::VectorXd& rhs,
                                 const Eigen::MatrixXd& unscaled_basis) {
  const auto r = basis.cols();
  if (r < 1 || basis.rows() < r) {
    throw InvalidInput("span projection needs a tall nonempty basis");
  }
  if (rhs.size() != basis.rows()) {
    throw InvalidInput("span projection vector has wrong length");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  if (std::abs(qr.matrixR()(r - 1, r - 1)) <= 1e-12) {
    throw RankDeficiencyError("span basis is rank deficient");
  }
  SpanProjection out;
  out.coefficients = qr.solve(rhs);
  out.projection = unscaled_basis * out.coefficients;
  return out;
}

}  // namespace

SpanProjection qr_project_onto_span(const Eigen::MatrixXd& basis,
                                    const Eigen::VectorXd& y) {
  return span_project_impl(basis, y, basis);
}

SpanProjection qr_project_onto_span(const Eigen::MatrixXd& basis,
                                    const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& w) {
  if (w.size() != basis.rows()) {
    throw InvalidInput("weight vector has wrong length");
  }
  const Eigen::ArrayXd s = w.array().sqrt();
  const Eigen::MatrixXd scaled = basis.array().colwise() * s;
  const Eigen::VectorXd rhs = (y.array() * s).matrix();
  return span_project_impl(scaled, rhs, basis);
}

Eigen::MatrixXd cholesky_pinv(const Eigen::MatrixXd& a,
                              double pivot_threshold) {
  const auto q = a.cols();
  const Eigen::MatrixXd gram = a.transpose() * a;

  // Full-rank Cholesky of the Gram matrix: columns whose pivot falls at or
  // below the threshold are skipped, leaving a q x r factor with G = L L^T.
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(q, q);
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < q; ++k) {
    const auto len = q - k;
    Eigen::VectorXd seg = gram.col(k).tail(len);
    if (r > 0) {
      seg.noalias() -= l.block(k, 0, len, r) * l.row(k).head(r).transpose();
    }
    if (seg[0] > pivot_threshold) {
      l.col(r).tail(len) = seg / std::sqrt(seg[0]);
      ++r;
    }
  }
  if (r == 0) {
    return Eigen::MatrixXd::Zero(q, a.rows());
  }
  const Eigen::MatrixXd lr = l.leftCols(r);
  const Eigen::MatrixXd small = lr.transpose() * lr;  // r x r, SPD
  const Eigen::LLT<Eigen::MatrixXd> llt(small);
  const Eigen::MatrixXd inner =
      llt.solve(llt.solve(lr.transpose() * a.transpose()));
  return lr * inner;
}

BandedSpdSolver::BandedSpdSolver(Eigen::MatrixXd bands, int half_bandwidth)
    : n_(static_cast<int>(bands.rows())), h_(half_bandwidth) {
  if (half_bandwidth < 0 || bands.cols() != half_bandwidth + 1 || n_ == 0) {
    throw InvalidInput("band storage must be n x (half_bandwidth + 1)");
  }
  factor_ = Eigen::MatrixXd::Zero(n_, h_ + 1);
  for (int j = 0; j < n_; ++j) {
    double d = bands(j, 0);
    for (int k = std::max(0, j - h_); k < j; ++k) {
      const double ljk = factor_(k, j - k);
      d -= ljk * ljk;
    }
    if (d <= kPivotThreshold) {
      throw RankDeficiencyError(
          "banded matrix is not positive definite at row " +
          std::to_string(j) + " (pivot " + std::to_string(d) + ")");
    }
    const double ljj = std::sqrt(d);
    factor_(j, 0) = ljj;
    for (int i = j + 1; i <= std::min(j + h_, n_ - 1); ++i) {
      double s = bands(j, i - j);
      for (int k = std::max(0, i - h_); k < j; ++k) {
        s -= factor_(k, i - k) * factor_(k, j - k);
      }
      factor_(j, i - j) = s / ljj;
    }
  }
}

BandedSpdSolver BandedSpdSolver::from_dense(const Eigen::MatrixXd& m,
                                            int half_bandwidth) {
  if (m.rows() != m.cols()) {
    throw InvalidInput("banded solver needs a square matrix");
  }
  const int n = static_cast<int>(m.rows());
  Eigen::MatrixXd bands = Eigen::MatrixXd::Zero(n, half_bandwidth + 1);
  for (int j = 0; j < n; ++j) {
    for (int d = 0; d <= half_bandwidth && j + d < n; ++d) {
      bands(j, d) = m(j + d, j);
    }
  }
  return BandedSpdSolver(std::move(bands), half_bandwidth);
}

Eigen::VectorXd BandedSpdSolver::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != n_) {
    throw InvalidInput("right-hand side has wrong length");
  }
  Eigen::VectorXd x = rhs;
  // Forward substitution with L, then backward with L^T.
  for (int i = 0; i < n_; ++i) {
    double s = x[i];
    for (int k = std::max(0, i - h_); k < i; ++k) {
      s -= factor_(k, i - k) * x[k];
    }
    x[i] = s / factor_(i, 0);
  }
  for (int i = n_ - 1; i >= 0; --i) {
    double s = x[i];
    for (int k = i + 1; k <= std::min(i + h_, n_ - 1); ++k) {
      s -= factor_(i, k - i) * x[k];
    }
    x[i] = s / factor_(i, 0);
  }
  return x;
}

Eigen::VectorXd nonnegative_least_squares(const Eigen::MatrixXd& a,
                                          const Eigen::VectorXd& b,
                                          double tol) {
  const auto q = a.cols();
  if (b.size() != a.rows()) {
    throw InvalidInput("nonnegative least squares dimensions mismatch");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(q);
  std::vector<char> passive(q, 0);
  std::vector<Eigen::Index> order;
  order.reserve(q);

  auto solve_passive = [&]() -> Eigen::VectorXd {
    Eigen::MatrixXd cols(a.rows(), order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      cols.col(k) = a.col(order[k]);
    }
    return cols.householderQr().solve(b);
  };

  const long guard = 10 * static_cast<long>(q) + 20;
  for (long outer = 0; outer < guard; ++outer) {
    const Eigen::VectorXd dual = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    double best_val = tol;
    for (Eigen::Index j = 0; j < q; ++j) {
      if (!passive[j] && dual[j] > best_val) {
        best_val = dual[j];
        best = j;
      }
    }
    if (best < 0) {
      return x;
    }
    passive[best] = 1;
    order.push_back(best);

    for (long inner = 0; inner < guard; ++inner) {
      const Eigen::VectorXd s = solve_passive();
      double min_s = s.size() ? s.minCoeff() : 1.0;
      if (min_s > 0.0) {
        x.setZero();
        for (std::size_t k = 0; k < order.size(); ++k) {
          x[order[k]] = s[k];
        }
        break;
      }
      double alpha = 1.0;
      for (std::size_t k = 0; k < order.size(); ++k) {
        if (s[k] <= 0.0) {
          const double xv = x[order[k]];
          alpha = std::min(alpha, xv / (xv - s[k]));
        }
      }
      for (std::size_t k = 0; k < order.size(); ++k) {
        x[order[k]] += alpha * (s[k] - x[order[k]]);
      }
      for (std::size_t k = 0; k < order.size();) {
        if (x[order[k]] <= 1e-14) {
          x[order[k]] = 0.0;
          passive[order[k]] = 0;
          order.erase(order.begin() + static_cast<long>(k));
        } else {
          ++k;
        }
      }
      if (order.empty()) {
        break;
      }
    }
  }
  throw SolverInternalError("nonnegative least squares failed to terminate");
}

}  // namespace conereg
