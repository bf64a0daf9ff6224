#include "conereg/signal.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "conereg/errors.hpp"

namespace conereg {

namespace {

void validate(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
              const Eigen::VectorXd& w) {
  const auto n = z.size();
  if (n < 3) {
    throw InvalidInput("signal needs at least 3 points, got " +
                       std::to_string(n));
  }
  if (y.size() != n || w.size() != n) {
    throw InvalidInput("signal arrays have mismatched lengths: z=" +
                       std::to_string(n) + " y=" + std::to_string(y.size()) +
                       " w=" + std::to_string(w.size()));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(z[i]) || !std::isfinite(y[i]) || !std::isfinite(w[i])) {
      throw InvalidInput("signal contains a non-finite entry at index " +
                         std::to_string(i));
    }
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (!(z[i] < z[i + 1])) {
      throw InvalidInput("abscissae must be strictly increasing; z[" +
                         std::to_string(i) + "]=" + std::to_string(z[i]) +
                         " z[" + std::to_string(i + 1) + "]=" +
                         std::to_string(z[i + 1]));
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(w[i] > 0.0)) {
      throw InvalidInput("weights must be positive; w[" + std::to_string(i) +
                         "]=" + std::to_string(w[i]));
    }
  }
}

}  // namespace

Signal::Signal(Eigen::VectorXd z_in, Eigen::VectorXd y_in)
    : z(std::move(z_in)), y(std::move(y_in)) {
  w = Eigen::VectorXd::Ones(z.size());
  validate(z, y, w);
}

Signal::Signal(Eigen::VectorXd z_in, Eigen::VectorXd y_in,
               Eigen::VectorXd w_in)
    : z(std::move(z_in)), y(std::move(y_in)), w(std::move(w_in)) {
  validate(z, y, w);
}

bool Signal::unit_weights() const {
  return (w.array() == 1.0).all();
}

bool Signal::uniform_spacing() const {
  const int n = size();
  const double h = z[1] - z[0];
  for (int i = 1; i + 1 < n; ++i) {
    if (std::abs((z[i + 1] - z[i]) - h) > 1e-12 * std::max(1.0, std::abs(h))) {
      return false;
    }
  }
  return true;
}

}  // namespace conereg
