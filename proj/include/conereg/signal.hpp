#pragma once

#include <Eigen/Dense>

namespace conereg {

// One regression data set: abscissae z (strictly increasing), observed
// values y, and positive per-point weights w. All three have equal length
// n >= 3. The constructor validates and throws InvalidInput on violation.
struct Signal {
  Eigen::VectorXd z;
  Eigen::VectorXd y;
  Eigen::VectorXd w;

  // Unit weights.
  Signal(Eigen::VectorXd z_in, Eigen::VectorXd y_in);
  Signal(Eigen::VectorXd z_in, Eigen::VectorXd y_in, Eigen::VectorXd w_in);

  int size() const { return static_cast<int>(z.size()); }

  bool unit_weights() const;

  // True when z is an arithmetic progression (relative tolerance 1e-12 on
  // the spacing). The block solver requires this.
  bool uniform_spacing() const;
};

}  // namespace conereg
