#include "conereg/solver_types.hpp"

#include <ctime>

namespace conereg {

namespace {

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

}  // namespace

CpuTimer::CpuTimer() : start_(thread_cpu_seconds()) {}

double CpuTimer::elapsed_seconds() const {
  return thread_cpu_seconds() - start_;
}

ActiveSet support_of(const Eigen::VectorXd& lambda, double tol) {
  ActiveSet out;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > tol) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

}  // namespace conereg
