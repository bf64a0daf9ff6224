#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "conereg/solver_types.hpp"

namespace conereg {

// Numeric knobs forwarded to individual solvers; ids select the algorithm
// and its initialization variant.
struct SolverConfig {
  double lsps_relaxation = 1.0;
  bool lsps_allow_over_relaxation = false;
  std::optional<double> uzawa_step;
  double admm_gamma = 1.0;
};

struct SolverEntry {
  std::string id;
  std::string description;
  bool finite = false;            // discovers the saturation structure exactly
  bool requires_uniform = false;  // needs uniformly spaced abscissae
  std::function<SolverTrace(const Signal&, const ConeSystem&,
                            const IterControl&, const SolverConfig&)>
      run;
};

// All registered solvers, in a fixed documented order.
const std::vector<SolverEntry>& solver_registry();

// Entry for an id, or nullptr. "meyer" is an alias for "meyer:empty".
const SolverEntry* find_solver(const std::string& id);

std::vector<std::string> solver_ids();

}  // namespace conereg
