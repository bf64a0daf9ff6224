#pragma once

#include <stdexcept>
#include <string>

namespace conereg {

// Base class for every error raised by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed problem data: too-short signals, non-increasing abscissae,
// nonpositive weights, out-of-range indices, bad solver parameters.
struct InvalidInput : Error {
  explicit InvalidInput(const std::string& what) : Error(what) {}
};

// A matrix that must have full rank does not: rank-deficient restricted
// constraint blocks, linearly dependent column appends, rank-revealing
// pivots below threshold. Never silently regularized.
struct RankDeficiencyError : Error {
  explicit RankDeficiencyError(const std::string& what) : Error(what) {}
};

// A rank-one inverse update whose denominator 1 + v^T A^{-1} u is within
// threshold of zero; the update would destroy the tracked inverse.
struct SingularUpdateError : Error {
  explicit SingularUpdateError(const std::string& what) : Error(what) {}
};

// An iteration whose monitored objective grows without bound, e.g. a dual
// ascent run with a step size beyond the stable range.
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& what) : Error(what) {}
};

// An internal consistency check failed: a stalled line search, a repeated
// active set, cross-checking solvers that disagree. These indicate a bug or
// an instance outside the method's assumptions, not bad user input.
struct SolverInternalError : Error {
  explicit SolverInternalError(const std::string& what) : Error(what) {}
};

}  // namespace conereg
