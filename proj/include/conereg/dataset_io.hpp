#pragma once

#include <iosfwd>
#include <string>

#include "conereg/signal.hpp"
#include "conereg/solver_types.hpp"

namespace conereg {

// Reads a dataset from a CSV file with header "z,y" or "z,y,w"
// (case-insensitive). Malformed input raises InvalidInput with a
// "<path>:<line>:" prefix pointing at the offending row.
Signal read_dataset_csv(const std::string& path);

// Writes the fitted solution as a per-point table
//   index,z,y,w,x_hat,lambda_hat,saturated
// followed by '#'-prefixed footer lines carrying the convergence status,
// iteration count and optimality certificate. lambda_hat and saturated are
// populated for the first n-2 rows (one slope constraint per interior
// point) and left empty for the final two.
void write_solution_csv(std::ostream& out, const Signal& signal,
                        const SolverTrace& trace);

// Same content as the CSV writer, as a single JSON object.
void write_solution_json(std::ostream& out, const Signal& signal,
                         const SolverTrace& trace);

}  // namespace conereg
