#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "conereg/benchmark.hpp"
#include "conereg/dataset_io.hpp"
#include "conereg/errors.hpp"
#include "conereg/registry.hpp"
#include "conereg/warmstart.hpp"

namespace {

using namespace conereg;

std::string join(const std::vector<std::string>& parts,
                 const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

const SolverEntry& require_solver(const std::string& id) {
  const SolverEntry* entry = find_solver(id);
  if (!entry) {
    throw InvalidInput("unknown solver '" + id +
                       "'; valid ids: " + join(solver_ids(), ", "));
  }
  return *entry;
}

std::string solver_help_footer() {
  std::string text = "Solvers:\n";
  for (const SolverEntry& e : solver_registry()) {
    char line[160];
    std::snprintf(line, sizeof(line), "  %-12s %s\n", e.id.c_str(),
                  e.description.c_str());
    text += line;
  }
  text +=
      "  meyer        alias for meyer:empty\n"
      "\nExit codes: 0 ok, 1 usage or input error, 2 stopped without "
      "convergence,\n3 benchmark cell failure, 4 validation failure.\n";
  return text;
}

struct SolveArgs {
  std::string input;
  std::string solver = "mpdb";
  double tol = 1e-8;
  long max_iter = 1'000'000;
  double budget = 0.0;
  int stride = 100;
  double relax = 1.0;
  bool over_relax = false;
  double rho = 0.0;
  double gamma = 1.0;
  std::string format = "csv";
  std::string out;
  bool has_budget = false;
  bool has_rho = false;
};

int run_solve(const SolveArgs& a) {
  const SolverEntry& entry = require_solver(a.solver);
  const Signal signal = read_dataset_csv(a.input);
  if (entry.requires_uniform && !signal.uniform_spacing()) {
    throw InvalidInput("solver '" + a.solver +
                       "' requires uniformly spaced z values");
  }
  const ConeSystem cone = build_cone_system(signal);

  IterControl ctl;
  ctl.max_iterations = a.max_iter;
  ctl.stop_tolerance = a.tol;
  if (a.has_budget) ctl.cpu_budget_seconds = a.budget;
  ctl.trace_stride = a.stride;

  SolverConfig cfg;
  cfg.lsps_relaxation = a.relax;
  cfg.lsps_allow_over_relaxation = a.over_relax;
  if (a.has_rho) cfg.uzawa_step = a.rho;
  cfg.admm_gamma = a.gamma;

  const SolverTrace trace = entry.run(signal, cone, ctl, cfg);

  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw InvalidInput("cannot open '" + a.out + "' for writing");
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  if (a.format == "json") {
    write_solution_json(out, signal, trace);
  } else {
    write_solution_csv(out, signal, trace);
  }
  if (!out.good()) throw InvalidInput("writing solution output failed");
  return trace.result.converged ? 0 : 2;
}

struct BenchArgs {
  std::vector<std::string> families = {"S1", "S2", "S3"};
  std::vector<int> sizes = {50};
  std::vector<double> sigmas = {0.01, 0.1};
  std::vector<std::uint64_t> seeds = {1};
  std::vector<std::string> solvers;  // empty = all
  std::vector<double> budgets = {0.1, 1.0, 10.0};
  std::string out;
  int jobs = 1;
  int stride = 100;
  double tol = 1e-8;
  double relax = 1.0;
  double gamma = 1.0;
  double rho = 0.0;
  bool has_rho = false;
};

int run_benchmark(const BenchArgs& a) {
  std::vector<SignalFamily> families;
  for (const auto& f : a.families) families.push_back(parse_family(f));
  std::vector<std::string> solvers =
      a.solvers.empty() ? solver_ids() : a.solvers;
  for (const auto& id : solvers) require_solver(id);
  for (int n : a.sizes) {
    if (n < 3) throw InvalidInput("--sizes entries must be at least 3");
  }
  for (double s : a.sigmas) {
    if (s < 0.0) throw InvalidInput("--sigmas entries must be nonnegative");
  }
  for (double b : a.budgets) {
    if (b <= 0.0) throw InvalidInput("--budgets entries must be positive");
  }

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) {
    throw InvalidInput("cannot create output directory '" + a.out +
                       "': " + ec.message());
  }
  const std::string records_path = (fs::path(a.out) / "records.csv").string();
  const std::string summary_path = (fs::path(a.out) / "summary.csv").string();
  {
    std::ofstream probe(records_path);
    if (!probe) {
      throw InvalidInput("cannot open '" + records_path + "' for writing");
    }
  }

  std::vector<SignalSpec> specs;
  for (SignalFamily fam : families) {
    for (int n : a.sizes) {
      for (double sigma : a.sigmas) {
        for (std::uint64_t seed : a.seeds) {
          specs.push_back({fam, n, sigma, seed});
        }
      }
    }
  }

  GridOptions opts;
  opts.budgets = a.budgets;
  opts.jobs = a.jobs;
  opts.trace_stride = a.stride;
  opts.stop_tolerance = a.tol;
  opts.config.lsps_relaxation = a.relax;
  opts.config.admm_gamma = a.gamma;
  if (a.has_rho) opts.config.uzawa_step = a.rho;

  const std::vector<ExperimentRecord> records =
      run_grid(specs, solvers, opts);
  export_records(records, records_path);
  export_summary(records, summary_path);

  long completed = 0, exhausted = 0, errors = 0;
  for (const auto& rec : records) {
    if (rec.status == "completed") {
      ++completed;
    } else if (rec.status == "exhausted") {
      ++exhausted;
    } else {
      ++errors;
      std::cerr << "error cell: solver=" << rec.solver
                << " family=" << family_name(rec.spec.family)
                << " n=" << rec.spec.n << " sigma=" << rec.spec.sigma
                << " seed=" << rec.spec.seed << " budget=" << rec.budget_s
                << ": " << rec.error_message << '\n';
    }
  }
  std::cout << "wrote " << records_path << " and " << summary_path << '\n';
  std::cout << "cells: " << records.size() << " total, " << completed
            << " completed, " << exhausted << " exhausted, " << errors
            << " error\n";
  return errors > 0 ? 3 : 0;
}

struct ValidateArgs {
  int trials = 100;
  std::uint64_t seed = 1;
  double tol = 1e-6;
  bool include_lsps = false;
  std::string inject_fault;
};

int run_validate(const ValidateArgs& a) {
  if (a.trials < 0) throw InvalidInput("--trials must be nonnegative");
  if (a.tol <= 0.0) throw InvalidInput("--tol must be positive");
  if (!a.inject_fault.empty()) require_solver(a.inject_fault);

  std::vector<std::string> ids;
  for (const SolverEntry& e : solver_registry()) {
    if (e.id == "lsps" && !a.include_lsps) continue;
    ids.push_back(e.id);
  }

  struct Tally {
    double max_dev = 0.0;
    long runs = 0;
    long faults = 0;
    std::optional<std::uint64_t> first_bad_seed;
    std::string first_message;
  };
  std::map<std::string, Tally> tallies;
  for (const auto& id : ids) tallies[id];
  bool trial_fault = false;
  std::optional<std::uint64_t> trial_fault_seed;

  for (int t = 0; t < a.trials; ++t) {
    const std::uint64_t seed_t = a.seed + static_cast<std::uint64_t>(t);
    std::mt19937_64 rng(seed_t);
    std::uniform_int_distribution<int> size_dist(4, 12);
    std::bernoulli_distribution half(0.5);
    std::uniform_real_distribution<double> gap_dist(0.5, 2.0);
    std::uniform_real_distribution<double> weight_dist(0.5, 2.0);
    std::normal_distribution<double> value_dist(0.0, 2.0);

    const int n = size_dist(rng);
    const bool uniform_z = half(rng);
    const bool unit_w = half(rng);

    Eigen::VectorXd z(n), y(n), w(n);
    double zc = 0.0;
    for (int i = 0; i < n; ++i) {
      zc = uniform_z ? static_cast<double>(i + 1) : zc + gap_dist(rng);
      z[i] = zc;
    }
    for (int i = 0; i < n; ++i) y[i] = value_dist(rng);
    for (int i = 0; i < n; ++i) w[i] = unit_w ? 1.0 : weight_dist(rng);

    try {
      const Signal signal(z, y, w);
      const ConeSystem cone = build_cone_system(signal);
      const SolverResult exact = brute_force_project(signal, cone);

      for (const auto& id : ids) {
        const SolverEntry& entry = *find_solver(id);
        if (entry.requires_uniform && !signal.uniform_spacing()) continue;
        Tally& tally = tallies[id];
        try {
          IterControl ctl;
          ctl.max_iterations = 2'000'000;
          ctl.stop_tolerance = 1e-10;
          ctl.trace_stride = 1000;
          ctl.reference = exact.x_hat;
          ctl.reference_tolerance = a.tol * 0.1;
          const SolverTrace trace =
              entry.run(signal, cone, ctl, SolverConfig{});
          Eigen::VectorXd x = trace.result.x_hat;
          if (id == a.inject_fault) x[0] += 1e-3;
          const double dev =
              (x - exact.x_hat).lpNorm<Eigen::Infinity>();
          tally.max_dev = std::max(tally.max_dev, dev);
          ++tally.runs;
          if (dev > a.tol && !tally.first_bad_seed) {
            tally.first_bad_seed = seed_t;
          }
        } catch (const std::exception& e) {
          ++tally.faults;
          if (!tally.first_bad_seed) {
            tally.first_bad_seed = seed_t;
            tally.first_message = e.what();
          }
        }
      }
    } catch (const std::exception& e) {
      trial_fault = true;
      if (!trial_fault_seed) trial_fault_seed = seed_t;
      std::cerr << "trial seed " << seed_t << ": " << e.what() << '\n';
    }
  }

  std::printf(
      "validated %d trials: random signals, 4 <= n <= 12, mixed spacing and "
      "weights, exhaustive reference\n",
      a.trials);
  std::printf("%-12s %-14s %6s %7s  %s\n", "solver", "max_deviation", "runs",
              "faults", "status");
  bool all_ok = !trial_fault;
  for (const auto& id : ids) {
    const Tally& tally = tallies[id];
    const bool ok = tally.faults == 0 && tally.max_dev <= a.tol;
    all_ok = all_ok && ok;
    std::printf("%-12s %-14.3e %6ld %7ld  %s\n", id.c_str(), tally.max_dev,
                tally.runs, tally.faults,
                tally.faults > 0 ? "fault" : (ok ? "ok" : "exceeded"));
  }
  if (all_ok) {
    std::printf("all solvers within %g of the exhaustive optimum\n", a.tol);
    return 0;
  }
  for (const auto& id : ids) {
    const Tally& tally = tallies[id];
    if (tally.faults == 0 && tally.max_dev <= a.tol) continue;
    std::fprintf(stderr, "validation failure: solver %s, first failing trial "
                         "seed %llu%s%s\n",
                 id.c_str(),
                 static_cast<unsigned long long>(
                     tally.first_bad_seed.value_or(a.seed)),
                 tally.first_message.empty() ? "" : ": ",
                 tally.first_message.c_str());
  }
  if (trial_fault) {
    std::fprintf(stderr,
                 "validation failure: trial setup fault, first failing trial "
                 "seed %llu\n",
                 static_cast<unsigned long long>(*trial_fault_seed));
  }
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "conereg: weighted least squares fitting under concavity (cone) "
      "constraints"};
  app.footer(solver_help_footer());
  app.require_subcommand(1);

  SolveArgs sa;
  CLI::App* solve = app.add_subcommand(
      "solve", "Fit one dataset and print the solution with its certificate");
  solve->add_option("-i,--input", sa.input,
                    "input CSV with header z,y or z,y,w")
      ->required();
  solve->add_option("-s,--solver", sa.solver,
                    "solver id (see list below): " + join(solver_ids(), ", "))
      ->capture_default_str();
  solve->add_option("--tol", sa.tol, "stopping tolerance on the certificate")
      ->capture_default_str();
  solve->add_option("--max-iter", sa.max_iter, "iteration cap")
      ->capture_default_str();
  auto* budget_opt =
      solve->add_option("--budget", sa.budget, "CPU budget in seconds");
  solve->add_option("--stride", sa.stride, "iterations between trace samples")
      ->capture_default_str();
  solve->add_option("--relax", sa.relax, "lsps relaxation factor in (0,1]")
      ->capture_default_str();
  solve->add_flag("--allow-over-relax", sa.over_relax,
                  "permit lsps relaxation factors above 1");
  auto* rho_opt = solve->add_option(
      "--rho", sa.rho, "uzawa dual step size (default: spectral bound)");
  solve->add_option("--gamma", sa.gamma, "admm penalty parameter")
      ->capture_default_str();
  solve->add_option("--format", sa.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  solve->add_option("-o,--out", sa.out, "output file (default: stdout)");

  BenchArgs ba;
  CLI::App* bench = app.add_subcommand(
      "benchmark", "Run a solver grid and write records.csv + summary.csv");
  bench->add_option("--families", ba.families, "signal families (S1,S2,S3)")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--sizes", ba.sizes, "signal sizes n")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--sigmas", ba.sigmas, "noise levels")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--seeds", ba.seeds, "random seeds")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--solvers", ba.solvers,
                    "solver ids (default: all): " + join(solver_ids(), ", "))
      ->delimiter(',');
  bench->add_option("--budgets", ba.budgets, "CPU budgets in seconds")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("-o,--out", ba.out, "output directory")->required();
  bench->add_option("-j,--jobs", ba.jobs, "worker threads")
      ->capture_default_str();
  bench->add_option("--stride", ba.stride, "iterations between trace samples")
      ->capture_default_str();
  bench->add_option("--tol", ba.tol, "stopping tolerance on the certificate")
      ->capture_default_str();
  bench->add_option("--relax", ba.relax, "lsps relaxation factor")
      ->capture_default_str();
  bench->add_option("--gamma", ba.gamma, "admm penalty parameter")
      ->capture_default_str();
  auto* bench_rho = bench->add_option(
      "--rho", ba.rho, "uzawa dual step size (default: spectral bound)");

  ValidateArgs va;
  CLI::App* validate = app.add_subcommand(
      "validate",
      "Check every solver against the exhaustive oracle on random signals");
  validate->add_option("--trials", va.trials, "number of random trials")
      ->capture_default_str();
  validate->add_option("--seed", va.seed, "base seed (trial t uses seed+t)")
      ->capture_default_str();
  validate->add_option("--tol", va.tol, "max allowed deviation per point")
      ->capture_default_str();
  validate->add_flag(
      "--include-lsps", va.include_lsps,
      "also validate lsps (its limit point is only an approximation)");
  validate->add_option(
      "--inject-fault", va.inject_fault,
      "perturb the named solver's output (tests the failure reporting path)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  sa.has_budget = budget_opt->count() > 0;
  sa.has_rho = rho_opt->count() > 0;
  ba.has_rho = bench_rho->count() > 0;

  try {
    if (solve->parsed()) {
      try {
        return run_solve(sa);
      } catch (const InvalidInput&) {
        throw;
      } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
      }
    }
    if (bench->parsed()) {
      try {
        return run_benchmark(ba);
      } catch (const InvalidInput&) {
        throw;
      } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
      }
    }
    if (validate->parsed()) {
      try {
        return run_validate(va);
      } catch (const InvalidInput&) {
        throw;
      } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
      }
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
