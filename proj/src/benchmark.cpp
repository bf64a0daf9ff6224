#include "conereg/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "conereg/errors.hpp"
#include "conereg/finite.hpp"
#include "conereg/warmstart.hpp"

namespace conereg {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Gaussian stream with a pinned transform: 64-bit Mersenne Twister uniforms
// through the Box-Muller map, so identical seeds give identical draws on
// every platform with IEEE doubles.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : gen_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0,1], u2 in [0,1).
    const double u1 =
        1.0 - static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

double sinc(double t) {
  if (std::abs(t) < 1e-8) return 1.0 - t * t / 6.0;
  return std::sin(t) / t;
}

double s1_value(int n, double z) {
  const double nd = static_cast<double>(n);
  const double beta = 0.1;
  const double alpha = 2.0 * nd * std::sin(8.0 / 5.0) - beta * nd;
  const double gamma = -2.0 / (nd * nd);
  const double delta = alpha + beta * 2.0 * nd / 3.0 -
                       gamma * 8.0 * nd * nd * nd / 27.0;
  if (z <= nd / 3.0) return 2.0 * nd * std::sin(24.0 * z / (5.0 * nd));
  if (z <= 2.0 * nd / 3.0) return alpha + beta * z;
  return gamma * z * z * z + delta;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string family_name(SignalFamily family) {
  switch (family) {
    case SignalFamily::kS1:
      return "S1";
    case SignalFamily::kS2:
      return "S2";
    case SignalFamily::kS3:
      return "S3";
  }
  return "S?";
}

SignalFamily parse_family(const std::string& name) {
  std::string up;
  for (char c : name) up.push_back(static_cast<char>(std::toupper(c)));
  if (up == "S1") return SignalFamily::kS1;
  if (up == "S2") return SignalFamily::kS2;
  if (up == "S3") return SignalFamily::kS3;
  throw InvalidInput("unknown signal family '" + name +
                     "' (expected S1, S2, or S3)");
}

Eigen::VectorXd signal_truth(const SignalSpec& spec) {
  if (spec.n < 3) throw InvalidInput("signal size must be at least 3");
  if (spec.sigma < 0.0) throw InvalidInput("sigma must be nonnegative");
  Eigen::VectorXd truth(spec.n);
  switch (spec.family) {
    case SignalFamily::kS1:
      for (int i = 0; i < spec.n; ++i) {
        truth[i] = s1_value(spec.n, static_cast<double>(i + 1));
      }
      break;
    case SignalFamily::kS2: {
      NormalStream stream(spec.seed);
      for (int i = 0; i < spec.n; ++i) truth[i] = stream.next();
      break;
    }
    case SignalFamily::kS3:
      for (int i = 0; i < spec.n; ++i) {
        const double z = static_cast<double>(i + 1);
        truth[i] = sinc(6.0 * z / static_cast<double>(spec.n) - 1.0);
      }
      break;
  }
  return truth;
}

Signal generate_signal(const SignalSpec& spec) {
  const Eigen::VectorXd truth = signal_truth(spec);
  Eigen::VectorXd z(spec.n);
  for (int i = 0; i < spec.n; ++i) z[i] = static_cast<double>(i + 1);

  // One stream per spec: S2 consumes n draws for the base signal, then
  // every family consumes n more for the additive noise.
  NormalStream stream(spec.seed);
  if (spec.family == SignalFamily::kS2) {
    for (int i = 0; i < spec.n; ++i) stream.next();
  }
  Eigen::VectorXd y = truth;
  if (spec.sigma > 0.0) {
    for (int i = 0; i < spec.n; ++i) y[i] += spec.sigma * stream.next();
  }
  return Signal(std::move(z), std::move(y));
}

ReferenceSolution combine_references(const SolverResult& a,
                                     const SolverResult& b,
                                     double agreement_tol,
                                     double certificate_tol) {
  if (!a.converged || !b.converged) {
    throw SolverInternalError(
        "reference cross-check failed: a candidate did not converge");
  }
  if (!a.certificate.passes(certificate_tol) ||
      !b.certificate.passes(certificate_tol)) {
    throw SolverInternalError(
        "reference cross-check failed: a candidate certificate exceeds " +
        format_short(certificate_tol));
  }
  const double scale = 1.0 + a.x_hat.cwiseAbs().maxCoeff();
  const double gap = (a.x_hat - b.x_hat).cwiseAbs().maxCoeff();
  if (gap > agreement_tol * scale) {
    throw SolverInternalError(
        "reference cross-check failed: candidates disagree by " +
        format_short(gap) + " (relative tolerance " +
        format_short(agreement_tol) + ")");
  }
  return {a.x_hat, "cross-checked"};
}

ReferenceSolution reference_solution(const Signal& signal,
                                     const ConeSystem& cone) {
  if (cone.m <= 20) {
    const SolverResult exact = brute_force_project(signal, cone);
    return {exact.x_hat, "exhaustive"};
  }
  IterControl ctl;
  ctl.trace_stride = 1 << 20;
  const SolverTrace first = mpdb_solve(signal, cone, ctl);
  // Second opinion from a structurally different exact solver.
  const SolverTrace second =
      signal.uniform_spacing()
          ? block_active_set_solve(signal, cone, ctl)
          : critical_index_solve(signal, cone, ctl);
  return combine_references(first.result, second.result);
}

std::vector<ExperimentRecord> run_grid(const std::vector<SignalSpec>& specs,
                                       const std::vector<std::string>& solvers,
                                       const GridOptions& opts) {
  for (const auto& id : solvers) {
    if (!find_solver(id)) {
      throw InvalidInput("unknown solver id '" + id + "'");
    }
  }
  if (opts.jobs < 1) throw InvalidInput("jobs must be at least 1");
  if (opts.budgets.empty()) throw InvalidInput("at least one budget required");

  // Signals, cones and references are shared per spec and computed up
  // front; a failing reference marks every cell of that spec.
  struct SpecData {
    Signal signal{Eigen::VectorXd::LinSpaced(3, 1.0, 3.0),
                  Eigen::VectorXd::Zero(3)};
    std::unique_ptr<ConeSystem> cone;
    ReferenceSolution reference;
    std::string error;
  };
  std::vector<SpecData> data(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      data[i].signal = generate_signal(specs[i]);
      data[i].cone =
          std::make_unique<ConeSystem>(build_cone_system(data[i].signal));
      data[i].reference = reference_solution(data[i].signal, *data[i].cone);
    } catch (const std::exception& e) {
      data[i].error = e.what();
    }
  }

  struct Cell {
    std::size_t spec;
    std::size_t solver;
    std::size_t budget;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    for (std::size_t v = 0; v < solvers.size(); ++v) {
      for (std::size_t b = 0; b < opts.budgets.size(); ++b) {
        cells.push_back({s, v, b});
      }
    }
  }

  const std::string config_hash = [&] {
    std::ostringstream os;
    os << opts.trace_stride << '|' << opts.stop_tolerance << '|'
       << opts.reference_tolerance << '|' << opts.config.lsps_relaxation
       << '|' << opts.config.admm_gamma;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(os.str())));
    return std::string(buf);
  }();

  std::vector<ExperimentRecord> records(cells.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= cells.size()) return;
      const Cell& cell = cells[c];
      const SignalSpec& spec = specs[cell.spec];
      ExperimentRecord& rec = records[c];
      rec.spec = spec;
      rec.solver = solvers[cell.solver];
      rec.config_hash = config_hash;
      rec.budget_s = opts.budgets[cell.budget];

      const SpecData& sd = data[cell.spec];
      if (!sd.error.empty()) {
        rec.status = "error";
        rec.error_message = sd.error;
        continue;
      }
      rec.reference_id = sd.reference.method;

      try {
        const SolverEntry* entry = find_solver(rec.solver);
        if (entry->requires_uniform && !sd.signal.uniform_spacing()) {
          throw InvalidInput("solver requires uniformly spaced abscissae");
        }
        IterControl ctl;
        ctl.max_iterations = std::numeric_limits<long>::max() / 4;
        ctl.stop_tolerance = opts.stop_tolerance;
        ctl.cpu_budget_seconds = rec.budget_s;
        ctl.trace_stride = opts.trace_stride;
        ctl.reference = sd.reference.x;
        ctl.reference_tolerance = opts.reference_tolerance;

        const SolverTrace trace =
            entry->run(sd.signal, *sd.cone, ctl, opts.config);
        for (const TraceSample& s : trace.samples) {
          BenchmarkSample bs;
          bs.cpu_s = s.cpu_seconds;
          bs.l2_distance = s.distance_to_reference.value_or(
              std::numeric_limits<double>::quiet_NaN());
          bs.kkt_primal = s.certificate.primal_residual;
          bs.kkt_dual = s.certificate.dual_residual;
          bs.kkt_comp = s.certificate.complementarity;
          rec.samples.push_back(bs);
        }
        rec.status = trace.result.converged ? "completed" : "exhausted";
      } catch (const std::exception& e) {
        rec.status = "error";
        rec.error_message = e.what();
        rec.samples.clear();
      }
    }
  };

  const std::size_t jobs =
      std::min(static_cast<std::size_t>(opts.jobs), cells.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return records;
}

void export_records(const std::vector<ExperimentRecord>& records,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out << "solver,family,n,sigma,seed,budget_s,cpu_s,l2_distance,kkt_primal,"
         "kkt_dual,kkt_comp,status\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& rec : records) {
    auto row = [&](const BenchmarkSample& s) {
      out << rec.solver << ',' << family_name(rec.spec.family) << ','
          << rec.spec.n << ',' << format_short(rec.spec.sigma) << ','
          << rec.spec.seed << ',' << format_short(rec.budget_s) << ','
          << format_double(s.cpu_s) << ',' << format_double(s.l2_distance)
          << ',' << format_double(s.kkt_primal) << ','
          << format_double(s.kkt_dual) << ',' << format_double(s.kkt_comp)
          << ',' << rec.status << '\n';
    };
    if (rec.samples.empty()) {
      row({nan, nan, nan, nan, nan});
    } else {
      for (const auto& s : rec.samples) row(s);
    }
  }
  if (!out.good()) throw InvalidInput("write to '" + path + "' failed");
}

std::vector<ExperimentRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) {
    throw InvalidInput(path + ":1: empty file");
  }
  const std::string expected =
      "solver,family,n,sigma,seed,budget_s,cpu_s,l2_distance,kkt_primal,"
      "kkt_dual,kkt_comp,status";
  if (line != expected) {
    throw InvalidInput(path + ":1: unexpected header '" + line + "'");
  }

  std::vector<ExperimentRecord> records;
  std::string current_key;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 12) {
      throw InvalidInput(path + ":" + std::to_string(line_no) +
                         ": expected 12 fields, found " +
                         std::to_string(f.size()));
    }
    try {
      const std::string key = f[0] + '|' + f[1] + '|' + f[2] + '|' + f[3] +
                              '|' + f[4] + '|' + f[5] + '|' + f[11];
      if (key != current_key) {
        ExperimentRecord rec;
        rec.solver = f[0];
        rec.spec.family = parse_family(f[1]);
        rec.spec.n = std::stoi(f[2]);
        rec.spec.sigma = std::stod(f[3]);
        rec.spec.seed = std::stoull(f[4]);
        rec.budget_s = std::stod(f[5]);
        rec.status = f[11];
        records.push_back(rec);
        current_key = key;
      }
      BenchmarkSample s;
      s.cpu_s = std::stod(f[6]);
      s.l2_distance = std::stod(f[7]);
      s.kkt_primal = std::stod(f[8]);
      s.kkt_dual = std::stod(f[9]);
      s.kkt_comp = std::stod(f[10]);
      records.back().samples.push_back(s);
    } catch (const InvalidInput&) {
      throw;
    } catch (const std::exception&) {
      throw InvalidInput(path + ":" + std::to_string(line_no) +
                         ": malformed numeric field");
    }
  }
  return records;
}

void export_summary(const std::vector<ExperimentRecord>& records,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out << "solver,family,n,sigma,seed,budget_s,terminal_distance,"
         "terminal_kkt_max,samples,status\n";
  for (const auto& rec : records) {
    double dist = std::numeric_limits<double>::quiet_NaN();
    double kkt = std::numeric_limits<double>::quiet_NaN();
    if (!rec.samples.empty()) {
      const BenchmarkSample& last = rec.samples.back();
      dist = last.l2_distance;
      kkt = std::max({last.kkt_primal, last.kkt_dual, last.kkt_comp});
    }
    out << rec.solver << ',' << family_name(rec.spec.family) << ','
        << rec.spec.n << ',' << format_short(rec.spec.sigma) << ','
        << rec.spec.seed << ',' << format_short(rec.budget_s) << ','
        << format_double(dist) << ',' << format_double(kkt) << ','
        << rec.samples.size() << ',' << rec.status << '\n';
  }
  if (!out.good()) throw InvalidInput("write to '" + path + "' failed");
}

}  // namespace conereg
