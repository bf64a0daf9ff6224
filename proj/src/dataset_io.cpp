#include "conereg/dataset_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include "conereg/errors.hpp"
#include "json.hpp"

namespace conereg {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(const std::string& s) {
  std::string r;
  for (char c : s) r.push_back(static_cast<char>(std::tolower(c)));
  return r;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) fields.push_back(trim(tok));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

[[noreturn]] void fail_at(const std::string& path, int line,
                          const std::string& msg) {
  throw InvalidInput(path + ":" + std::to_string(line) + ": " + msg);
}

double parse_value(const std::string& path, int line, const std::string& name,
                   const std::string& tok) {
  if (tok.empty()) fail_at(path, line, "empty " + name + " field");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    fail_at(path, line, "cannot parse " + name + " value '" + tok + "'");
  }
  if (used != tok.size()) {
    fail_at(path, line, "trailing characters in " + name + " value '" + tok +
                            "'");
  }
  if (!std::isfinite(v)) {
    fail_at(path, line, name + " value '" + tok + "' is not finite");
  }
  return v;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Signal read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) fail_at(path, 1, "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_fields(line);
  std::vector<std::string> names;
  for (const auto& h : header) names.push_back(lower(h));
  bool with_weights = false;
  if (names == std::vector<std::string>{"z", "y"}) {
    with_weights = false;
  } else if (names == std::vector<std::string>{"z", "y", "w"}) {
    with_weights = true;
  } else {
    fail_at(path, 1, "expected header 'z,y' or 'z,y,w', found '" + line + "'");
  }
  const std::size_t width = with_weights ? 3 : 2;

  std::vector<double> z, y, w;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != width) {
      fail_at(path, line_no,
              "expected " + std::to_string(width) + " fields, found " +
                  std::to_string(f.size()));
    }
    const double zi = parse_value(path, line_no, "z", f[0]);
    if (!z.empty() && zi <= z.back()) {
      fail_at(path, line_no, "z values must be strictly increasing");
    }
    z.push_back(zi);
    y.push_back(parse_value(path, line_no, "y", f[1]));
    if (with_weights) {
      const double wi = parse_value(path, line_no, "w", f[2]);
      if (wi <= 0.0) fail_at(path, line_no, "weights must be positive");
      w.push_back(wi);
    }
  }
  if (z.size() < 3) {
    throw InvalidInput(path + ": need at least 3 data rows, found " +
                       std::to_string(z.size()));
  }

  const int n = static_cast<int>(z.size());
  Eigen::VectorXd zv(n), yv(n);
  for (int i = 0; i < n; ++i) {
    zv[i] = z[i];
    yv[i] = y[i];
  }
  if (!with_weights) return Signal(std::move(zv), std::move(yv));
  Eigen::VectorXd wv(n);
  for (int i = 0; i < n; ++i) wv[i] = w[i];
  return Signal(std::move(zv), std::move(yv), std::move(wv));
}

void write_solution_csv(std::ostream& out, const Signal& signal,
                        const SolverTrace& trace) {
  const SolverResult& r = trace.result;
  const int n = signal.size();
  const int m = static_cast<int>(r.lambda_hat.size());
  std::vector<char> saturated(std::max(m, 0), 0);
  for (int j : r.active_set) {
    if (j >= 0 && j < m) saturated[j] = 1;
  }

  out << "index,z,y,w,x_hat,lambda_hat,saturated\n";
  for (int i = 0; i < n; ++i) {
    out << i << ',' << fmt(signal.z[i]) << ',' << fmt(signal.y[i]) << ','
        << fmt(signal.w[i]) << ',' << fmt(r.x_hat[i]) << ',';
    if (i < m) {
      out << fmt(r.lambda_hat[i]) << ',' << int(saturated[i]);
    } else {
      out << ',';
    }
    out << '\n';
  }
  out << "# status: " << (r.converged ? "converged" : "not-converged") << '\n';
  out << "# iterations: " << trace.iterations << '\n';
  out << "# kkt_primal: " << fmt(r.certificate.primal_residual) << '\n';
  out << "# kkt_dual: " << fmt(r.certificate.dual_residual) << '\n';
  out << "# kkt_comp: " << fmt(r.certificate.complementarity) << '\n';
  out << "# kkt_stationarity: " << fmt(r.certificate.stationarity) << '\n';
}

void write_solution_json(std::ostream& out, const Signal& signal,
                         const SolverTrace& trace) {
  const SolverResult& r = trace.result;
  const int n = signal.size();
  const int m = static_cast<int>(r.lambda_hat.size());

  nlohmann::json root;
  root["n"] = n;
  root["status"] = r.converged ? "converged" : "not-converged";
  root["iterations"] = trace.iterations;
  root["certificate"] = {
      {"primal", r.certificate.primal_residual},
      {"dual", r.certificate.dual_residual},
      {"complementarity", r.certificate.complementarity},
      {"stationarity", r.certificate.stationarity},
  };

  nlohmann::json points = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    points.push_back({{"index", i},
                      {"z", signal.z[i]},
                      {"y", signal.y[i]},
                      {"w", signal.w[i]},
                      {"x_hat", r.x_hat[i]}});
  }
  root["points"] = std::move(points);

  nlohmann::json lambda = nlohmann::json::array();
  for (int i = 0; i < m; ++i) lambda.push_back(r.lambda_hat[i]);
  root["lambda"] = std::move(lambda);

  nlohmann::json saturated = nlohmann::json::array();
  for (int j : r.active_set) saturated.push_back(j);
  root["saturated"] = std::move(saturated);

  if (!trace.stats.empty()) {
    nlohmann::json stats;
    for (const auto& [k, v] : trace.stats) stats[k] = v;
    root["stats"] = std::move(stats);
  }

  out << root.dump(2) << '\n';
}

}  // namespace conereg
