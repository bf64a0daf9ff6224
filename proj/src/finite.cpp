#include "conereg/finite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "conereg/errors.hpp"
#include "conereg/kernels.hpp"
#include "trace_recorder.hpp"

namespace conereg {
namespace {

double wdot(const Eigen::VectorXd& w, const Eigen::VectorXd& a,
            const Eigen::VectorXd& b) {
  return (a.array() * w.array() * b.array()).sum();
}

// Component of y in span{1, z} under the weighted inner product, via the
// orthonormal pair kept in the last two frame columns.
Eigen::VectorXd affine_component(const ConeSystem& cone,
                                 const Eigen::VectorXd& y) {
  const Eigen::VectorXd gc = cone.gamma.col(cone.m);
  const Eigen::VectorXd gl = cone.gamma.col(cone.m + 1);
  return wdot(cone.weights, gc, y) * gc + wdot(cone.weights, gl, y) * gl;
}

void check_constraint_indices(const ActiveSet& set, int m, const char* what) {
  std::vector<char> seen(m, 0);
  for (int j : set) {
    if (j < 0 || j >= m) {
      throw InvalidInput(std::string(what) + ": constraint index " +
                         std::to_string(j) + " out of range");
    }
    if (seen[j]) {
      throw InvalidInput(std::string(what) + ": constraint index " +
                         std::to_string(j) + " repeated");
    }
    seen[j] = 1;
  }
}

Eigen::VectorXd scatter_multipliers(int m, const ActiveSet& active,
                                    const Eigen::VectorXd& packed) {
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(m);
  for (std::size_t k = 0; k < active.size(); ++k) {
    lam[active[k]] = packed[static_cast<int>(k)];
  }
  return lam;
}

// Compensated running sum; the block solver accumulates moment sums whose
// terms can dwarf the result.
struct KahanSum {
  double total = 0.0;
  double carry = 0.0;
  void add(double value) {
    const double t = value - carry;
    const double s = total + t;
    carry = (s - total) - t;
    total = s;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Sector walk
// ---------------------------------------------------------------------------

SolverTrace mpdb_solve(const Signal& signal, const ConeSystem& cone,
                       const IterControl& ctl, const MpdbOptions& opts) {
  const int n = cone.n;
  const int m = cone.m;
  TraceRecorder rec(signal, cone, ctl);

  const Eigen::VectorXd v = affine_component(cone, signal.y);
  const Eigen::VectorXd u = signal.y - v;

  // Basis orientation: beta column for constraints assumed slack, gamma
  // column for constraints assumed saturated.
  std::vector<char> on_beta(m, 1);
  if (opts.saturated_init) {
    check_constraint_indices(*opts.saturated_init, m, "saturated_init");
    for (int j : *opts.saturated_init) on_beta[j] = 0;
  }
  const std::vector<char> on_beta_init = on_beta;

  Eigen::MatrixXd basis(n, n);
  auto fill_basis = [&]() {
    for (int j = 0; j < m; ++j) {
      basis.col(j) = on_beta[j] ? cone.beta.col(j) : cone.gamma.col(j);
    }
    basis.col(m) = cone.gamma.col(m);
    basis.col(m + 1) = cone.gamma.col(m + 1);
  };
  fill_basis();
  TrackedInverse inv(basis, opts.refresh_period);

  // Start point in the reduced space; default is the origin (the affine
  // fit). An explicit start must lie in the cone and in the sector of the
  // initial basis, so that every coordinate along the walk stays
  // nonnegative until its crossing.
  Eigen::VectorXd x_start = Eigen::VectorXd::Zero(n);
  if (opts.start_point) {
    if (opts.start_point->size() != n) {
      throw InvalidInput("start point has wrong length");
    }
    const double slack =
        1e-10 * (1.0 + opts.start_point->cwiseAbs().maxCoeff());
    if (cone.apply(*opts.start_point).maxCoeff() > slack) {
      throw InvalidInput("start point violates the cone constraints");
    }
    x_start = *opts.start_point - affine_component(cone, *opts.start_point);
    const Eigen::VectorXd coords = inv.solve(x_start);
    for (int j = 0; j < m; ++j) {
      if (coords[j] < -1e-8 * (1.0 + std::abs(coords[j]))) {
        throw InvalidInput(
            "start point is outside the sector of the initial basis");
      }
    }
  }

  const long max_crossings =
      opts.max_crossings > 0 ? opts.max_crossings : 50L * n + 1000;
  constexpr int kMaxRestarts = 5;

  Eigen::VectorXd xs = x_start;
  Eigen::VectorXd theta_u(n);
  double t_cur = 0.0;
  long crossings = 0;
  long restarts = 0;
  bool stop_mid = false;
  bool mid_converged = false;

  for (;;) {
    theta_u = inv.solve(u);
    const double scale_u = std::max(1.0, theta_u.cwiseAbs().maxCoeff());
    double worst = 0.0;
    for (int j = 0; j < m; ++j) worst = std::min(worst, theta_u[j]);
    if (worst >= -1e-10 * scale_u) break;  // u is in the current sector

    if (rec.over_budget()) {
      stop_mid = true;
      break;
    }
    if (crossings >= max_crossings) {
      throw SolverInternalError("sector walk exceeded the crossing cap");
    }

    const Eigen::VectorXd dir = u - xs;
    const Eigen::VectorXd theta_c = inv.solve(xs + t_cur * dir);
    const Eigen::VectorXd theta_d = inv.solve(dir);
    const double scale_c = std::max(1.0, theta_c.cwiseAbs().maxCoeff());
    const double scale_d = std::max(1.0, theta_d.cwiseAbs().maxCoeff());

    // Coordinates already at zero and heading negative pivot in place,
    // lowest index first. This is the regime at the origin start, where
    // every coordinate of the walk point is zero.
    int pivot = -1;
    double t_next = t_cur;
    for (int j = 0; j < m; ++j) {
      if (theta_d[j] < -1e-12 * scale_d &&
          std::abs(theta_c[j]) <= 1e-12 * scale_c) {
        pivot = j;
        break;
      }
    }

    if (pivot < 0) {
      // Proper segment crossing: first coordinate to reach zero.
      double t_best = std::numeric_limits<double>::infinity();
      int j_best = -1;
      bool tie = false;
      for (int j = 0; j < m; ++j) {
        if (theta_d[j] >= -1e-12 * scale_d) continue;
        const double tj = t_cur - theta_c[j] / theta_d[j];
        if (tj < t_best - 1e-12) {
          t_best = tj;
          j_best = j;
          tie = false;
        } else if (tj <= t_best + 1e-12 && j != j_best) {
          tie = true;
        }
      }
      if (j_best < 0) {
        throw SolverInternalError(
            "no crossing candidate despite a negative target coordinate");
      }
      if (tie) {
        // Degenerate simultaneous crossing: nudge the start point inside
        // the initial sector and rerun the walk.
        if (++restarts > kMaxRestarts) {
          throw SolverInternalError(
              "degenerate sector crossings persist after perturbation");
        }
        on_beta = on_beta_init;
        fill_basis();
        inv = TrackedInverse(basis, opts.refresh_period);
        Eigen::VectorXd nudge(n);
        for (int i = 0; i < n; ++i) {
          nudge[i] = std::sin(0.7 * (i + 1) * static_cast<double>(restarts));
        }
        nudge -= affine_component(cone, nudge);
        Eigen::VectorXd coords = inv.solve(x_start + 1e-9 * nudge);
        for (int j = 0; j < m; ++j) coords[j] = std::abs(coords[j]);
        coords[m] = coords[m + 1] = 0.0;
        xs = basis * coords;
        t_cur = 0.0;
        continue;
      }
      pivot = j_best;
      t_next = t_best;
    }

    const bool to_gamma = on_beta[pivot] != 0;
    const Eigen::VectorXd new_col =
        to_gamma ? cone.gamma.col(pivot) : cone.beta.col(pivot);
    const Eigen::VectorXd delta = new_col - basis.col(pivot);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
    unit[pivot] = 1.0;
    try {
      inv.rank_one_update(delta, unit);
    } catch (const SingularUpdateError&) {
      inv.refresh();
      inv.rank_one_update(delta, unit);
    }
    basis.col(pivot) = new_col;
    on_beta[pivot] = to_gamma ? 0 : 1;
    t_cur = t_next;
    ++crossings;

    if (rec.due(crossings)) {
      const Eigen::VectorXd x_now = xs + t_cur * dir + v;
      const Eigen::VectorXd lam_now =
          cone.multipliers_from_residual(signal.y - x_now);
      const auto decision = rec.sample(crossings, x_now, lam_now);
      if (decision == TraceRecorder::Decision::kConverged) {
        stop_mid = true;
        mid_converged = true;
        break;
      }
      if (decision == TraceRecorder::Decision::kExhausted) {
        stop_mid = true;
        break;
      }
    }
  }

  ActiveSet saturated;
  ActiveSet hinge;
  for (int j = 0; j < m; ++j) {
    (on_beta[j] ? hinge : saturated).push_back(j);
  }

  Eigen::VectorXd x_hat;
  Eigen::VectorXd lam_hat;
  bool converged = false;
  if (stop_mid) {
    x_hat = xs + t_cur * (u - xs) + v;
    lam_hat = cone.multipliers_from_residual(signal.y - x_hat);
    converged = mid_converged;
  } else {
    // Reconstruct from the final sector, then recompute through the
    // equality projection onto the saturated face and cross-check.
    Eigen::VectorXd xu = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < m; ++j) {
      if (on_beta[j]) xu += std::max(0.0, theta_u[j]) * cone.beta.col(j);
    }
    const Eigen::VectorXd x_sector = xu + v;
    const EqualityProjection pol = project_equality(signal, cone, saturated);
    if ((pol.x - x_sector).cwiseAbs().maxCoeff() >
        1e-7 * (1.0 + x_sector.cwiseAbs().maxCoeff())) {
      throw SolverInternalError(
          "sector reconstruction and equality projection disagree");
    }
    x_hat = pol.x;
    lam_hat = scatter_multipliers(m, saturated, pol.lambda);
    converged = true;
  }

  SolverTrace trace =
      rec.finish(std::max<long>(crossings, 1), x_hat, lam_hat, converged);
  trace.iterations = std::max<long>(crossings, 1);
  trace.hinges = hinge;
  trace.stats["crossings"] = static_cast<double>(crossings);
  trace.stats["degenerate_restarts"] = static_cast<double>(restarts);
  trace.stats["basis_refreshes"] = 0.0;
  return trace;
}

// ---------------------------------------------------------------------------
// Hinge fitting
// ---------------------------------------------------------------------------

SolverTrace meyer_solve(const Signal& signal, const ConeSystem& cone,
                        const IterControl& ctl, const MeyerOptions& opts) {
  const int n = cone.n;
  const int m = cone.m;
  TraceRecorder rec(signal, cone, ctl);

  if (opts.hinges_init && opts.start_full) {
    throw InvalidInput("choose one of hinges_init and start_full");
  }
  std::set<int> hinges;
  if (opts.hinges_init) {
    check_constraint_indices(*opts.hinges_init, m, "hinges_init");
    hinges.insert(opts.hinges_init->begin(), opts.hinges_init->end());
  } else if (opts.start_full) {
    for (int j = 0; j < m; ++j) hinges.insert(j);
  }

  std::set<std::vector<int>> visited;
  visited.insert(std::vector<int>(hinges.begin(), hinges.end()));

  long fits = 0;
  long adds = 0;
  long removes = 0;
  bool exhausted = false;
  bool converged = false;
  double last_feasible_sse = std::numeric_limits<double>::infinity();
  bool have_feasible = false;
  bool changed_since_feasible = false;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(m);

  for (;;) {
    ++fits;

    Eigen::MatrixXd span_basis(n, static_cast<int>(hinges.size()) + 2);
    int col = 0;
    std::vector<int> hinge_list(hinges.begin(), hinges.end());
    for (int j : hinge_list) span_basis.col(col++) = cone.beta.col(j);
    span_basis.col(col) = cone.gamma.col(m);
    span_basis.col(col + 1) = cone.gamma.col(m + 1);

    const SpanProjection fit =
        qr_project_onto_span(span_basis, signal.y, cone.weights);
    x = fit.projection;
    lam = cone.multipliers_from_residual(signal.y - x);
    const double sse = wdot(cone.weights, signal.y - x, signal.y - x);

    if (rec.due(fits)) {
      const auto decision = rec.sample(fits, x, lam, sse);
      if (decision == TraceRecorder::Decision::kConverged) {
        converged = true;
        break;
      }
      if (decision == TraceRecorder::Decision::kExhausted) {
        exhausted = true;
        break;
      }
    } else if (rec.over_budget()) {
      exhausted = true;
      break;
    }

    // The fit is usable only if every hinge coefficient is nonnegative;
    // otherwise drop the most negative hinge and refit.
    const double coeff_scale =
        1.0 + fit.coefficients.cwiseAbs().maxCoeff();
    int drop = -1;
    double most_negative = -1e-10 * coeff_scale;
    for (std::size_t k = 0; k < hinge_list.size(); ++k) {
      const double b = fit.coefficients[static_cast<int>(k)];
      if (b < most_negative) {
        most_negative = b;
        drop = hinge_list[k];
      }
    }
    if (drop >= 0) {
      hinges.erase(drop);
      ++removes;
      changed_since_feasible = true;
      if (!visited.insert(std::vector<int>(hinges.begin(), hinges.end()))
               .second) {
        throw SolverInternalError("hinge set revisited; fitting cycle");
      }
      if (fits >= ctl.max_iterations) {
        exhausted = true;
        break;
      }
      continue;
    }

    // Feasible fit: the misfit must have dropped since the previous one.
    if (have_feasible && changed_since_feasible &&
        sse > last_feasible_sse + 1e-9 * (1.0 + last_feasible_sse)) {
      throw SolverInternalError("misfit failed to decrease across a refit");
    }
    last_feasible_sse = sse;
    have_feasible = true;
    changed_since_feasible = false;

    // Optimality: the residual must have nonnegative frame coefficients
    // off the hinge set. Add the worst offender.
    const double lam_scale = 1.0 + lam.cwiseAbs().maxCoeff();
    int add = -1;
    double worst = -1e-10 * lam_scale;
    for (int j = 0; j < m; ++j) {
      if (hinges.count(j)) continue;
      if (lam[j] < worst) {
        worst = lam[j];
        add = j;
      }
    }
    if (add < 0) {
      // The frame test above scales with the largest multiplier, so on long
      // saturated runs it can accept a set whose true multipliers dip
      // slightly negative. Settle the endgame with the equality projection
      // onto the saturated rows (the same subspace the span fit used),
      // whose multipliers are accurate near zero.
      ActiveSet saturated;
      for (int j = 0; j < m; ++j) {
        if (!hinges.count(j)) saturated.push_back(j);
      }
      const EqualityProjection pol = project_equality(signal, cone, saturated);
      if ((pol.x - x).cwiseAbs().maxCoeff() >
          1e-7 * (1.0 + x.cwiseAbs().maxCoeff())) {
        throw SolverInternalError(
            "hinge-span fit and equality projection disagree");
      }
      double strict_min = -5e-9;
      for (int k = 0; k < static_cast<int>(saturated.size()); ++k) {
        if (pol.lambda[k] < strict_min) {
          strict_min = pol.lambda[k];
          add = saturated[k];
        }
      }
      if (add < 0) {
        x = pol.x;
        lam = scatter_multipliers(m, saturated, pol.lambda);
        converged = true;
        break;
      }
    }
    hinges.insert(add);
    ++adds;
    changed_since_feasible = true;
    if (!visited.insert(std::vector<int>(hinges.begin(), hinges.end()))
             .second) {
      throw SolverInternalError("hinge set revisited; fitting cycle");
    }
    if (fits >= ctl.max_iterations) {
      exhausted = true;
      break;
    }
  }

  SolverTrace trace = rec.finish(fits, x, lam, converged && !exhausted);
  trace.iterations = fits;
  trace.hinges = ActiveSet(hinges.begin(), hinges.end());
  trace.stats["fits"] = static_cast<double>(fits);
  trace.stats["adds"] = static_cast<double>(adds);
  trace.stats["removes"] = static_cast<double>(removes);
  return trace;
}

// ---------------------------------------------------------------------------
// Nearest-point recursion on the polar frame
// ---------------------------------------------------------------------------

namespace {

struct NppContext {
  const Eigen::VectorXd& w;
  TraceRecorder& rec;
  long deflations = 0;
  long reductions = 0;
  int max_depth = 0;
  int edge_count = 0;  // edges at the top level; bounds the deflation count
  std::vector<int> critical;
  std::vector<int> terminal_support;
  bool exhausted = false;
};

struct Pos2 {
  Eigen::VectorXd point;
  double ca = 0.0;
  double cb = 0.0;
};

// Projection of u onto pos{a, b} in the weighted inner product.
Pos2 project_pos2(const Eigen::VectorXd& w, const Eigen::VectorXd& u,
                  const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double gaa = wdot(w, a, a);
  const double gab = wdot(w, a, b);
  const double gbb = wdot(w, b, b);
  const double ra = wdot(w, u, a);
  const double rb = wdot(w, u, b);
  const double det = gaa * gbb - gab * gab;

  Pos2 out;
  if (det > 1e-14 * std::max(1.0, gaa * gbb)) {
    const double ca = (gbb * ra - gab * rb) / det;
    const double cb = (gaa * rb - gab * ra) / det;
    if (ca >= 0.0 && cb >= 0.0) {
      out.ca = ca;
      out.cb = cb;
      out.point = ca * a + cb * b;
      return out;
    }
  }
  // Fall back to the better single ray.
  const double ta = gaa > 0.0 ? std::max(0.0, ra) / gaa : 0.0;
  const double tb = gbb > 0.0 ? std::max(0.0, rb) / gbb : 0.0;
  const double da = ta * ta * gaa - 2.0 * ta * ra;  // ||u - ta a||^2 - ||u||^2
  const double db = tb * tb * gbb - 2.0 * tb * rb;
  if (da <= db) {
    out.ca = ta;
    out.point = ta * a;
  } else {
    out.cb = tb;
    out.point = tb * b;
  }
  return out;
}

// Nearest point to u in the cone spanned nonnegatively by the edge columns.
// Critical edges found along the way are recorded by original id and the
// problem is deflated onto their orthogonal complement, one at a time.
Eigen::VectorXd npp_solve(NppContext& cx, const Eigen::MatrixXd& edges_in,
                          const std::vector<int>& ids_in,
                          const Eigen::VectorXd& u, int depth) {
  const int n = static_cast<int>(u.size());
  cx.max_depth = std::max(cx.max_depth, depth);
  if (depth > cx.edge_count + 2) {
    throw SolverInternalError("deflation recursion exceeded the edge count");
  }

  // Drop edges annihilated by earlier deflations.
  std::vector<int> keep;
  double max_norm2 = 0.0;
  std::vector<double> norm2_all(ids_in.size());
  for (std::size_t j = 0; j < ids_in.size(); ++j) {
    norm2_all[j] = wdot(cx.w, edges_in.col(static_cast<int>(j)),
                        edges_in.col(static_cast<int>(j)));
    max_norm2 = std::max(max_norm2, norm2_all[j]);
  }
  for (std::size_t j = 0; j < ids_in.size(); ++j) {
    if (norm2_all[j] > 1e-24 * std::max(1.0, max_norm2)) {
      keep.push_back(static_cast<int>(j));
    }
  }
  const int k = static_cast<int>(keep.size());
  if (k == 0) return Eigen::VectorXd::Zero(n);

  Eigen::MatrixXd edges(n, k);
  std::vector<int> ids(k);
  Eigen::VectorXd norm2(k);
  for (int j = 0; j < k; ++j) {
    edges.col(j) = edges_in.col(keep[j]);
    ids[j] = ids_in[keep[j]];
    norm2[j] = norm2_all[keep[j]];
  }

  const double u2 = wdot(cx.w, u, u);
  Eigen::VectorXd score(k);
  for (int j = 0; j < k; ++j) score[j] = wdot(cx.w, u, edges.col(j));

  auto edge_tol = [&](int j) {
    return 1e-10 * (1.0 + std::sqrt(std::max(0.0, u2 * norm2[j])));
  };

  // The search starts at the apex with an empty face; a lone violator there
  // or later is the critical-index signal.
  std::vector<int> support;
  std::vector<double> coords;
  Eigen::VectorXd xbar = Eigen::VectorXd::Zero(n);

  const long cap = 50L * (k + 2);
  for (long pass = 0; pass < cap; ++pass) {
    if (cx.rec.over_budget()) {
      cx.exhausted = true;
      return xbar;
    }

    const double dist2_before = wdot(cx.w, u - xbar, u - xbar);

    std::vector<int> violators;
    std::vector<double> violations;
    for (int j = 0; j < k; ++j) {
      const double v = wdot(cx.w, u - xbar, edges.col(j));
      if (v > edge_tol(j)) {
        violators.push_back(j);
        violations.push_back(v);
      }
    }

    if (violators.empty()) {
      cx.terminal_support.clear();
      for (std::size_t s = 0; s < support.size(); ++s) {
        if (coords[s] > 1e-12 * (1.0 + std::abs(coords[s]))) {
          cx.terminal_support.push_back(ids[support[s]]);
        }
      }
      return xbar;
    }

    if (violators.size() == 1 && score[violators[0]] > edge_tol(violators[0])) {
      // Critical edge: split u along it and recurse on the complement.
      const int l = violators[0];
      cx.critical.push_back(ids[l]);
      if (++cx.deflations > cx.edge_count) {
        throw SolverInternalError("deflation count exceeded the edge count");
      }
      const double cl = score[l] / norm2[l];
      const Eigen::VectorXd el = edges.col(l);
      const Eigen::VectorXd ubar = u - cl * el;
      Eigen::MatrixXd rest(n, k - 1);
      std::vector<int> rest_ids;
      rest_ids.reserve(k - 1);
      int c = 0;
      for (int j = 0; j < k; ++j) {
        if (j == l) continue;
        rest.col(c++) = edges.col(j) - el * (wdot(cx.w, edges.col(j), el) /
                                             norm2[l]);
        rest_ids.push_back(ids[j]);
      }
      const Eigen::VectorXd p_rest =
          npp_solve(cx, rest, rest_ids, ubar, depth + 1);
      return p_rest + cl * el;
    }

    // Entering edge: strongest violation relative to edge length, lowest
    // index among ties.
    int l = violators[0];
    double best_gain = violations[0] / std::sqrt(norm2[violators[0]]);
    for (std::size_t v = 1; v < violators.size(); ++v) {
      const double g = violations[v] / std::sqrt(norm2[violators[v]]);
      if (g > best_gain * (1.0 + 1e-12)) {
        best_gain = g;
        l = violators[v];
      }
    }

    // Distance reduction onto pos{xbar, entering edge}; from the apex this
    // degenerates to the best ray along the entering edge.
    if (support.empty()) {
      const double cl = std::max(0.0, score[l]) / norm2[l];
      support.assign(1, l);
      coords.assign(1, cl);
      xbar = cl * edges.col(l);
    } else {
      const Pos2 two = project_pos2(cx.w, u, xbar, edges.col(l));
      std::vector<int> new_support;
      std::vector<double> new_coords;
      for (std::size_t s = 0; s < support.size(); ++s) {
        if (support[s] == l) continue;
        const double c2 = two.ca * coords[s];
        if (c2 > 0.0) {
          new_support.push_back(support[s]);
          new_coords.push_back(c2);
        }
      }
      double cl_coord = two.cb;
      for (std::size_t s = 0; s < support.size(); ++s) {
        if (support[s] == l) cl_coord += two.ca * coords[s];
      }
      if (cl_coord > 0.0) {
        new_support.push_back(l);
        new_coords.push_back(cl_coord);
      }
      support = std::move(new_support);
      coords = std::move(new_coords);
      xbar = two.point;
      if (support.empty()) {
        const double cl = std::max(0.0, score[l]) / norm2[l];
        support.assign(1, l);
        coords.assign(1, cl);
        xbar = cl * edges.col(l);
      }
    }
    ++cx.reductions;

    // Projection-face polish: least squares on the span of the working
    // support, walking back along the feasible segment and shedding edges
    // with nonpositive coefficients until the fit is interior.
    for (int inner = 0;; ++inner) {
      if (inner > k + 2) {
        throw SolverInternalError("nearest-point search stalled");
      }
      Eigen::MatrixXd face(n, static_cast<int>(support.size()));
      for (std::size_t s = 0; s < support.size(); ++s) {
        face.col(static_cast<int>(s)) = edges.col(support[s]);
      }
      const SpanProjection fit = qr_project_onto_span(face, u, cx.w);
      const double cscale = 1.0 + fit.coefficients.cwiseAbs().maxCoeff();
      bool all_nonneg = true;
      for (int s = 0; s < fit.coefficients.size(); ++s) {
        if (fit.coefficients[s] < -1e-12 * cscale) all_nonneg = false;
      }
      if (all_nonneg) {
        xbar = fit.projection;
        for (std::size_t s = 0; s < support.size(); ++s) {
          coords[s] = std::max(0.0, fit.coefficients[static_cast<int>(s)]);
        }
        break;
      }
      double alpha = 1.0;
      for (std::size_t s = 0; s < support.size(); ++s) {
        const double c = fit.coefficients[static_cast<int>(s)];
        if (c < 0.0 && coords[s] - c > 0.0) {
          alpha = std::min(alpha, coords[s] / (coords[s] - c));
        }
      }
      std::vector<int> kept_support;
      std::vector<double> kept_coords;
      for (std::size_t s = 0; s < support.size(); ++s) {
        const double c = fit.coefficients[static_cast<int>(s)];
        const double nc = coords[s] + alpha * (c - coords[s]);
        if (nc > 1e-14 * cscale) {
          kept_support.push_back(support[s]);
          kept_coords.push_back(nc);
        }
      }
      xbar = xbar + alpha * (fit.projection - xbar);
      if (kept_support.empty()) {
        const double cl = std::max(0.0, score[l]) / norm2[l];
        support.assign(1, l);
        coords.assign(1, cl);
        xbar = cl * edges.col(l);
        break;
      }
      support = std::move(kept_support);
      coords = std::move(kept_coords);
    }

    const double dist2_after = wdot(cx.w, u - xbar, u - xbar);
    if (dist2_after > dist2_before + 1e-9 * (1.0 + dist2_before)) {
      throw SolverInternalError(
          "distance to the target increased during a reduction step");
    }
  }
  throw SolverInternalError("nearest-point search exceeded its pass cap");
}

}  // namespace

SolverTrace critical_index_solve(const Signal& signal, const ConeSystem& cone,
                                 const IterControl& ctl) {
  const int m = cone.m;
  TraceRecorder rec(signal, cone, ctl);

  const Eigen::VectorXd v = affine_component(cone, signal.y);
  const Eigen::VectorXd u = signal.y - v;

  Eigen::MatrixXd edges = cone.gamma.leftCols(m);
  std::vector<int> ids(m);
  for (int j = 0; j < m; ++j) ids[j] = j;

  NppContext cx{cone.weights, rec};
  cx.edge_count = m;
  const Eigen::VectorXd p = npp_solve(cx, edges, ids, u, 0);

  Eigen::VectorXd x_hat;
  Eigen::VectorXd lam_hat;
  bool converged = false;
  ActiveSet saturated;
  if (!cx.exhausted) {
    std::set<int> sat(cx.critical.begin(), cx.critical.end());
    sat.insert(cx.terminal_support.begin(), cx.terminal_support.end());
    saturated.assign(sat.begin(), sat.end());
    const EqualityProjection pol = project_equality(signal, cone, saturated);
    const Eigen::VectorXd direct = signal.y - p;
    if ((pol.x - direct).cwiseAbs().maxCoeff() >
        1e-7 * (1.0 + direct.cwiseAbs().maxCoeff())) {
      throw SolverInternalError(
          "deflation reconstruction and equality projection disagree");
    }
    x_hat = pol.x;
    lam_hat = scatter_multipliers(m, saturated, pol.lambda);
    converged = true;
  } else {
    x_hat = signal.y - p;
    lam_hat = cone.multipliers_from_residual(signal.y - x_hat);
  }

  const long iters = std::max<long>(1, cx.deflations + cx.reductions);
  SolverTrace trace = rec.finish(iters, x_hat, lam_hat, converged);
  trace.iterations = iters;
  for (int j = 0; j < m; ++j) {
    if (std::find(saturated.begin(), saturated.end(), j) == saturated.end()) {
      trace.hinges.push_back(j);
    }
  }
  trace.stats["deflations"] = static_cast<double>(cx.deflations);
  trace.stats["reductions"] = static_cast<double>(cx.reductions);
  trace.stats["max_depth"] = static_cast<double>(cx.max_depth);
  return trace;
}

// ---------------------------------------------------------------------------
// Block active set
// ---------------------------------------------------------------------------

namespace {

// Weighted least squares fit of a continuous piecewise-linear curve over the
// given breakpoint indices (endpoints always included). Unknowns are the
// values at the breakpoints; the hat-basis normal equations are tridiagonal
// and positive definite for positive weights.
Eigen::VectorXd piecewise_linear_fit(const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& w,
                                     const std::vector<int>& breaks) {
  const int k = static_cast<int>(breaks.size());
  Eigen::MatrixXd bands = Eigen::MatrixXd::Zero(k, 2);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  for (int j = 0; j < k; ++j) {
    bands(j, 0) += w[breaks[j]];
    rhs[j] += w[breaks[j]] * y[breaks[j]];
  }
  for (int j = 0; j + 1 < k; ++j) {
    const int a = breaks[j];
    const int b = breaks[j + 1];
    const double len = static_cast<double>(b - a);
    for (int t = a + 1; t < b; ++t) {
      const double v = static_cast<double>(t - a) / len;
      const double u = 1.0 - v;
      bands(j, 0) += w[t] * u * u;
      bands(j + 1, 0) += w[t] * v * v;
      bands(j, 1) += w[t] * u * v;
      rhs[j] += w[t] * u * y[t];
      rhs[j + 1] += w[t] * v * y[t];
    }
  }
  std::optional<BandedSpdSolver> chol;
  try {
    chol.emplace(bands, 1);
  } catch (const Error&) {
    std::string msg = "singular block system for partition";
    for (int j = 0; j + 1 < k; ++j) {
      msg += (j == 0 ? " " : " | ") + std::to_string(breaks[j]) + ".." +
             std::to_string(breaks[j + 1]);
    }
    throw SolverInternalError(msg);
  }
  Eigen::VectorXd theta = chol->solve(rhs);

  // The multiplier recurrence downstream differentiates this fit twice, so
  // any residual left in the normal equations surfaces there amplified; one
  // corrector solve pushes it to the rounding floor.
  Eigen::VectorXd resid(k);
  for (int j = 0; j < k; ++j) {
    double v = bands(j, 0) * theta[j];
    if (j + 1 < k) v += bands(j, 1) * theta[j + 1];
    if (j > 0) v += bands(j - 1, 1) * theta[j - 1];
    resid[j] = rhs[j] - v;
  }
  theta += chol->solve(resid);

  Eigen::VectorXd x(y.size());
  for (int j = 0; j + 1 < k; ++j) {
    const int a = breaks[j];
    const int b = breaks[j + 1];
    const double len = static_cast<double>(b - a);
    x[a] = theta[j];
    for (int t = a + 1; t < b; ++t) {
      const double v = static_cast<double>(t - a) / len;
      x[t] = (1.0 - v) * theta[j] + v * theta[j + 1];
    }
  }
  x[breaks.back()] = theta[k - 1];
  return x;
}

}  // namespace

SolverTrace block_active_set_solve(const Signal& signal,
                                   const ConeSystem& cone,
                                   const IterControl& ctl,
                                   const BlockOptions& opts) {
  if (!signal.uniform_spacing()) {
    throw InvalidInput(
        "block active-set solver requires uniformly spaced abscissae");
  }
  const int n = cone.n;
  const int m = cone.m;
  const Eigen::VectorXd& w = signal.w;
  const Eigen::VectorXd& y = signal.y;
  TraceRecorder rec(signal, cone, ctl);

  // With uniform spacing every constraint row is band_scale * (1, -2, 1);
  // multiplier recovery works in units of band_scale.
  const double band_scale = cone.band(0, 0);

  // Closing constraint s welds the triple (s, s+1, s+2) onto one line; the
  // blocks of a working set are the maximal welded runs, and consecutive
  // blocks share the breakpoint at each open constraint. The
  // equality-constrained fit for any working set is therefore a continuous
  // piecewise-linear regression with breakpoints s+1 for every open s.
  std::vector<char> closed(m, 1);
  if (opts.saturated_init) {
    check_constraint_indices(*opts.saturated_init, m, "block saturated_init");
    std::fill(closed.begin(), closed.end(), 0);
    for (int j : *opts.saturated_init) closed[j] = 1;
  }

  const double primal_tol =
      1e-9 * (1.0 + cone.apply(y).cwiseAbs().maxCoeff());

  auto sse = [&](const Eigen::VectorXd& x) {
    return ((y - x).array().square() * w.array()).sum();
  };

  // Every iterate lives in a fit space containing all affine sequences, so
  // the weighted residual must annihilate the constant and the index ramp.
  double scale0 = 1.0;
  double scale1 = 1.0;
  for (int i = 0; i < n; ++i) {
    scale0 += std::abs(w[i] * y[i]);
    scale1 += static_cast<double>(i) * std::abs(w[i] * y[i]);
  }
  auto verify_aggregates = [&](const Eigen::VectorXd& x) {
    double s0 = 0.0;
    double s1 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = w[i] * (y[i] - x[i]);
      s0 += r;
      s1 += static_cast<double>(i) * r;
    }
    if (std::abs(s0) > 1e-9 * scale0 || std::abs(s1) > 1e-9 * scale1) {
      throw SolverInternalError(
          "aggregate residual identities violated at a block iterate");
    }
  };

  // The weighted affine fit lies in every working set's equality space and
  // is feasible outright, so the walk can start from it regardless of the
  // initial working set.
  Eigen::VectorXd x_cur = piecewise_linear_fit(y, w, {0, n - 1});
  double f_cur = sse(x_cur);

  Eigen::VectorXd lam = Eigen::VectorXd::Zero(m);
  bool converged = false;
  long merges = 0;
  long splits = 0;
  long iter = 0;
  const long cap = 100L * n + 1000;
  std::vector<int> breaks;

  while (iter < cap) {
    ++iter;
    breaks.clear();
    breaks.push_back(0);
    for (int s = 0; s < m; ++s) {
      if (!closed[s]) breaks.push_back(s + 1);
    }
    breaks.push_back(n - 1);
    const Eigen::VectorXd x_fit = piecewise_linear_fit(y, w, breaks);

    double worst = primal_tol;
    int worst_s = -1;
    for (int s = 0; s < m; ++s) {
      if (closed[s]) continue;
      const double v = cone.row_dot(s, x_fit);
      if (v > worst) {
        worst = v;
        worst_s = s;
      }
    }

    if (worst_s >= 0) {
      // The fit leaves the cone: step from the current point toward it until
      // the first open constraint blocks, then weld that one shut.
      double alpha = 1.0;
      int blocker = worst_s;
      for (int s = 0; s < m; ++s) {
        if (closed[s]) continue;
        const double at_fit = cone.row_dot(s, x_fit);
        if (at_fit <= primal_tol) continue;
        const double at_cur = std::min(0.0, cone.row_dot(s, x_cur));
        const double a = -at_cur / (at_fit - at_cur);
        if (a < alpha - 1e-15) {
          alpha = a;
          blocker = s;
        }
      }
      x_cur += alpha * (x_fit - x_cur);
      verify_aggregates(x_cur);
      closed[blocker] = 1;
      ++merges;
      const double f_new = sse(x_cur);
      if (f_new > f_cur + 1e-9 * (1.0 + f_cur)) {
        throw SolverInternalError("merge step increased the misfit");
      }
      f_cur = f_new;
    } else {
      x_cur = x_fit;
      f_cur = sse(x_cur);
      verify_aggregates(x_cur);

      // lambda_s / band_scale telescopes to the double prefix sum of the
      // weighted residual; both stages are compensated because the partial
      // sums can dwarf the small multipliers near run boundaries.
      KahanSum c0;
      KahanSum dd;
      Eigen::VectorXd raw(m);
      double lam_scale = 0.0;
      for (int s = 0; s < m; ++s) {
        c0.add(w[s] * (y[s] - x_cur[s]));
        dd.add(c0.total);
        raw[s] = dd.total / band_scale;
        lam_scale = std::max(lam_scale, std::abs(raw[s]));
      }

      // Open constraints carry structural zeros; the recurrence must agree.
      double leak = 0.0;
      lam.setZero();
      for (int s = 0; s < m; ++s) {
        if (closed[s]) {
          lam[s] = raw[s];
        } else {
          leak = std::max(leak, std::abs(raw[s]));
        }
      }
      if (leak > 1e-6 * (1.0 + lam_scale)) {
        throw SolverInternalError(
            "multiplier recurrence inconsistent with the working set");
      }

      const double dual_tol = 1e-9 * (1.0 + lam_scale);
      double lam_min = -dual_tol;
      int drop = -1;
      for (int s = 0; s < m; ++s) {
        if (closed[s] && lam[s] < lam_min) {
          lam_min = lam[s];
          drop = s;
        }
      }
      if (drop < 0) {
        // The recurrence threshold scales with the largest multiplier, so on
        // long runs it can wave through a slightly suboptimal working set.
        // Settle the endgame with the equality projection, whose multipliers
        // are accurate near zero, and drop on a strict absolute test.
        ActiveSet saturated;
        for (int s = 0; s < m; ++s) {
          if (closed[s]) saturated.push_back(s);
        }
        const EqualityProjection pol =
            project_equality(signal, cone, saturated);
        if ((pol.x - x_cur).cwiseAbs().maxCoeff() >
            1e-7 * (1.0 + x_cur.cwiseAbs().maxCoeff())) {
          throw SolverInternalError(
              "working-set fit and equality projection disagree");
        }
        int strict_drop = -1;
        double strict_min = -5e-9;
        for (int k2 = 0; k2 < static_cast<int>(saturated.size()); ++k2) {
          if (pol.lambda[k2] < strict_min) {
            strict_min = pol.lambda[k2];
            strict_drop = saturated[k2];
          }
        }
        if (strict_drop >= 0) {
          closed[strict_drop] = 0;
          ++splits;
        } else {
          x_cur = pol.x;
          lam = scatter_multipliers(m, saturated, pol.lambda);
          converged = true;
          break;
        }
      } else {
        closed[drop] = 0;
        ++splits;
      }
    }

    if (rec.due(iter)) {
      const Eigen::VectorXd lam_ls =
          cone.multipliers_from_residual(y - x_cur);
      const TraceRecorder::Decision d = rec.sample(iter, x_cur, lam_ls);
      if (d == TraceRecorder::Decision::kConverged) {
        lam = lam_ls;
        converged = true;
        break;
      }
      if (d == TraceRecorder::Decision::kExhausted) break;
    } else if (rec.over_budget()) {
      break;
    }
  }

  if (!converged) {
    if (iter >= cap) {
      throw SolverInternalError("working-set walk failed to terminate");
    }
    lam = cone.multipliers_from_residual(y - x_cur);
  }

  const long pieces =
      1 + std::count(closed.begin(), closed.end(), static_cast<char>(0));
  SolverTrace trace = rec.finish(iter, x_cur, lam, converged);
  trace.iterations = iter;
  for (int s = 0; s < m; ++s) {
    if (!closed[s]) trace.hinges.push_back(s);
  }
  trace.stats["blocks"] = static_cast<double>(pieces);
  trace.stats["merges"] = static_cast<double>(merges);
  trace.stats["splits"] = static_cast<double>(splits);
  trace.stats["system_size"] = static_cast<double>(3 * pieces - 1);
  return trace;
}

}  // namespace conereg
