#include "conereg/registry.hpp"

#include "conereg/asymptotic.hpp"
#include "conereg/finite.hpp"
#include "conereg/warmstart.hpp"

namespace conereg {
namespace {

ActiveSet complement_of(const ActiveSet& set, int m) {
  std::vector<char> in(m, 0);
  for (int j : set) in[j] = 1;
  ActiveSet out;
  for (int j = 0; j < m; ++j) {
    if (!in[j]) out.push_back(j);
  }
  return out;
}

std::vector<SolverEntry> build_registry() {
  std::vector<SolverEntry> reg;

  reg.push_back({"hildreth",
                 "cyclic coordinate ascent on the dual (one constraint per "
                 "step)",
                 false, false,
                 [](const Signal& s, const ConeSystem& c, const IterControl& t,
                    const SolverConfig&) { return hildreth_solve(s, c, t); }});

  reg.push_back({"dykstra",
                 "cyclic projections with per-constraint corrections", false,
                 false,
                 [](const Signal& s, const ConeSystem& c, const IterControl& t,
                    const SolverConfig&) { return dykstra_solve(s, c, t); }});

  reg.push_back(
      {"lsps",
       "relaxed simultaneous projections in the constraint product space",
       false, false,
       [](const Signal& s, const ConeSystem& c, const IterControl& t,
          const SolverConfig& cfg) {
         LspsOptions o;
         o.relaxation = cfg.lsps_relaxation;
         o.allow_over_relaxation = cfg.lsps_allow_over_relaxation;
         return lsps_solve(s, c, t, o);
       }});

  reg.push_back({"uzawa",
                 "projected gradient ascent on the dual with a fixed step",
                 false, false,
                 [](const Signal& s, const ConeSystem& c, const IterControl& t,
                    const SolverConfig& cfg) {
                   UzawaOptions o;
                   o.step_size = cfg.uzawa_step;
                   return uzawa_solve(s, c, t, o);
                 }});

  reg.push_back({"admm",
                 "operator splitting with a cached banded factorization",
                 false, false,
                 [](const Signal& s, const ConeSystem& c, const IterControl& t,
                    const SolverConfig& cfg) {
                   AdmmOptions o;
                   o.gamma = cfg.admm_gamma;
                   return admm_solve(s, c, t, o);
                 }});

  reg.push_back({"mpdb", "sector walk from the affine fit", true, false,
                 [](const Signal& s, const ConeSystem& c, const IterControl& t,
                    const SolverConfig&) { return mpdb_solve(s, c, t); }});

  reg.push_back({"mpdb:pav",
                 "sector walk warm-started from the feasibility pass", true,
                 false,
                 [](const Signal& s, const ConeSystem& c, const IterControl& t,
                    const SolverConfig&) {
                   const PavResult pav = pav_warm_start(s, c);
                   MpdbOptions o;
                   o.saturated_init = pav.saturated_estimate;
                   return mpdb_solve(s, c, t, o);
                 }});

  reg.push_back({"meyer:empty", "hinge fitting from the empty hinge set",
                 true, false,
                 [](const Signal& s, const ConeSystem& c, const IterControl& t,
                    const SolverConfig&) { return meyer_solve(s, c, t); }});

  reg.push_back({"meyer:full", "hinge fitting from the full hinge set", true,
                 false,
                 [](const Signal& s, const ConeSystem& c, const IterControl& t,
                    const SolverConfig&) {
                   MeyerOptions o;
                   o.start_full = true;
                   return meyer_solve(s, c, t, o);
                 }});

  reg.push_back({"meyer:pav",
                 "hinge fitting seeded by the feasibility-pass estimate", true,
                 false,
                 [](const Signal& s, const ConeSystem& c, const IterControl& t,
                    const SolverConfig&) {
                   const PavResult pav = pav_warm_start(s, c);
                   MeyerOptions o;
                   o.hinges_init = complement_of(pav.saturated_estimate, c.m);
                   return meyer_solve(s, c, t, o);
                 }});

  reg.push_back({"critical",
                 "nearest-point deflation along critical polar edges", true,
                 false,
                 [](const Signal& s, const ConeSystem& c, const IterControl& t,
                    const SolverConfig&) {
                   return critical_index_solve(s, c, t);
                 }});

  reg.push_back({"block",
                 "active-set iteration over affine blocks (uniform spacing "
                 "only)",
                 true, true,
                 [](const Signal& s, const ConeSystem& c, const IterControl& t,
                    const SolverConfig&) {
                   return block_active_set_solve(s, c, t);
                 }});

  return reg;
}

}  // namespace

const std::vector<SolverEntry>& solver_registry() {
  static const std::vector<SolverEntry> reg = build_registry();
  return reg;
}

const SolverEntry* find_solver(const std::string& id) {
  const std::string key = id == "meyer" ? "meyer:empty" : id;
  for (const auto& entry : solver_registry()) {
    if (entry.id == key) return &entry;
  }
  return nullptr;
}

std::vector<std::string> solver_ids() {
  std::vector<std::string> out;
  for (const auto& entry : solver_registry()) out.push_back(entry.id);
  return out;
}

}  // namespace conereg
