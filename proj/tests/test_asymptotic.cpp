#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "conereg/asymptotic.hpp"
#include "conereg/cone_system.hpp"
#include "conereg/errors.hpp"
#include "conereg/signal.hpp"
#include "conereg/warmstart.hpp"

using namespace conereg;
using Catch::Approx;

namespace {

Signal random_signal(std::mt19937_64& eng, int n, bool uniform_z,
                     bool unit_w) {
  Eigen::VectorXd z(n), y(n), w(n);
  std::uniform_real_distribution<double> gap(0.5, 2.0);
  std::uniform_real_distribution<double> wgt(0.5, 2.0);
  std::normal_distribution<double> noise(0.0, 2.0);
  double zc = 0.0;
  for (int i = 0; i < n; ++i) {
    zc += uniform_z ? 1.0 : gap(eng);
    z[i] = zc;
    w[i] = unit_w ? 1.0 : wgt(eng);
    y[i] = noise(eng);
  }
  return Signal(z, y, w);
}

using SolveFn = SolverTrace (*)(const Signal&, const ConeSystem&,
                                const IterControl&);

SolverTrace run_hildreth(const Signal& s, const ConeSystem& c,
                         const IterControl& ctl) {
  return hildreth_solve(s, c, ctl);
}
SolverTrace run_dykstra(const Signal& s, const ConeSystem& c,
                        const IterControl& ctl) {
  return dykstra_solve(s, c, ctl);
}
SolverTrace run_uzawa(const Signal& s, const ConeSystem& c,
                      const IterControl& ctl) {
  return uzawa_solve(s, c, ctl);
}
SolverTrace run_admm(const Signal& s, const ConeSystem& c,
                     const IterControl& ctl) {
  return admm_solve(s, c, ctl);
}

}  // namespace

TEST_CASE("iterative solvers reach the exhaustive optimum", "[asymptotic]") {
  const std::pair<const char*, SolveFn> solvers[] = {
      {"hildreth", run_hildreth},
      {"dykstra", run_dykstra},
      {"uzawa", run_uzawa},
      {"admm", run_admm},
  };
  std::mt19937_64 eng(101);
  std::bernoulli_distribution half(0.5);
  for (int t = 0; t < 8; ++t) {
    const Signal sig = random_signal(eng, 10, half(eng), half(eng));
    const ConeSystem cone = build_cone_system(sig);
    const SolverResult exact = brute_force_project(sig, cone);
    for (const auto& [name, fn] : solvers) {
      IterControl ctl;
      ctl.max_iterations = 100'000;
      ctl.stop_tolerance = 1e-9;
      ctl.trace_stride = 1000;
      const SolverTrace trace = fn(sig, cone, ctl);
      INFO(name << " trial " << t);
      CHECK((trace.result.x_hat - exact.x_hat).lpNorm<Eigen::Infinity>() <
            1e-6);
    }
  }
}

TEST_CASE("dual coordinate descent never increases its objective",
          "[asymptotic]") {
  std::mt19937_64 eng(103);
  const Signal sig = random_signal(eng, 20, false, false);
  const ConeSystem cone = build_cone_system(sig);
  IterControl ctl;
  ctl.max_iterations = 2000;
  ctl.stop_tolerance = 1e-14;
  ctl.trace_stride = 10;
  const SolverTrace trace = hildreth_solve(sig, cone, ctl);
  REQUIRE(trace.samples.size() > 5);
  for (std::size_t s = 1; s < trace.samples.size(); ++s) {
    REQUIRE(trace.samples[s].objective <=
            trace.samples[s - 1].objective + 1e-12);
  }
}

TEST_CASE("coordinate visiting order must be a permutation", "[asymptotic]") {
  std::mt19937_64 eng(105);
  const Signal sig = random_signal(eng, 8, true, true);
  const ConeSystem cone = build_cone_system(sig);
  HildrethOptions opts;
  opts.order = {0, 1, 2, 3, 4, 4};
  CHECK_THROWS_AS(hildreth_solve(sig, cone, {}, opts), InvalidInput);

  opts.order = {5, 4, 3, 2, 1, 0};
  const SolverTrace reversed = hildreth_solve(sig, cone, {}, opts);
  const SolverTrace forward = hildreth_solve(sig, cone, {});
  CHECK((reversed.result.x_hat - forward.result.x_hat)
            .lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("cyclic corrections keep the stationarity identity",
          "[asymptotic]") {
  std::mt19937_64 eng(107);
  const Signal sig = random_signal(eng, 15, false, false);
  const ConeSystem cone = build_cone_system(sig);
  IterControl ctl;
  ctl.max_iterations = 500;
  ctl.stop_tolerance = 1e-14;
  const SolverTrace trace = dykstra_solve(sig, cone, ctl);
  CHECK(trace.result.certificate.stationarity < 1e-10);
}

TEST_CASE("relaxation parameter domain", "[asymptotic]") {
  std::mt19937_64 eng(109);
  const Signal sig = random_signal(eng, 8, true, true);
  const ConeSystem cone = build_cone_system(sig);

  LspsOptions bad;
  bad.relaxation = 0.0;
  CHECK_THROWS_AS(lsps_solve(sig, cone, {}, bad), InvalidInput);
  bad.relaxation = 2.5;
  CHECK_THROWS_AS(lsps_solve(sig, cone, {}, bad), InvalidInput);

  LspsOptions allowed;
  allowed.relaxation = 2.5;
  allowed.allow_over_relaxation = true;
  IterControl ctl;
  ctl.max_iterations = 50;
  CHECK_NOTHROW(lsps_solve(sig, cone, ctl, allowed));
}

TEST_CASE("over-relaxed averaging needs fewer cycles", "[asymptotic]") {
  std::mt19937_64 eng(101);
  std::normal_distribution<double> noise(0.0, 2.0);
  const int n = 10;
  Eigen::VectorXd z(n), y(n);
  for (int i = 0; i < n; ++i) {
    z[i] = i + 1.0;
    y[i] = noise(eng);
  }
  const Signal sig(z, y, Eigen::VectorXd::Ones(n));
  const ConeSystem cone = build_cone_system(sig);
  const SolverResult exact = brute_force_project(sig, cone);

  auto run = [&](double relax) {
    LspsOptions opts;
    opts.relaxation = relax;
    IterControl ctl;
    ctl.max_iterations = 500'000;
    ctl.stop_tolerance = 0.0;
    ctl.reference = exact.x_hat;
    ctl.reference_tolerance = 1e-5;
    return lsps_solve(sig, cone, ctl, opts);
  };

  const SolverTrace plain = run(1.0);
  const SolverTrace pushed = run(1.9);
  REQUIRE(plain.result.converged);
  REQUIRE(pushed.result.converged);
  CHECK((plain.result.x_hat - exact.x_hat).lpNorm<Eigen::Infinity>() < 1e-5);
  CHECK((pushed.result.x_hat - exact.x_hat).lpNorm<Eigen::Infinity>() < 1e-5);
  CHECK(pushed.iterations < plain.iterations);
}

TEST_CASE("dual ascent detects an unstable step size", "[asymptotic]") {
  std::mt19937_64 eng(111);
  const Signal sig = random_signal(eng, 12, true, true);
  const ConeSystem cone = build_cone_system(sig);
  UzawaOptions opts;
  opts.step_size = 1e3;
  IterControl ctl;
  ctl.max_iterations = 10'000;
  CHECK_THROWS_AS(uzawa_solve(sig, cone, ctl, opts), DivergenceError);
}

TEST_CASE("splitting iteration is insensitive to the penalty scale",
          "[asymptotic]") {
  std::mt19937_64 eng(113);
  const Signal sig = random_signal(eng, 12, false, false);
  const ConeSystem cone = build_cone_system(sig);
  IterControl ctl;
  ctl.max_iterations = 200'000;
  ctl.stop_tolerance = 1e-9;
  ctl.trace_stride = 1000;
  AdmmOptions slow, fast;
  slow.gamma = 0.5;
  fast.gamma = 2.0;
  const SolverTrace a = admm_solve(sig, cone, ctl, slow);
  const SolverTrace b = admm_solve(sig, cone, ctl, fast);
  REQUIRE(a.result.converged);
  REQUIRE(b.result.converged);
  CHECK((a.result.x_hat - b.result.x_hat).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("iteration control contract", "[asymptotic]") {
  std::mt19937_64 eng(115);
  const Signal sig = random_signal(eng, 10, false, false);
  const ConeSystem cone = build_cone_system(sig);

  SECTION("zero iterations returns the best-effort start") {
    IterControl ctl;
    ctl.max_iterations = 0;
    const SolverTrace trace = hildreth_solve(sig, cone, ctl);
    CHECK(!trace.result.converged);
    CHECK(trace.iterations == 0);
    CHECK((trace.result.x_hat - sig.y).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  SECTION("sampling lands on the stride") {
    IterControl ctl;
    ctl.max_iterations = 1000;
    ctl.stop_tolerance = 1e-14;
    ctl.trace_stride = 250;
    const SolverTrace trace = admm_solve(sig, cone, ctl);
    REQUIRE(trace.samples.size() >= 3);
    CHECK(trace.samples.front().iteration == 1);
    CHECK(trace.samples[1].iteration == 250);
    CHECK(trace.samples.back().iteration == trace.iterations);
  }

  SECTION("a supplied reference can stop the run early") {
    const SolverResult exact = brute_force_project(sig, cone);
    IterControl tight;
    tight.max_iterations = 200'000;
    tight.stop_tolerance = 1e-10;
    tight.trace_stride = 10;
    const SolverTrace slow = hildreth_solve(sig, cone, tight);

    IterControl with_ref = tight;
    with_ref.reference = exact.x_hat;
    with_ref.reference_tolerance = 1e-3;
    const SolverTrace quick = hildreth_solve(sig, cone, with_ref);
    REQUIRE(quick.result.converged);
    CHECK(quick.iterations < slow.iterations);
    CHECK((quick.result.x_hat - exact.x_hat).norm() <= 1e-3);
  }

  SECTION("an exhausted CPU budget stops the run") {
    IterControl ctl;
    ctl.max_iterations = 100'000'000;
    ctl.stop_tolerance = 0.0;
    ctl.cpu_budget_seconds = 0.05;
    const SolverTrace trace = dykstra_solve(sig, cone, ctl);
    CHECK(!trace.result.converged);
    CHECK(trace.iterations < 100'000'000);
  }
}
