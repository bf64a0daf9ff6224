#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>

#include <conereg/registry.hpp>

using Catch::Matchers::ContainsSubstring;

namespace {

struct CliRun {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

CliRun run_cli(const std::string& args) {
  const std::string capture = temp_path("conereg_cli_capture.txt");
  const std::string cmd =
      std::string(CONEREG_CLI_PATH) + " " + args + " > " + capture + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun run;
  if (WIFEXITED(status)) run.exit_code = WEXITSTATUS(status);
  std::ifstream in(capture);
  std::ostringstream buf;
  buf << in.rdbuf();
  run.output = buf.str();
  return run;
}

std::string write_kink_dataset() {
  const std::string path = temp_path("conereg_cli_kink.csv");
  std::ofstream out(path);
  out << "z,y\n1,0\n2,-1\n3,0\n";
  return path;
}

}  // namespace

TEST_CASE("help lists every solver id", "[cli]") {
  const CliRun run = run_cli("--help");
  CHECK(run.exit_code == 0);
  for (const std::string& id : conereg::solver_ids()) {
    CHECK_THAT(run.output, ContainsSubstring(id));
  }
  CHECK_THAT(run.output, ContainsSubstring("Exit codes"));
}

TEST_CASE("solve fits a small dataset", "[cli]") {
  const std::string data = write_kink_dataset();
  const CliRun run = run_cli("solve -i " + data);
  CHECK(run.exit_code == 0);
  CHECK_THAT(run.output, ContainsSubstring("x_hat"));
  CHECK_THAT(run.output, ContainsSubstring("-0.333333"));
  CHECK_THAT(run.output, ContainsSubstring("# status: converged"));

  const CliRun json = run_cli("solve -i " + data + " --format json");
  CHECK(json.exit_code == 0);
  CHECK_THAT(json.output, ContainsSubstring("\"certificate\""));
}

TEST_CASE("solve reports an unconverged stop distinctly", "[cli]") {
  const std::string data = write_kink_dataset();
  const CliRun run =
      run_cli("solve -i " + data + " --solver hildreth --max-iter 0");
  CHECK(run.exit_code == 2);
  CHECK_THAT(run.output, ContainsSubstring("not-converged"));
}

TEST_CASE("solve rejects bad usage with diagnostics", "[cli]") {
  const std::string data = write_kink_dataset();

  const CliRun unknown = run_cli("solve -i " + data + " --solver warp");
  CHECK(unknown.exit_code == 1);
  CHECK_THAT(unknown.output, ContainsSubstring("valid ids"));
  CHECK_THAT(unknown.output, ContainsSubstring("mpdb"));

  const CliRun missing =
      run_cli("solve -i " + temp_path("conereg_cli_absent.csv"));
  CHECK(missing.exit_code == 1);

  const std::string bad = temp_path("conereg_cli_bad.csv");
  {
    std::ofstream out(bad);
    out << "z,y\n1,0\n2,oops\n3,0\n";
  }
  const CliRun malformed = run_cli("solve -i " + bad);
  CHECK(malformed.exit_code == 1);
  CHECK_THAT(malformed.output, ContainsSubstring(":3:"));
}

TEST_CASE("validate checks solvers against the oracle", "[cli]") {
  const CliRun ok = run_cli("validate --trials 3");
  CHECK(ok.exit_code == 0);
  CHECK_THAT(ok.output, ContainsSubstring("validated 3 trials"));

  const CliRun faulty = run_cli("validate --trials 3 --inject-fault mpdb");
  CHECK(faulty.exit_code == 4);
  CHECK_THAT(faulty.output,
             ContainsSubstring("validation failure: solver mpdb"));
}

TEST_CASE("benchmark writes records and a summary", "[cli]") {
  const CliRun unwritable = run_cli("benchmark -o /dev/null/sub");
  CHECK(unwritable.exit_code == 1);

  const std::string dir = temp_path("conereg_cli_bench");
  std::filesystem::remove_all(dir);
  const CliRun run = run_cli(
      "benchmark --families S2 --sizes 12 --sigmas 0.3 --seeds 1 "
      "--solvers mpdb,admm --budgets 0.5 -j 2 -o " +
      dir);
  CHECK(run.exit_code == 0);
  CHECK_THAT(run.output, ContainsSubstring("cells: 2 total, 2 completed"));

  std::ifstream records(dir + "/records.csv");
  REQUIRE(records.good());
  std::string header;
  REQUIRE(std::getline(records, header));
  CHECK(header ==
        "solver,family,n,sigma,seed,budget_s,cpu_s,l2_distance,kkt_primal,"
        "kkt_dual,kkt_comp,status");
  CHECK(std::filesystem::exists(dir + "/summary.csv"));
  std::filesystem::remove_all(dir);
}
