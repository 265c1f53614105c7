#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

const char* kScenario = R"({
  "chain": {"rates": [1, 2], "kernel": [[0, 1], [1, 0]]},
  "field": {"id": "linear", "a": [3, -3]},
  "epsilon": [0.1, 0.01],
  "paths": 120,
  "seed": 31
})";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("swavg_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run(const std::string& args) {
  const std::string cmd = std::string(SWAVG_CLI_PATH) + " " + args + " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("deviation study writes results and a reusable manifest") {
  TempDir tmp;
  const auto scen = tmp.path / "scen.json";
  std::ofstream(scen) << kScenario;

  const auto out1 = (tmp.path / "run1").string();
  CHECK(run("deviation-study -s " + scen.string() + " -o " + out1 + " --threads 3") == 0);
  CHECK(fs::exists(fs::path(out1) / "results.csv"));
  CHECK(fs::exists(fs::path(out1) / "manifest"));
  const std::string results = slurp(fs::path(out1) / "results.csv");
  CHECK(results.find("median_dev") != std::string::npos);
  CHECK(results.find("certified") == std::string::npos);

  // byte-identical when re-run from the manifest, with a different thread count
  const auto out2 = (tmp.path / "run2").string();
  CHECK(run("deviation-study -s " + (fs::path(out1) / "manifest").string() + " -o " + out2 +
            " --threads 1") == 0);
  CHECK(slurp(fs::path(out2) / "results.csv") == results);
}

TEST_CASE("flag overrides reach the run") {
  TempDir tmp;
  const auto scen = tmp.path / "scen.json";
  std::ofstream(scen) << kScenario;
  const auto out = (tmp.path / "run").string();
  CHECK(run("deviation-study -s " + scen.string() + " -o " + out +
            " --epsilon 0.5 --paths 40") == 0);
  const std::string results = slurp(fs::path(out) / "results.csv");
  CHECK(results.find("0.5,paths,40") != std::string::npos);
  CHECK(results.find("\n0.1,") == std::string::npos);  // no rows for the overridden epsilons
  CHECK(results.find("\n0.01,") == std::string::npos);
}

TEST_CASE("residual-check emits small residuals") {
  TempDir tmp;
  const auto scen = tmp.path / "scen.json";
  std::ofstream(scen) << kScenario;
  const auto out = (tmp.path / "run").string();
  CHECK(run("residual-check -s " + scen.string() + " -o " + out) == 0);
  const std::string results = slurp(fs::path(out) / "results.csv");
  CHECK(results.substr(0, results.find('\n')) == "u,state,lhs,rhs,residual");
  std::istringstream lines(results);
  std::string line;
  std::getline(lines, line);
  int rows = 0;
  while (std::getline(lines, line)) {
    const auto pos = line.rfind(',');
    CHECK(std::stod(line.substr(pos + 1)) <= 1e-10);
    ++rows;
  }
  CHECK(rows == 201 * 2);
}

TEST_CASE("simulate dumps a trajectory") {
  TempDir tmp;
  const auto scen = tmp.path / "scen.json";
  std::ofstream(scen) << kScenario;
  const auto out = (tmp.path / "run").string();
  CHECK(run("simulate -s " + scen.string() + " -o " + out) == 0);
  const std::string traj = slurp(fs::path(out) / "trajectories.csv");
  CHECK(traj.substr(0, traj.find('\n')) == "t,regime,u_1");
  CHECK(slurp(fs::path(out) / "results.csv").find("u_final") != std::string::npos);
}

TEST_CASE("exit codes distinguish failure classes") {
  TempDir tmp;
  const auto out = (tmp.path / "run").string();

  // config: missing file
  CHECK(run("deviation-study -s /nonexistent.json -o " + out) == 2);

  // config: bad scenario content
  const auto bad = tmp.path / "bad.json";
  std::ofstream(bad) << R"({"chain": {"rates": [1, -2], "kernel": [[0,1],[1,0]]},
                            "field": {"id": "linear", "a": [3, -3]}})";
  CHECK(run("deviation-study -s " + bad.string() + " -o " + out) == 2);

  // certification: logistic field started outside its domain
  const auto uncert = tmp.path / "uncert.json";
  std::ofstream(uncert) << R"({"chain": {"rates": [1, 2], "kernel": [[0,1],[1,0]]},
                               "field": {"id": "logistic", "a": [1, 0.5], "k": [2, 3]},
                               "u0": -0.5, "paths": 20, "epsilon": [0.1]})";
  CHECK(run("deviation-study -s " + uncert.string() + " -o " + out) == 3);
  CHECK(run("deviation-study -s " + uncert.string() + " -o " + out + " --allow-uncertified") == 0);
  CHECK(slurp(fs::path(out) / "results.csv").find(",certified,0,") != std::string::npos);

  // unknown subcommand is a usage error
  CHECK(run("no-such-command") == 2);
}
