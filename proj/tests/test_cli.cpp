// End-to-end checks of the command-line binary: exit codes, artifact
// contents, and rerun determinism.  The binary path comes from BRW_CLI_BIN
// (set by the test harness); when absent, the build-tree locations are
// tried so the suite also runs standalone from the build directory.
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;

std::string cli_path() {
  if (const char* env = std::getenv("BRW_CLI_BIN")) {
    return env;
  }
  for (const char* candidate : {"./brw_cli", "build/brw_cli", "../build/brw_cli"}) {
    if (fs::exists(candidate)) {
      return fs::absolute(candidate).string();
    }
  }
  return {};
}

// Fresh scratch directory per test case; the previous run's leftovers are
// discarded so stale artifacts can never satisfy a check.
fs::path work_dir(const std::string& label) {
  const fs::path dir = fs::temp_directory_path() / ("brw_cli_" + label);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& arguments, const fs::path& log) {
  const std::string command =
      cli_path() + " " + arguments + " >" + log.string() + " 2>&1";
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "missing file: " << path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

const char* kPgLaw =
    R"json({"variant": "poisson_gaussian", "m": 1.6487212707001282, "mu": 1.0, "s0sq": 1.0})json";
const char* kTwinsLaw =
    R"json({"variant": "finite_support", "outcomes": [{"prob": 1.0, "displacements": ["log(2)", "log(2)"]}]})json";

}  // namespace

TEST_CASE("the binary is reachable") {
  REQUIRE_MESSAGE(!cli_path().empty(),
                  "brw_cli not found; set BRW_CLI_BIN or run from the build tree");
}

TEST_CASE("constants artifact carries the critical slope and growth factor") {
  const auto dir = work_dir("constants");
  const int rc = run_cli("constants --sigma-sq 1 --a 6 --out " + dir.string(),
                         dir / "log.txt");
  CHECK(rc == 0);
  const std::string csv = slurp(dir / "constants.csv");
  CHECK(csv.find("sigma_sq,a,a_c,b_small,b_a,E_min") != std::string::npos);
  CHECK(csv.find("4.6405015894202") != std::string::npos);
  CHECK(csv.find("5.5128827724881") != std::string::npos);
  CHECK(csv.find(",36") != std::string::npos);
  const std::string manifest = slurp(dir / "manifest.json");
  CHECK(manifest.find("\"manifest_hash\"") != std::string::npos);
  // The CSV cross-references the manifest by hash.
  const auto line_end = csv.find('\n');
  const std::string stamp = csv.substr(0, line_end);
  CHECK(stamp.rfind("# manifest=", 0) == 0);
  CHECK(manifest.find(stamp.substr(11)) != std::string::npos);
}

TEST_CASE("a malformed barrier string exits with the config code naming the field") {
  const auto dir = work_dir("badbarrier");
  const int rc =
      run_cli("classify --sigma-sq 1 --barrier pow: --out " + dir.string(),
              dir / "log.txt");
  CHECK(rc == 1);
  const std::string log = slurp(dir / "log.txt");
  CHECK(log.find("pow") != std::string::npos);
  CHECK(log.find("slope") != std::string::npos);
}

TEST_CASE("the flat-start profile run classifies as blowing down") {
  const auto dir = work_dir("ode");
  const int rc = run_cli("ode --a 0 --sigma-sq 1 --s 1 --out " + dir.string(),
                         dir / "log.txt");
  CHECK(rc == 0);
  const std::string payload = slurp(dir / "ode_classification.json");
  CHECK(payload.find("BlowsDown") != std::string::npos);
  CHECK(payload.find("0.0675474557616") != std::string::npos);
  const std::string csv = slurp(dir / "ode_solution.csv");
  CHECK(csv.find("t,f") != std::string::npos);
}

TEST_CASE("exit codes separate configuration, domain, and numerical failures") {
  const auto dir = work_dir("exitcodes");
  write_file(dir / "pg.json", kPgLaw);

  CHECK(run_cli("census --law-config " + (dir / "pg.json").string() +
                    " --a 4 --out " + dir.string(),
                dir / "domain.txt") == 2);
  CHECK(run_cli("simulate --law-config " + (dir / "pg.json").string() +
                    " --barrier pow:0 --n 64 --runs 200 --out " + dir.string(),
                dir / "numerical.txt") == 3);
  CHECK(run_cli("no-such-command", dir / "parse.txt") == 1);
  CHECK(run_cli("simulate --law-config " + (dir / "pg.json").string() +
                    " --n 16 --runs 200 --out " + dir.string(),
                dir / "nobarrier.txt") == 1);
  CHECK(slurp(dir / "numerical.txt").find("splitting") != std::string::npos);
}

TEST_CASE("equal-seed reruns produce byte-identical artifacts") {
  const auto dir = work_dir("rerun");
  write_file(dir / "pg.json", kPgLaw);
  const std::string common = "simulate --law-config " + (dir / "pg.json").string() +
                             " --barrier pow:4.5 --barrier pow:5 --n 16 --runs 400 "
                             "--seed 99 --out ";
  REQUIRE(run_cli(common + (dir / "one").string(), dir / "log1.txt") == 0);
  REQUIRE(run_cli(common + (dir / "two").string(), dir / "log2.txt") == 0);
  CHECK(slurp(dir / "one/survival.csv") == slurp(dir / "two/survival.csv"));

  const std::string census = "census --law-config " + (dir / "pg.json").string() +
                             " --a 6 --growth 4 --k-max 1 --runs 12 --seed 7 --out ";
  REQUIRE(run_cli(census + (dir / "c1").string(), dir / "log3.txt") == 0);
  REQUIRE(run_cli(census + (dir / "c2").string(), dir / "log4.txt") == 0);
  CHECK(slurp(dir / "c1/census.csv") == slurp(dir / "c2/census.csv"));
}

TEST_CASE("worker count changes bookkeeping but never the estimates") {
  const auto dir = work_dir("workers");
  write_file(dir / "pg.json", kPgLaw);
  const std::string common = "simulate --law-config " + (dir / "pg.json").string() +
                             " --barrier pow:4.5 --n 16 --runs 400 --seed 31 ";
  REQUIRE(run_cli(common + "--workers 1 --out " + (dir / "w1").string(),
                  dir / "log1.txt") == 0);
  REQUIRE(run_cli(common + "--workers 3 --out " + (dir / "w3").string(),
                  dir / "log2.txt") == 0);
  const auto data_rows = [](const std::string& csv) {
    return csv.substr(csv.find('\n') + 1);
  };
  CHECK(data_rows(slurp(dir / "w1/survival.csv")) ==
        data_rows(slurp(dir / "w3/survival.csv")));
}

TEST_CASE("config file values fill in and explicit flags override them") {
  const auto dir = work_dir("config");
  const std::string cfg = std::string(R"json({
  "seed": 11,
  "law": )json") + kPgLaw + R"json(,
  "barrier": "pow:4.5",
  "sim": {"n": [16], "runs": 300}
})json";
  write_file(dir / "cfg.json", cfg);

  REQUIRE(run_cli("simulate --config " + (dir / "cfg.json").string() + " --out " +
                      (dir / "base").string(),
                  dir / "log1.txt") == 0);
  const std::string base = slurp(dir / "base/manifest.json");
  CHECK(base.find("\"runs\": 300") != std::string::npos);
  CHECK(base.find("\"seed\": 11") != std::string::npos);

  REQUIRE(run_cli("simulate --config " + (dir / "cfg.json").string() +
                      " --runs 200 --seed 5 --out " + (dir / "over").string(),
                  dir / "log2.txt") == 0);
  const std::string over = slurp(dir / "over/manifest.json");
  CHECK(over.find("\"runs\": 200") != std::string::npos);
  CHECK(over.find("\"seed\": 5") != std::string::npos);

  write_file(dir / "bad.json", R"json({"seed": 1, "simulation": {}})json");
  CHECK(run_cli("simulate --config " + (dir / "bad.json").string() + " --out " +
                    (dir / "bad").string(),
                dir / "log3.txt") == 1);
  CHECK(slurp(dir / "log3.txt").find("simulation") != std::string::npos);
}

TEST_CASE("the environment seed is the default and flags beat it") {
  const auto dir = work_dir("envseed");
  write_file(dir / "pg.json", kPgLaw);
  const std::string tail = " --law-config " + (dir / "pg.json").string() +
                           " --barrier pow:4.5 --n 8 --runs 200 --out ";
  // std::system runs through the shell, so the variable prefix applies.
  const std::string env_cmd = "BRW_SEED=777 " + cli_path() + " simulate" + tail +
                              (dir / "env").string() + " >" +
                              (dir / "log1.txt").string() + " 2>&1";
  REQUIRE(std::system(env_cmd.c_str()) == 0);
  CHECK(slurp(dir / "env/manifest.json").find("\"seed\": 777") != std::string::npos);

  const std::string both_cmd = "BRW_SEED=777 " + cli_path() + " simulate" + tail +
                               (dir / "flag").string() + " --seed 5 >" +
                               (dir / "log2.txt").string() + " 2>&1";
  REQUIRE(std::system(both_cmd.c_str()) == 0);
  CHECK(slurp(dir / "flag/manifest.json").find("\"seed\": 5") != std::string::npos);
}

TEST_CASE("the identity check reports exact agreement for a twin law") {
  const auto dir = work_dir("m2o");
  write_file(dir / "twins.json", kTwinsLaw);
  const int rc = run_cli("check-m2o --law-config " + (dir / "twins.json").string() +
                             " --n 3 --functional one --out " + dir.string(),
                         dir / "log.txt");
  CHECK(rc == 0);
  const auto payload = nlohmann::json::parse(slurp(dir / "m2o.json"));
  CHECK(payload.at("max_abs_diff").get<double>() <= 1e-12);
  CHECK(payload.at("rows").size() == 1);
}

TEST_CASE("tube subcommand agrees with its exact oracle") {
  const auto dir = work_dir("tube");
  REQUIRE(run_cli("tube --atoms -1:0.5,1:0.5 --j 2 --exact --band -3:3 --out " +
                      (dir / "exact").string(),
                  dir / "log1.txt") == 0);
  // Two fair +-1 steps confined to |S| <= 3 scaled by 2^{1/3}: the constant
  // corridor at 2^{1/3} * 1.3 kills |S_i| >= 2, leaving probability 1/2.
  REQUIRE(run_cli("tube --atoms -1:0.5,1:0.5 --j 2 --lower const:-1.2 "
                  "--upper const:1.2 --runs 4000 --seed 3 --out " +
                      (dir / "mc").string(),
                  dir / "log2.txt") == 0);
  const auto exact = nlohmann::json::parse(slurp(dir / "exact/tube.json"));
  const auto mc = nlohmann::json::parse(slurp(dir / "mc/tube.json"));
  CHECK(exact.at("method") == "exact");
  CHECK(exact.at("estimate").get<double>() == 1.0);
  CHECK(exact.at("stderr").get<double>() == 0.0);
  CHECK(mc.at("method") == "mc");
  // 1.2 * 2^{1/3} = 1.512 bounds |S_i| by 1, so the corridor keeps exactly
  // the runs whose second step returns to 0.
  CHECK(mc.at("estimate").get<double>() == doctest::Approx(0.5).epsilon(0.1));
  CHECK(mc.at("stderr").get<double>() > 0.0);
}

TEST_CASE("the reduction subcommand emits the tilt point") {
  const auto dir = work_dir("reduce");
  write_file(dir / "twins.json", kTwinsLaw);
  const int rc = run_cli("reduce --law-config " + (dir / "twins.json").string() +
                             " --out " + dir.string(),
                         dir / "log.txt");
  CHECK(rc == 0);
  const std::string payload = slurp(dir / "reduce.json");
  CHECK(payload.find("\"case_tag\"") != std::string::npos);
  CHECK(payload.find("\"t_star\"") != std::string::npos);
  CHECK(payload.find("\"tilted_law\"") != std::string::npos);
}
