#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

const char* kCli = BRWX_CLI_PATH;

struct CliResult {
  int exit_code;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  fs::path tmp = fs::temp_directory_path() / "brwx_cli_out.txt";
  std::string cmd = std::string(kCli) + " " + args + " > " + tmp.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  std::ifstream in(tmp);
  std::ostringstream os;
  os << in.rdbuf();
  int code = -1;
  if (WIFEXITED(rc)) code = WEXITSTATUS(rc);
  return {code, os.str()};
}

fs::path write_file(const std::string& name, const std::string& content) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << content;
  return p;
}

}  // namespace

TEST_CASE("model check exit codes", "[cli]") {
  auto cosh2 = run_cli("model make --family cosh --m 2");
  REQUIRE(cosh2.exit_code == 0);
  auto law_path = write_file("cli_cosh2.json", cosh2.out);
  auto check = run_cli("model check --law " + law_path.string());
  CHECK(check.exit_code == 0);
  CHECK(check.out.find("\"pass\": true") != std::string::npos);

  // two children at zero: supercritical but psi(1) = ln 2
  auto bad = write_file("cli_two_zero.json",
                        R"({"form":"explicit-atoms","atoms":[{"prob":1.0,"children":[0.0,0.0]}]})");
  auto r1 = run_cli("model check --law " + bad.string());
  CHECK(r1.exit_code == 1);
  auto j = nlohmann::json::parse(r1.out);
  CHECK(j["psi1"].get<double>() == Catch::Approx(std::log(2.0)).margin(1e-12));

  auto malformed = write_file("cli_broken.json", "{\"form\": ");
  CHECK(run_cli("model check --law " + malformed.string()).exit_code == 2);

  auto bad_key = write_file("cli_badkey.json", R"({"form":"explicit-atoms","atoms":[{"children":[0.0]}]})");
  auto r2 = run_cli("model check --law " + bad_key.string());
  CHECK(r2.exit_code == 2);
  CHECK(r2.out.find("/atoms/0/prob") != std::string::npos);

  CHECK(run_cli("model check").exit_code == 2);  // missing required option
}

TEST_CASE("model calibrate round trip", "[cli]") {
  auto raw = write_file("cli_raw.json",
                        R"({"form":"product","count":{"values":[2],"probs":[1.0]},
                            "displacement":{"values":[-1.0,1.0],"probs":[0.25,0.75]}})");
  fs::path out = fs::temp_directory_path() / "cli_calibrated.json";
  CHECK(run_cli("model calibrate --law " + raw.string() + " --out-law " + out.string()).exit_code == 0);
  CHECK(run_cli("model check --law " + out.string()).exit_code == 0);
}

TEST_CASE("oracle subcommand", "[cli]") {
  auto ok = run_cli("oracle run-all --laws cosh2,bin2");
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("FAIL") == std::string::npos);
  CHECK(ok.out.find("many_to_one_n3") != std::string::npos);

  auto bug = run_cli("oracle run-all --laws cosh2 --inject-bug");
  CHECK(bug.exit_code == 1);
  CHECK(bug.out.find("FAIL") != std::string::npos);

  CHECK(run_cli("oracle run-all --laws \"\"").exit_code == 2);
}

TEST_CASE("experiment driver", "[cli]") {
  fs::path cfg = write_file("cli_tail_cfg.json", R"({
    "model": {"family": "cosh", "m": 2.0},
    "n": 8, "replicas": 2000, "is_replicas": 500,
    "z_values": [2.6339157938496331], "seed": 12345})");
  fs::path out = fs::temp_directory_path() / "cli_tail_out";
  auto r = run_cli("experiment tail --config " + cfg.string() + " --out " + out.string());
  REQUIRE(r.exit_code == 0);
  auto j = nlohmann::json::parse(std::ifstream((out / "summary.json").string()));
  CHECK(j["experiment"] == "tail");
  CHECK(j.contains("config_hash"));
  CHECK(j["seed"] == 12345);

  // seed is mandatory
  fs::path cfg2 = write_file("cli_tail_noseed.json", R"({
    "model": {"family": "cosh", "m": 2.0}, "n": 8, "replicas": 100,
    "z_values": [1.0]})");
  CHECK(run_cli("experiment tail --config " + cfg2.string()).exit_code == 2);

  // tail without z values is a usage error
  fs::path cfg3 = write_file("cli_tail_noz.json",
                             R"({"model": {"family": "cosh", "m": 2.0}, "n": 8, "replicas": 100, "seed": 1})");
  CHECK(run_cli("experiment tail --config " + cfg3.string()).exit_code == 2);

  // conditioned run on an unreachable event reports insufficient samples
  fs::path cfg4 = write_file("cli_cond_deep.json", R"({
    "model": {"family": "cosh", "m": 2.0}, "n": 8, "replicas": 200,
    "z": 40.0, "delta": 0.5, "max_reject_factor": 5, "seed": 1})");
  fs::path out4 = fs::temp_directory_path() / "cli_cond_out";
  auto r4 = run_cli("experiment conditioned --config " + cfg4.string() + " --out " + out4.string());
  CHECK(r4.exit_code == 1);
  CHECK(r4.out.find("fewer than 200 accepted") != std::string::npos);
}

TEST_CASE("walk and excursion subcommands emit csv", "[cli]") {
  auto renewal = run_cli("walk renewal --family cosh --m 2 --levels 2 --kmax 20000");
  REQUIRE(renewal.exit_code == 0);
  CHECK(renewal.out.rfind("#schema=1\n", 0) == 0);
  CHECK(renewal.out.find("x,R,truncation") != std::string::npos);

  auto sample = run_cli("excursion sample --grid 8 --samples 2 --seed 3");
  REQUIRE(sample.exit_code == 0);
  CHECK(sample.out.find("sample,s,value,weight") != std::string::npos);

  auto ident = run_cli("excursion identity --delta 0.5 --samples 2000 --grid 64 --seed 4");
  REQUIRE(ident.exit_code == 0);
  auto j = nlohmann::json::parse(ident.out);
  CHECK(j["lhs"].get<double>() == Catch::Approx(1.2533).margin(0.15));

  auto dump = run_cli("tree dump --family cosh --m 2 --n 3 --seed 5");
  REQUIRE(dump.exit_code == 0);
  CHECK(dump.out.find("generation,index,parent,position") != std::string::npos);
}
