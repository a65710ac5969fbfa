#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "heatctl/config.hpp"
#include "heatctl/runner.hpp"

using namespace heatctl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("heatctl_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json base_config() {
  return json{
      {"problem",
       {{"modes", 16},
        {"omega", {0.3, 0.8}},
        {"e_intervals", {{0.0, 0.4}, {0.6, 1.0}}},
        {"horizon", 1.0},
        {"y0", {{"preset", "decay"}}}}},
      {"solver", {{"steps", 40}, {"margin", 0.02}, {"c2", 0.05}}},
  };
}

}  // namespace

TEST_CASE("config: unknown keys are rejected at every level") {
  json j = base_config();
  CHECK_NOTHROW(parse_config(j));
  json top = j;
  top["bogus"] = 1;
  CHECK_THROWS_AS(parse_config(top), ConfigError);
  json nested = j;
  nested["problem"]["typo_key"] = 1;
  CHECK_THROWS_AS(parse_config(nested), ConfigError);
  json deep = j;
  deep["problem"]["y0"]["presett"] = "decay";
  CHECK_THROWS_AS(parse_config(deep), ConfigError);
}

TEST_CASE("config: validation errors") {
  json j = base_config();
  j["problem"]["modes"] = 0;
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j = base_config();
  j["problem"]["omega"] = {0.8, 0.3};
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j = base_config();
  j["constraint"] = {{"target_kind", "banana"}};
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j = base_config();
  j["sweep"] = {{"axis", "nope"}, {"values", {1.0}}, {"subcommand", "constants"}};
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("config: round-trips through JSON") {
  RunConfig cfg = parse_config(base_config());
  RunConfig again = parse_config(config_to_json(cfg));
  CHECK(again.problem.modes == cfg.problem.modes);
  CHECK(again.solver.steps == cfg.solver.steps);
  CHECK(again.seed == cfg.seed);
  CHECK(config_to_json(cfg) == config_to_json(again));
}

TEST_CASE("runner: summaries carry the schema fields") {
  RunConfig cfg = parse_config(base_config());
  for (const char* sub : {"constants", "null-control"}) {
    RunResult res = run_subcommand(sub, cfg, false);
    REQUIRE(res.exit_code == 0);
    CHECK(res.summary.contains("schema_version"));
    CHECK(res.summary.at("subcommand") == sub);
    CHECK(res.summary.contains("seed"));
    CHECK(res.summary.contains("headline"));
  }
}

TEST_CASE("runner: exit code 4 when the target is out of reach") {
  json j = base_config();
  j["problem"]["horizon"] = 0.001;
  j["problem"]["e_intervals"] = {{0.0, 0.001}};
  j["solver"]["bracket_start"] = 0.001;
  j["constraint"] = {{"radius", 1e-6}, {"target_kind", "point-zero"}};
  RunConfig cfg = parse_config(j);
  RunResult res = run_subcommand("time-optimal", cfg, false);
  CHECK(res.exit_code == kExitNotAdmissible);
  CHECK(!res.reason.empty());
}

TEST_CASE("runner: exit code 3 when the assembler cannot converge") {
  json j = base_config();
  j["solver"]["max_stages"] = 1;
  j["solver"]["stop_tol"] = 1e-300;  // below what free decay can reach
  j["solver"]["grid_steps_per_stage"] = 8;
  RunConfig cfg = parse_config(j);
  RunResult res = run_subcommand("null-control", cfg, false);
  CHECK(res.exit_code == kExitNoConvergence);
}

TEST_CASE("runner: unknown subcommand is a validation error") {
  RunConfig cfg = parse_config(base_config());
  RunResult res = run_subcommand("frobnicate", cfg, false);
  CHECK(res.exit_code == kExitValidation);
}

TEST_CASE("outputs: identical config and seed give bit-identical artifacts") {
  for (int run = 0; run < 2; ++run) {
    json j = base_config();
    fs::path dir = fresh_dir("repro_" + std::to_string(run));
    j["output"] = {{"directory", dir.string()}};
    RunConfig cfg = parse_config(j);
    RunResult res = run_subcommand("null-control", cfg, true);
    REQUIRE(res.exit_code == 0);
  }
  fs::path a = fs::temp_directory_path() / "heatctl_test_repro_0";
  fs::path b = fs::temp_directory_path() / "heatctl_test_repro_1";
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;  // holds the only timestamps
    CAPTURE(name);
    CHECK(slurp(entry.path()) == slurp(b / name));
    ++compared;
  }
  CHECK(compared >= 2);  // at least a JSON summary and a CSV
  CHECK(fs::exists(a / "manifest.json"));
}

TEST_CASE("sweep: ordered rows, one per member, with member exit codes") {
  json j = base_config();
  j["sweep"] = {{"axis", "modes"},
                {"values", {12.0, 8.0, 16.0}},  // deliberately unsorted
                {"subcommand", "null-control"}};
  fs::path dir = fresh_dir("sweep");
  j["output"] = {{"directory", dir.string()}};
  RunConfig cfg = parse_config(j);
  RunResult res = run_subcommand("sweep", cfg, true);
  REQUIRE(res.exit_code == 0);

  std::ifstream csv(dir / "sweep.csv");
  std::string line;
  REQUIRE(std::getline(csv, line));  // header
  CHECK(line.rfind("modes,exit_code", 0) == 0);
  std::vector<double> axis;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    axis.push_back(std::stod(line.substr(0, line.find(','))));
  }
  REQUIRE(axis.size() == 3);
  CHECK(axis[0] == 8.0);
  CHECK(axis[1] == 12.0);
  CHECK(axis[2] == 16.0);
}

TEST_CASE("manifest: records subcommand and seed") {
  json j = base_config();
  fs::path dir = fresh_dir("manifest");
  j["output"] = {{"directory", dir.string()}};
  j["seed"] = 777;
  RunConfig cfg = parse_config(j);
  RunResult res = run_subcommand("constants", cfg, true);
  REQUIRE(res.exit_code == 0);
  json man = json::parse(slurp(dir / "manifest.json"));
  CHECK(man.at("subcommand") == "constants");
  CHECK(man.at("config").at("seed") == 777);
  CHECK(man.contains("files"));
  CHECK(man.contains("started_at"));
}
