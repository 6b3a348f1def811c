#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "spdl/cli.hpp"

using namespace spdl;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "spdl");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);)
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  return rows;
}

const std::vector<std::string> kShort{"--set", "simulation.warmup=20", "--set", "simulation.duration=80"};

}  // namespace

TEST_CASE("sweep ranges include the upper end") {
  const auto s = parse_sweep("demand_factor=0.5:4.5:0.5");
  CHECK(s.axis == SweepAxis::DemandFactor);
  REQUIRE(s.values.size() == 9u);
  CHECK(s.values.front() == 0.5);
  CHECK(s.values.back() == doctest::Approx(4.5));
  const auto l = parse_sweep("cav_penetration=0.2,0.8");
  CHECK(l.values == std::vector<double>{0.2, 0.8});
  CHECK_THROWS_AS(parse_sweep("bogus=1:2:1"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("demand_factor=2:1:0.5"), ConfigError);
}

TEST_CASE("seed lists") {
  CHECK(parse_seeds("1..5") == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
  CHECK(parse_seeds("3,9") == std::vector<std::uint64_t>{3, 9});
  CHECK(parse_seeds("7") == std::vector<std::uint64_t>{7});
  CHECK_THROWS_AS(parse_seeds("5..1"), ConfigError);
}

TEST_CASE("a two-controller sweep over five seeds expands to 90 cells") {
  RunRequest req;
  req.controllers = parse_controllers("SPDL,BP");
  req.seeds = parse_seeds("1..5");
  req.sweep = parse_sweep("demand_factor=0.5:4.5:0.5");
  const auto cells = expand_cells(req);
  REQUIRE(cells.size() == 90u);
  CHECK(cells[0].controller == Controller::SPDL);
  CHECK(cells[5].controller == Controller::BP);
  CHECK(cells[10].axis_value == doctest::Approx(1.0));
  CHECK(cells[10].cfg.demand.demand_factor == doctest::Approx(1.0));
  CHECK(cells[4].seed == 5u);
}

TEST_CASE("left-turn share keeps the right share") {
  ExperimentConfig cfg;
  apply_axis(cfg, SweepAxis::LeftTurnShare, 0.25);
  CHECK(cfg.demand.right_share == doctest::Approx(0.2));
  CHECK(cfg.demand.left_share == doctest::Approx(0.2));
  CHECK(cfg.demand.through_share == doctest::Approx(0.6));
}

TEST_CASE("a short run prints a header and one row") {
  auto args = std::vector<std::string>{"run", "--seed", "1"};
  args.insert(args.end(), kShort.begin(), kShort.end());
  const auto r = cli(args);
  REQUIRE(r.code == 0);
  const auto rows = data_lines(r.out);
  REQUIRE(rows.size() == 2u);
  CHECK(rows[0].rfind("seed,controller", 0) == 0);
  CHECK(r.out.rfind("# ", 0) == 0);
}

TEST_CASE("identical invocations give identical bytes") {
  auto args = std::vector<std::string>{"run", "--seeds", "1,2", "--controllers", "SPDL,BP", "--jobs", "2"};
  args.insert(args.end(), kShort.begin(), kShort.end());
  const auto a = cli(args);
  const auto b = cli(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(data_lines(a.out).size() == 5u);
}

TEST_CASE("bad input exits nonzero") {
  CHECK(cli({"run", "--sweep", "speed=1:2:1"}).code == 2);
  CHECK(cli({"run", "--set", "demand.left_share=0.9"}).code == 2);
  CHECK(cli({"run", "--config", "/nonexistent/spdl.json"}).code == 2);
  CHECK(cli({"run", "--controller", "fixed-time"}).code == 2);
  CHECK(cli({"verify", "no-such-suite"}).code == 2);
  CHECK(cli({"--no-such-flag"}).code != 0);
}

TEST_CASE("verify exits zero and reports OK") {
  const auto r = cli({"verify", "appendix-a-bounds"});
  CHECK(r.code == 0);
  CHECK(r.out.find("OK") != std::string::npos);
  CHECK(cli({"--verify", "queue-conservation"}).code == 0);
}

TEST_CASE("the configuration file can come from the environment") {
  const std::string path = "spdl_env_config_test.json";
  {
    std::ofstream f(path);
    f << R"({"demand": {"demand_factor": 3.25}})";
  }
  setenv(kConfigEnv, path.c_str(), 1);
  const auto r = cli({"run", "--print-config"});
  unsetenv(kConfigEnv);
  std::remove(path.c_str());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("3.25") != std::string::npos);
  const auto d = cli({"run", "--print-config"});
  CHECK(d.out.find("3.25") == std::string::npos);
}

TEST_CASE("json output mirrors the csv rows") {
  std::vector<MetricsReport> rows(2);
  rows[1].seed = 4;
  const auto j = metrics_json(rows);
  CHECK(j.front() == '[');
  CHECK(j.find("\"seed\": 4") != std::string::npos);
}
