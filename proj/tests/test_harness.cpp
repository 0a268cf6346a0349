#include <sstream>

#include "cef/harness.hpp"
#include "cef/types.hpp"
#include "doctest.h"

using namespace cef;

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::stringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    out.push_back(cells);
  }
  return out;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("unknown experiments and infeasible Newton configs are rejected") {
    CHECK_THROWS_AS(default_config("nope"), InvalidInput);
    ExperimentConfig c = default_config("svdcef_newton");
    c.K = 9;
    c.trials = 1;
    try {
      run(c);
      FAIL("expected a rank-bound rejection");
    } catch (const InvalidInput& e) {
      CHECK(std::string(e.what()).find("< N(N+1)/2") != std::string::npos);
    }
    c.trials = 0;
    CHECK_THROWS_AS(validate(c), InvalidInput);
  }

  TEST_CASE("IoM-1 table layout: one row per (N, K1)") {
    ExperimentConfig c = default_config("iom1_table");
    c.Ns = {8};
    c.trials = 5;
    const ResultTable t = run(c);
    CHECK(t.rows.size() == 4u);
    CHECK(t.columns[2] == "averaging");
    CHECK(t.columns[4] == "refined");
    CHECK(t.at(3, "K1") == 64.0);
    CHECK(t.meta.contains("config_hash"));
  }

  TEST_CASE("same config and seed give identical CSV, serial or parallel") {
    for (const char* id : {"iom2_table", "ber", "svdcef_newton", "distance_profile"}) {
      ExperimentConfig c = default_config(id);
      c.trials = 6;
      if (!c.Ns.empty()) c.Ns = {8};
      if (!c.Ks.empty()) c.Ks = {8, 16};
      if (c.experiment == "svdcef_newton") c.radii = {0.001};
      c.workers = 1;
      const std::string serial = emit_csv(run(c));
      c.workers = 4;
      const std::string parallel = emit_csv(run(c));
      CHECK(serial == parallel);
      CHECK(emit_csv(run(c)) == parallel);
      c.seed = 2;
      CHECK(emit_csv(run(c)) != parallel);
    }
  }

  TEST_CASE("CSV emission: header-only when empty, parseable, 10 significant digits") {
    ResultTable t;
    t.columns = {"a", "b"};
    CHECK(emit_csv(t) == "a,b\n");
    t.add_row({1.0 / 3.0, -2e-7});
    const auto cells = parse_csv(emit_csv(t));
    REQUIRE(cells.size() == 2u);
    CHECK(cells[1][0] == "0.3333333333");
    CHECK(std::stod(cells[1][1]) == doctest::Approx(-2e-7).epsilon(1e-9));
    CHECK_THROWS_AS(t.add_row({1.0}), InvalidInput);
    CHECK_THROWS_AS(t.add_row({1.0, std::numeric_limits<double>::infinity()}), InvalidInput);
  }

  TEST_CASE("JSON round trip reproduces the table") {
    ResultTable t;
    t.name = "x";
    t.columns = {"u", "v"};
    t.add_row({0.1, 2.0});
    t.add_row({3.25, -1e-300});
    const ResultTable c = table_from_json(nlohmann::json::parse(emit_json(t).dump()));
    CHECK(c.columns == t.columns);
    CHECK(c.rows == t.rows);
    CHECK(emit_csv(c) == emit_csv(t));
  }

  TEST_CASE("config JSON overrides defaults and round-trips") {
    const ExperimentConfig c = config_from_json({{"experiment", "drp2"}, {"N", 16}, {"L", 48}, {"trials", 7}});
    CHECK(c.N == 16);
    CHECK(c.L == 48);
    CHECK(c.K == 184);
    CHECK(c.trials == 7);
    const ExperimentConfig d = config_from_json(to_json(c));
    CHECK(config_hash(c) == config_hash(d));
    CHECK_THROWS_AS(config_from_json({{"N", 3}}), InvalidInput);
  }
}
