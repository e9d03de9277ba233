#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "dcattack/errors.hpp"
#include "dcattack/report.hpp"
#include "dcattack/squeeze.hpp"
#include "fixtures.hpp"

using namespace dcattack;

namespace {

SqueezeConfig quick(uint64_t seed) {
  SqueezeConfig cfg;
  cfg.seed = seed;
  cfg.budget = 60.0;
  return cfg;
}

void check_trace(const BoundsReport& r) {
  double lb = -INFINITY, ub = INFINITY;
  for (const TracePoint& p : r.trace) {
    if (p.side == "lb") {
      CHECK(p.value >= lb);
      lb = p.value;
    } else {
      CHECK(p.side == "ub");
      CHECK(p.value <= ub);
      ub = p.value;
    }
    CHECK(lb <= ub + 1e-6);
  }
}

}  // namespace

TEST_CASE("relative gap") {
  CHECK(relative_gap(0.99, 1.0) == doctest::Approx(0.01));
  CHECK(relative_gap(0.0, 0.0) == 0.0);
}

TEST_CASE("desk cases match") {
  for (const char* file : {"desk/desk2.m", "desk/desk3.m"}) {
    NetworkCase net = fixtures::load(fixtures::data_path(file));
    FeasibilityMatrices m = build_model(net);
    BoundsReport r = squeeze_run(net, m, quick(1));
    CHECK(r.matched);
    CHECK(r.match_verified);
    CHECK(r.gap < 0.01);
    CHECK(*r.lb <= *r.ub + 1e-6);
    CHECK(r.match_time.has_value());
    check_trace(r);
  }
}

TEST_CASE("squeeze traces are reproducible") {
  NetworkCase net = fixtures::load(fixtures::pglib("case14_ieee"));
  FeasibilityMatrices m = build_model(net);
  BoundsReport a = squeeze_run(net, m, quick(5));
  BoundsReport b = squeeze_run(net, m, quick(5));
  REQUIRE(a.trace.size() == b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].side == b.trace[i].side);
    CHECK(a.trace[i].value == b.trace[i].value);
  }
  CHECK(a.matched);
  CHECK(*a.ub == doctest::Approx(0.178).epsilon(0.05));
  check_trace(a);
}

TEST_CASE("bounds agree across slack choices") {
  // Generators 0 and 1 are the two units with an operating range.
  NetworkCase net = fixtures::load(fixtures::pglib("case14_ieee"));
  BoundsReport first = squeeze_run(net, build_model(net, 0), quick(2));
  BoundsReport second = squeeze_run(net, build_model(net, 1), quick(2));
  CHECK(std::abs(*first.lb - *second.lb) <= 1e-6);
  CHECK(std::abs(*first.ub - *second.ub) <= 1e-6);
}

TEST_CASE("cross_feed hints") {
  NetworkCase net = fixtures::load(fixtures::data_path("desk/desk2.m"));
  FeasibilityMatrices m = build_model(net);
  DispatchResult nominal = solve_dcopf(net, m, Eigen::VectorXd::Zero(1));

  Hints none = cross_feed(m, nullptr, nullptr, &nominal.p);
  CHECK_FALSE(none.defense_direction.has_value());
  REQUIRE(none.attack_directions.size() == 1);
  FixedDispatchBound fb = fixed_dispatch_bound(m, nominal.p);
  CHECK(std::abs(none.attack_directions[0].dot(m.B.row(fb.row).transpose().normalized())) ==
        doctest::Approx(1.0));

  WarmStart ws = warm_start_defense(m);
  DefensePolicy pol = defense_local(m, ws);
  Hints from_defense = cross_feed(m, nullptr, &pol);
  REQUIRE_FALSE(from_defense.attack_directions.empty());
  AttackConfig cfg;
  AttackSolution s = attack_from_direction(m, cfg, from_defense.attack_directions[0]);
  CHECK(s.norm_sq == doctest::Approx(0.16).epsilon(1e-6));

  Hints from_attack = cross_feed(m, &s, nullptr);
  REQUIRE(from_attack.defense_direction.has_value());
  CHECK(from_attack.defense_direction->norm() == doctest::Approx(1.0));
}

TEST_CASE("nominal infeasibility is a model error") {
  std::istringstream in(R"(mpc.baseMVA = 100;
mpc.bus = [ 1 3 0 0 0 0 1 1 0 230 1 1.1 0.9; 2 1 300 0 0 0 1 1 0 230 1 1.1 0.9; ];
mpc.gen = [ 1 0 0 0 0 1 100 1 200 0; 2 0 0 0 0 1 100 1 50 0; ];
mpc.branch = [ 1 2 0 0.1 0 100 100 100 0 0 1 -30 30; ];
)");
  NetworkCase net = parse_case(in, "short");
  FeasibilityMatrices m = build_model(net);
  CHECK_THROWS_AS(squeeze_run(net, m, quick(0)), ModelError);
}

TEST_CASE("reports and CSV views") {
  NetworkCase net = fixtures::load(fixtures::data_path("desk/desk3.m"));
  FeasibilityMatrices m = build_model(net);
  BoundsReport r = squeeze_run(net, m, quick(3));
  RunManifest manifest;
  manifest.command = "squeeze";
  manifest.case_paths = {"desk3.m"};
  manifest.config = {{"seed", 3}};
  nlohmann::json doc = document("dcattack.bounds/1", bounds_json(net, m, r), manifest);
  CHECK(doc["schema"] == "dcattack.bounds/1");
  CHECK(doc["manifest"]["config"]["seed"] == 3);
  CHECK(doc["manifest"]["tool_version"] == DCATTACK_VERSION);
  CHECK(doc["matched"] == true);
  CHECK(doc["attack"]["delta"].size() == 2);
  CHECK(doc["attack"]["delta"][0]["bus"] == 2);
  CHECK(doc["defense"]["G"].size() == static_cast<size_t>(m.dim_p()));
  CHECK(doc["trace"].size() == r.trace.size());

  std::ostringstream trace;
  write_trace_csv(trace, r.trace);
  CHECK(trace.str().rfind("time_s,side,value\n", 0) == 0);

  std::ostringstream delta;
  write_delta_csv(delta, net, m, r.attack->delta);
  std::string text = delta.str();
  CHECK(text.rfind("bus_id,delta_pu,delta_mw,percent_of_total_load\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);

  nlohmann::json mats = matrices_json(net, m);
  CHECK(mats["A"].size() == static_cast<size_t>(m.rows()));
  CHECK(mats["row_labels"][0].get<std::string>().rfind("flow-upper", 0) == 0);
  CHECK(error_json("parse", "x")["error"]["kind"] == "parse");
}

TEST_CASE("table rendering") {
  std::vector<TableRow> rows = {{"a", 1.0, 1.005, 0.005, true, 0.5, 1.0}, {"b", 0.4, std::nullopt, 1.0, false, std::nullopt, 2.0}};
  std::ostringstream md, csv;
  render_table(md, rows, parse_table_format("md"));
  render_table(csv, rows, parse_table_format("csv"));
  CHECK(md.str().find("| a | 1 | 1.005 |") != std::string::npos);
  CHECK(md.str().find("| --- |") != std::string::npos);
  CHECK(csv.str().find("b,0.4,-,-,no,-,2") != std::string::npos);
  CHECK_THROWS_AS(parse_table_format("html"), PreconditionError);
}
