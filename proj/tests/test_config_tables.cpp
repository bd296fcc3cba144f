#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "combodose/config.hpp"
#include "combodose/errors.hpp"
#include "combodose/event_log.hpp"
#include "combodose/tables.hpp"

using namespace combodose;
using nlohmann::json;

namespace {

std::vector<std::string> fields_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.fields();
  }
  return {};
}

bool has(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::filesystem::path repo(const std::string& rel) {
  return std::filesystem::path(COMBODOSE_SOURCE_DIR) / rel;
}

}  // namespace

TEST_CASE("design config round trip") {
  DesignConfig d;
  d.constants.C1 = 10;
  d.constants.n2 = 6;
  d.raw_x = {5, 10, 20};
  d.mcmc.n_keep = 777;
  const auto j = to_json(d);
  const auto back = parse_design_config(j);
  CHECK(to_json(back) == j);
  CHECK(back.grid().x_levels == std::vector<double>{0, 1.0 / 3, 1});
  CHECK(back.constants.N() == 10 * 2 + 6 + 9 * 6);
}

TEST_CASE("design config rejects typos and bad values") {
  CHECK(has(fields_of([] { parse_design_config(json{{"design", {{"thetaT", 0.3}}}}); }),
            "design.thetaT (unknown key)"));
  CHECK(has(fields_of([] { parse_design_config(json{{"lattice", 5}}); }), "lattice (unknown key)"));
  CHECK(has(fields_of([] { parse_design_config(json{{"design", {{"theta_T", 1.5}}}}); }), "theta_T"));
  CHECK(has(fields_of([] { parse_design_config(json{{"design", {{"C1", "ten"}}}}); }), "design.C1"));
  CHECK(has(fields_of([] { parse_design_config(json{{"grid", {{"raw_x", {3, 2}}}}}); }), "grid"));
  CHECK(has(fields_of([] { parse_design_config(json{{"design", {{"N1", 31}}}}); }), "design.N1"));
  try {
    parse_design_config(json{{"design", {{"m1", 3}, {"C1", 10}}}});
    FAIL("m1 = 3 accepted");
  } catch (const ConfigError& e) {
    CHECK(has(e.fields(), "m1"));
    CHECK(std::string(e.what()).find("m1 must equal 2") != std::string::npos);
  }
}

TEST_CASE("run config resolves the scenario relative to the file") {
  const auto rc = load_run_config(repo("configs/default.json"));
  CHECK(std::filesystem::exists(rc.scenario_path));
  CHECK(rc.trials == 200);
  const auto j = to_json(rc);
  const auto back = parse_run_config(j, "/");
  CHECK(to_json(back) == j);

  auto missing = j;
  missing["scenario"] = "nope.json";
  CHECK(has(fields_of([&] { parse_run_config(missing, "/tmp"); }), "scenario (file not found)"));
  auto zero = j;
  zero["trials"] = 0;
  CHECK(has(fields_of([&] { parse_run_config(zero, "/"); }), "trials"));
  CHECK_THROWS_AS(read_json_file("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("shipped scenarios parse, validate and round-trip") {
  int n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(repo("scenarios"))) {
    const auto sc = load_scenario(entry.path());
    CHECK_NOTHROW(sc.validate());
    CHECK(sc.name == entry.path().stem().string());
    const auto again = parse_scenario(to_json(sc));
    CHECK(to_json(again) == to_json(sc));
    REQUIRE(sc.documented_target.has_value());
    ++n;
  }
  CHECK(n == 17);
  CHECK_THROWS_AS(parse_scenario(json{{"kind", "parametric"}, {"toxicity", {{"rho00", 0.1}}}}), ConfigError);
  CHECK_THROWS_AS(parse_scenario(json{{"kind", "histogram"}}), ConfigError);
}

TEST_CASE("documented targets match a brute-force search") {
  for (const auto& entry : std::filesystem::directory_iterator(repo("scenarios"))) {
    const auto sc = load_scenario(entry.path());
    const auto t = brute_force_target(sc, 1001);
    CAPTURE(sc.name);
    CHECK(sc.documented_target->utility == doctest::Approx(t.utility).epsilon(1e-9));
    CHECK(sc.documented_target->x == doctest::Approx(t.x).epsilon(1e-9));
    CHECK(sc.documented_target->y == doctest::Approx(t.y).epsilon(1e-9));
  }
}

TEST_CASE("results table round trip and error reporting") {
  Scenario sc;
  sc.name = "s";
  std::vector<TrialRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[i].trial = i;
    rows[i].seed = 1000 + i;
    rows[i].status = TrialStatus::completed;
    rows[i].enrolled = 96;
    rows[i].dlt_count = 7 + i;
    rows[i].has_recommendation = true;
    rows[i].x_opt = 0.1 * i + 1e-17;
    rows[i].y_opt = 1.0 / 3;
    rows[i].U_hat_opt = 0.123456789012345678;
    rows[i].ar_doses = {{0, 1.0 / 3}, {2.0 / 3, 1}};
  }
  rows[2].status = TrialStatus::stopped_safety_stage2;
  rows[2].has_recommendation = false;
  rows[2].ar_doses.clear();
  std::ostringstream os;
  write_results_table(os, rows, sc);
  const std::string text = os.str();
  std::istringstream is(text);
  const auto back = read_results_table(is);
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].seed == rows[i].seed);
    CHECK(back[i].status == rows[i].status);
    CHECK(back[i].x_opt == rows[i].x_opt);
    CHECK(back[i].U_hat_opt == rows[i].U_hat_opt);
    CHECK(back[i].ar_doses == rows[i].ar_doses);
  }
  std::ostringstream again;
  write_results_table(again, back, sc);
  CHECK(again.str() == text);

  const auto lines = [&] {
    std::vector<std::string> v;
    std::istringstream s(text);
    std::string l;
    while (std::getline(s, l)) v.push_back(l);
    return v;
  }();
  const auto expect_error = [](const std::string& t, const std::string& needle) {
    std::istringstream s(t);
    try {
      read_results_table(s);
      FAIL("accepted: " << t);
    } catch (const InvalidParams& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };
  // truncated: last row missing
  expect_error(lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n", "truncated");
  // row cut mid-line
  expect_error(lines[0] + "\n" + lines[1] + "\n" + lines[2].substr(0, 20) + "\n", "line 3");
  auto bad = lines[2];
  bad.replace(bad.find("completed"), 9, "finished");
  expect_error(lines[0] + "\n" + lines[1] + "\n" + bad + "\n" + lines[3] + "\n", "line 3");
  expect_error("trial,seed\n", "line 1");
  expect_error("", "line 1");
  std::istringstream header_only(lines[0] + "\n");
  CHECK(read_results_table(header_only).empty());
}

TEST_CASE("oc summary is valid JSON with stable bytes") {
  Scenario sc;
  sc.name = "quote\"name";
  OperatingCharacteristics oc;
  oc.n_trials = 2;
  oc.avg_dlt_rate = 0.1;
  oc.recommended_true_utility = {2, 0.5, 0.5, 0.4, 0.6};
  const auto a = format_oc_summary(oc, sc);
  CHECK(a == format_oc_summary(oc, sc));
  const auto j = json::parse(a);
  CHECK(j["scenario"] == "quote\"name");
  CHECK(j["avg_dlt_rate"] == 0.1);
  CHECK(j["recommended_true_utility"]["p975"] == 0.6);
  CHECK(j.contains("target"));
}

TEST_CASE("surface table") {
  Scenario sc;
  std::ostringstream os;
  write_surface_table(os, sc, 3);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "x,y,pi_T,pi_E,U");
  int n = 0;
  while (std::getline(is, line)) ++n;
  CHECK(n == 9);
}

TEST_CASE("event log round trip") {
  CohortEvent e;
  e.stage = 2;
  e.cohort = 3;
  e.alpha = 0.35;
  e.assignments = {{31, 1, 2, 1.0 / 3, 2.0 / 3}};
  e.outcomes = {{31, 1, 0}};
  e.fit_seed = 0xffffffffffffffffULL;
  e.stop_rule = StopEvaluation{2, 0.1234567890123, 0.7, false};
  e.status = TrialStatus::active;
  Recommendation r;
  r.admissible = true;
  r.x_opt = 0.123;
  r.y_opt = 0.987654321;
  r.U_hat = 0.5;
  r.lattice_resolution = 101;
  e.recommendation = r;
  e.next_allocation_seed = 17;
  CohortEvent f;
  f.assignments = {{1, 0, 0, 0, 0}, {2, 0, 0, 0, 0}};
  f.outcomes = {{1, 0, 0}, {2, 1, 1}};
  std::ostringstream os;
  write_event_log(os, {e, f});
  std::istringstream is(os.str());
  const auto back = read_event_log(is);
  REQUIRE(back.size() == 2);
  CHECK(back[0].alpha == e.alpha);
  CHECK(back[0].assignments == e.assignments);
  CHECK(back[0].fit_seed == e.fit_seed);
  CHECK(back[0].stop_rule == e.stop_rule);
  CHECK(back[0].recommendation->y_opt == r.y_opt);
  CHECK_FALSE(back[1].alpha.has_value());
  CHECK_FALSE(back[1].recommendation.has_value());
  std::ostringstream again;
  write_event_log(again, back);
  CHECK(again.str() == os.str());

  std::istringstream broken(os.str().substr(0, os.str().size() / 2) + "\n{}\n");
  try {
    read_event_log(broken);
    FAIL("accepted a broken log");
  } catch (const InvalidParams& ex) {
    CHECK(std::string(ex.what()).find("line 1") != std::string::npos);
  }
}
