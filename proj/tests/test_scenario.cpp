#include <gtest/gtest.h>

#include <json.hpp>

#include "emberpipe/metrics.hpp"
#include "emberpipe/mission.hpp"
#include "emberpipe/scenario.hpp"

using namespace emberpipe;
using json = nlohmann::json;

namespace {

std::string scenario_path(const std::string& name) { return std::string(EMBERPIPE_SCENARIO_DIR) + "/" + name; }

json facade_json() { return json::parse(scenario::read_text_file(scenario_path("facade.json"))); }
json kitchen_json() { return json::parse(scenario::read_text_file(scenario_path("kitchen.json"))); }

std::vector<std::string> violations_of(const json& j) {
  try {
    scenario::parse_scenario(j.dump(2));
  } catch (const ValidationError& e) {
    return e.violations();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Scenario, BundledScenariosAreValid) {
  const auto f = scenario::load_scenario(scenario_path("facade.json"));
  ASSERT_EQ(f.robots.size(), 1u);
  EXPECT_EQ(f.robots[0].kind, sim::RobotKind::Uav);
  EXPECT_GE(f.arena.holes.size(), 3u);
  EXPECT_EQ(std::count_if(f.arena.holes.begin(), f.arena.holes.end(), [](const auto& h) { return h.heated; }), 1);

  const auto k = scenario::load_scenario(scenario_path("kitchen.json"));
  ASSERT_EQ(k.robots.size(), 1u);
  EXPECT_EQ(k.robots[0].kind, sim::RobotKind::Ugv);
  EXPECT_EQ(k.robots[0].ugv.slots.size(), 2u);
  EXPECT_GE(k.maps.size(), 2u);
}

TEST(Scenario, UnknownFieldReportsLine) {
  auto j = facade_json();
  j["robots"][0]["wingspan"] = 2.0;
  const std::string text = j.dump(2);
  try {
    scenario::parse_scenario(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("wingspan"), std::string::npos);
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.find("\"wingspan\""); ++i) line += text[i] == '\n';
    EXPECT_EQ(e.line(), line);
  }
}

TEST(Scenario, MalformedJsonReportsLine) {
  try {
    scenario::parse_scenario("{\n  \"name\": \"x\",\n  \"seed\": ,\n}");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(scenario::parse_scenario("[1, 2]"), ParseError);
}

TEST(Scenario, WaypointOutsideBoundsIsNamed) {
  auto j = facade_json();
  j["robots"][0]["uav"]["route"][1]["position"] = {-8.5, 40, 2.2};
  const auto v = violations_of(j);
  EXPECT_TRUE(any_contains(v, "waypoint route[1] (-8.5, 40, 2.2) is outside the arena bounds")) << ::testing::PrintToString(v);
}

TEST(Scenario, DuplicateNamesRejected) {
  auto j = facade_json();
  j["robots"].push_back(j["robots"][0]);
  EXPECT_TRUE(any_contains(violations_of(j), "duplicate robot name 'uav1'"));
  auto m = facade_json();
  m["maps"].push_back(m["maps"][0]);
  EXPECT_TRUE(any_contains(violations_of(m), "duplicate map name 'outdoor'"));
}

TEST(Scenario, RouteThroughWallRejected) {
  auto j = facade_json();
  j["robots"][0]["uav"]["route"][1]["position"] = {0, 0, 2.2};  // inside the building
  EXPECT_TRUE(any_contains(violations_of(j), "crosses wall 'west'"));
}

TEST(Scenario, HeatedPerGroupAndSlotCount) {
  auto j = kitchen_json();
  for (auto& h : j["arena"]["holes"]) {
    h["heated"] = true;
    h["group"] = "same";
  }
  EXPECT_TRUE(any_contains(violations_of(j), "fire group 'same' has 2 heated holes"));
  j["allow_multiple_heated_per_group"] = true;
  EXPECT_TRUE(violations_of(j).empty());

  auto k = kitchen_json();
  k["robots"][0]["ugv"]["slots"].erase(1);
  EXPECT_TRUE(any_contains(violations_of(k), "exactly 2 fire slots"));
}

TEST(Scenario, AllViolationsReportedTogether) {
  auto j = facade_json();
  j["duration"] = -1;
  j["rates"]["lidar"] = 500;
  j["robots"][0]["uav"]["home"] = {99, 0, 2};
  EXPECT_GE(violations_of(j).size(), 3u);
}

TEST(Mission, NoHeatedHoleNeverTracksOrSprays) {
  auto j = facade_json();
  for (auto& h : j["arena"]["holes"]) h["heated"] = false;
  const auto scn = scenario::parse_scenario(j.dump());
  mission::MissionOptions o;
  o.duration = 40.0;
  const auto rep = mission::run_mission(scn, o);
  ASSERT_TRUE(rep.complete) << rep.abort_reason;
  ASSERT_FALSE(rep.steps.empty());
  for (const auto& s : rep.steps) {
    EXPECT_NE(s.phase, "tracking");
    EXPECT_FALSE(s.pump);
  }
  EXPECT_TRUE(rep.sprays.empty());
  for (const auto& [hole, v] : rep.water_by_hole) EXPECT_EQ(v, 0.0);
}

TEST(Mission, DeterministicAndRoundTrips) {
  const auto scn = scenario::load_scenario(scenario_path("facade.json"));
  mission::MissionOptions o;
  o.duration = 8.0;
  const auto a = mission::to_jsonl(mission::run_mission(scn, o));
  const auto b = mission::to_jsonl(mission::run_mission(scn, o));
  EXPECT_EQ(a, b);
  o.seed = 99;
  EXPECT_NE(mission::to_jsonl(mission::run_mission(scn, o)), a);
  EXPECT_EQ(mission::to_jsonl(mission::from_jsonl(a)), a);
}

TEST(Mission, TruncatedReportIsIncomplete) {
  const auto scn = scenario::load_scenario(scenario_path("facade.json"));
  mission::MissionOptions o;
  o.duration = 3.0;
  const auto text = mission::to_jsonl(mission::run_mission(scn, o));
  const auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);  // drop the summary line
  const auto r = mission::from_jsonl(cut);
  EXPECT_FALSE(r.complete);
  EXPECT_THROW(metrics::eval_metrics(r), IncompleteReport);
  EXPECT_THROW(mission::from_jsonl(""), ParseError);
}

TEST(Metrics, PerfectTraceAndHandComputedValues) {
  mission::MissionReport r;
  r.holes = {{"a", Vec3(1, 0, 0), Vec3(-1, 0, 0), true, "g"}, {"b", Vec3(5, 0, 0), Vec3(-1, 0, 0), false, "h"}};
  for (int i = 0; i < 10; ++i) {
    mission::StepRecord s;
    s.t = 0.1 * i;
    s.localized = true;
    s.position = s.true_position = Vec3(i, 2 * i, 1);
    r.steps.push_back(s);
  }
  mission::DetectionRecord d;
  d.admitted = true;
  d.position = Vec3(1, 0.3, 0.4);  // 0.5 m from hole a
  d.normal = Vec3(-1, 0, 0);
  r.detections.push_back(d);
  d.admitted = false;
  d.position = Vec3(100, 0, 0);
  r.detections.push_back(d);
  r.sprays = {{1.0, "u", 0.2, "a", {}, {}}, {2.0, "u", 0.2, "a", {}, {}}, {3.0, "u", 0.1, "", {}, {}}};

  const auto m = metrics::eval_metrics(r);
  EXPECT_EQ(*m.localization_rms, 0.0);
  EXPECT_EQ(m.localized_steps, 10u);
  EXPECT_EQ(m.detections_used, 1u);
  EXPECT_NEAR(*m.detection_position_rms, 0.5, 1e-12);
  EXPECT_NEAR(*m.detection_normal_rms_deg, 0.0, 1e-9);
  EXPECT_NEAR(m.water_sprayed, 0.5, 1e-12);
  EXPECT_NEAR(m.water_on_target, 0.4, 1e-12);
  EXPECT_NEAR(*m.water_efficiency, 0.8, 1e-12);
  EXPECT_EQ(*m.time_to_extinguish, 2.0);

  r.steps[3].position += Vec3(0.3, 0.4, 0);  // one step off by 0.5 m
  EXPECT_NEAR(*metrics::eval_metrics(r).localization_rms, std::sqrt(0.25 / 10.0), 1e-12);
}

TEST(Metrics, EmptyOrAbortedReportThrows) {
  mission::MissionReport r;
  EXPECT_THROW(metrics::eval_metrics(r), IncompleteReport);
  r.steps.emplace_back();
  r.complete = false;
  EXPECT_THROW(metrics::eval_metrics(r), IncompleteReport);
}
