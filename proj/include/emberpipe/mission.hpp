#pragma once

// Closed-loop mission: simulated robots, sensors, perception, target filter
// and state machines stepped on one fixed-rate clock. Per tick the order is
// dynamics, sensors, perception, filter, state machine, actuation.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "emberpipe/autonomy.hpp"
#include "emberpipe/dynamics.hpp"
#include "emberpipe/gnss.hpp"
#include "emberpipe/holes.hpp"
#include "emberpipe/jet.hpp"
#include "emberpipe/localization.hpp"
#include "emberpipe/range_study.hpp"
#include "emberpipe/rng.hpp"
#include "emberpipe/scenario.hpp"
#include "emberpipe/sensors.hpp"
#include "emberpipe/target_filter.hpp"
#include "emberpipe/thermal.hpp"

namespace emberpipe::mission {

struct StepRecord {
  double t = 0.0;
  std::string robot;
  std::string state;
  Vec3 position = Vec3::Zero();  // localized
  double yaw = 0.0;
  Vec3 true_position = Vec3::Zero();
  double true_yaw = 0.0;
  bool localized = false;  // an offset has been accepted
  std::string map;
  bool pump = false;
  double volume = 0.0;
  double water_remaining = 0.0;
  std::string reason;
  std::string command = "hover";  // hover | goto
  std::optional<Vec3> goal_position;  // commanded, localized frame
  std::optional<double> goal_yaw;
  std::optional<Vec3> target;  // UAV: filter estimate; UGV: last heat estimate
  std::string phase;           // UAV filter phase
  int streak = 0;
  std::optional<Vec3> arm_position;  // UGV nozzle in the base frame
  std::optional<Vec3> arm_rpy;
  double arm_step = 0.0;  // commanded arm translation this step
};

struct DetectionRecord {
  double t = 0.0;
  std::string robot;
  std::string kind;    // thermal | hole
  std::string source;  // lidar-box | bbox | lidar-circle
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();
  bool admitted = false;
  std::string reason;
  std::optional<double> distance;  // bbox range
};

struct LocalizationRecord {
  double t = 0.0;
  std::string robot;
  std::string map;
  std::string status;  // accepted | rejected | failed | lost
  double error = 0.0;      // localized vs truth, m
  double raw_error = 0.0;  // ego estimate vs truth, m
  double delta = 0.0;      // candidate offset minus current offset, m
  double rms = 0.0;        // registration residual
  std::string detail;
};

struct SprayRecord {
  double t = 0.0;
  std::string robot;
  double volume = 0.0;
  std::string hole;  // empty when the jet missed every hole
  Vec3 hit_point = Vec3::Zero();
  Vec3 nozzle = Vec3::Zero();
};

struct HoleTruth {
  std::string id;
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();
  bool heated = false;
  std::string group;
};

struct RobotSummary {
  std::string name;
  std::string kind;
  std::string final_state;
  double water_initial = 0.0;
  double water_remaining = 0.0;
};

struct MissionReport {
  std::string scenario;
  std::uint64_t seed = 0;
  double duration = 0.0;
  double end_time = 0.0;
  bool complete = true;
  std::string abort_reason;
  PinholeCamera camera;
  double recess_depth = 0.10;
  std::vector<HoleTruth> holes;
  std::vector<RobotSummary> robots;
  std::vector<StepRecord> steps;
  std::vector<DetectionRecord> detections;
  std::vector<LocalizationRecord> localization;
  std::vector<SprayRecord> sprays;
  std::map<std::string, double> water_by_hole;
  double water_missed = 0.0;
  double wall_time = 0.0;  // filled by the caller, never serialized
};

struct Injection {
  std::string robot;
  std::optional<double> at_time;
  std::optional<std::string> on_state;  // first tick the state machine is in this state
  Vec3 step = Vec3(1.5, 0.0, 0.0);
  bool fired = false;
};

struct MissionOptions {
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::vector<Injection> injections;
  double linger = 1.0;  // keep stepping this long after every robot is terminal
};

namespace detail {

using json = nlohmann::json;

enum class Channel : std::uint64_t { Drift = 1, Lidar = 2, Thermal = 3, Holes = 4 };

inline std::uint64_t stream_seed(std::uint64_t seed, std::size_t robot, Channel c, std::uint64_t tick = 0) {
  return mix_seed(mix_seed(seed, 16 * robot + std::uint64_t(c)), tick);
}

struct Scan {
  PointCloud cloud;   // LiDAR frame
  Pose ego_lidar;     // LiDAR pose from the ego estimate at capture
  double t = 0.0;
};

struct Runtime {
  const scenario::RobotSpec* spec = nullptr;
  std::size_t index = 0;
  sim::RobotState state;
  sim::DriftState drift;
  Rng drift_rng;
  Pose ego;  // drifted pose estimate
  loc::LocalizationState loc;
  std::optional<std::string> map;
  std::optional<Scan> scan;
  filter::TrackerState tracker;
  std::vector<autonomy::DetectionOutcome> outcomes;
  autonomy::UavFsm uav;
  autonomy::UgvFsm ugv;
  sim::StepCommand cmd;
  std::optional<Vec3> heat;       // fresh UGV heat estimate since the last FSM tick
  std::optional<Vec3> last_heat;
  std::optional<Pose> prev_localized;
  bool lost_logged = false;
  std::optional<double> terminal_since;

  bool is_uav() const { return spec->kind == sim::RobotKind::Uav; }
  Pose localized() const { return loc.initialized() ? loc::localize(loc, ego) : ego; }
  std::string state_name() const { return is_uav() ? autonomy::to_string(uav.state) : autonomy::to_string(ugv.state); }
};

inline bool due(std::int64_t k, int rate, int dyn) { return (k * rate) / dyn != ((k - 1) * rate) / dyn; }

/// Field-frame goal as the true dynamics see it, given the localization error.
inline sim::MotionCommand to_true_frame(const sim::MotionCommand& m, const Pose& localized, const Pose& truth) {
  const auto* w = std::get_if<sim::WaypointCommand>(&m);
  if (!w) return m;
  const Pose correction = truth * localized.inverse();
  return sim::WaypointCommand{correction * w->position, wrap_angle(w->yaw + truth.yaw() - localized.yaw())};
}

inline json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
inline Vec3 vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace detail

/// Runs the scenario to its duration cap or until every robot is terminal.
/// Module errors abort the loop and flag the report incomplete.
inline MissionReport run_mission(const scenario::Scenario& scn, MissionOptions opts = {}) {
  using namespace detail;
  MissionReport rep;
  rep.scenario = scn.name;
  rep.seed = opts.seed.value_or(scn.seed);
  rep.duration = opts.duration.value_or(scn.duration);
  if (!scn.robots.empty()) {
    rep.camera = scn.robots.front().thermal.camera;
    rep.recess_depth = scn.robots.front().recess_depth;
  }
  for (const auto& h : scn.arena.holes) {
    rep.holes.push_back({h.id, h.center, h.normal, h.heated, h.group.empty() ? h.id : h.group});
    rep.water_by_hole[h.id] = 0.0;
  }

  sim::ArenaModel arena = scn.arena;
  arena.validate();
  const std::vector<loc::ReferenceMap> maps = scenario::build_maps(scn);
  const sim::RayCaster caster(arena);

  std::vector<Runtime> robots;
  for (std::size_t i = 0; i < scn.robots.size(); ++i) {
    const auto& sp = scn.robots[i];
    Runtime r;
    r.spec = &sp;
    r.index = i;
    r.state.true_pose = sp.spawn;
    r.state.kind = sp.kind;
    r.state.water_remaining = sp.water;
    r.drift_rng = Rng(stream_seed(rep.seed, i, Channel::Drift));
    r.ego = sp.spawn;
    r.uav.water = sp.water;
    r.ugv.water = sp.water;
    if (sp.kind == sim::RobotKind::Ugv && !sp.ugv.slots.empty()) r.state.arm_pose = sp.ugv.slots.front().scan_arm;
    robots.push_back(std::move(r));
    rep.robots.push_back({sp.name, sim::to_string(sp.kind), "", sp.water, sp.water});
  }

  const int dyn = scn.rates.dynamics;
  const double dt = 1.0 / dyn;
  const double fsm_dt = 1.0 / scn.rates.fsm;
  const auto ticks = std::int64_t(std::ceil(rep.duration * dyn - 1e-9));
  double t = 0.0;

  auto log_detection = [&](const Runtime& r, const Detection& d, const std::string& source, bool admitted,
                           const std::string& reason, std::optional<double> distance = std::nullopt) {
    rep.detections.push_back({t, r.spec->name, to_string(d.kind), source, d.position, d.normal, admitted, reason,
                              distance});
  };

  try {
    for (std::int64_t k = 1; k <= ticks; ++k) {
      t = double(k) / dyn;

      // Dynamics and ego-motion estimate.
      for (auto& r : robots) {
        r.state = sim::step_dynamics(r.state, r.cmd, r.spec->limits, dt);
        r.ego = sim::gnss_measure(r.state.true_pose, r.drift, r.spec->drift, dt, r.drift_rng, false);
        for (auto& inj : opts.injections) {
          if (inj.fired || inj.robot != r.spec->name) continue;
          const bool hit = (inj.at_time && t >= *inj.at_time - 1e-12) || (inj.on_state && r.state_name() == *inj.on_state);
          if (!hit) continue;
          sim::inject_step(r.drift, inj.step);
          r.ego.translation += inj.step;
          inj.fired = true;
        }
      }

      // Sensors.
      std::vector<std::optional<ThermalImage>> frames(robots.size());
      std::vector<Pose> frame_ego_optical(robots.size());
      for (auto& r : robots) {
        const auto& sp = *r.spec;
        if (due(k, scn.rates.lidar, dyn)) {
          Scan s;
          const Pose true_lidar = r.state.true_pose * sp.lidar.mount;
          s.cloud = sim::render_lidar(arena, true_lidar, sp.lidar, stream_seed(rep.seed, r.index, Channel::Lidar, k));
          s.ego_lidar = r.ego * sp.lidar.mount;
          s.t = t;
          r.scan = std::move(s);
        }
        if (due(k, scn.rates.thermal, dyn)) {
          const Pose housing = r.is_uav() ? sp.thermal.mount : r.state.arm_pose * sp.thermal.mount;
          const Pose cam_true = optical_frame(r.state.true_pose * housing);
          frames[r.index] = sim::render_thermal(arena, cam_true, sp.thermal.camera,
                                                stream_seed(rep.seed, r.index, Channel::Thermal, k), sp.thermal.noise);
          frame_ego_optical[r.index] = optical_frame(r.ego * housing);
        }
      }

      // Perception and filter.
      for (auto& r : robots) {
        const auto& sp = *r.spec;
        if (r.scan && due(k, scn.rates.registration, dyn)) {
          const Scan& s = *r.scan;
          const Pose ego_body = s.ego_lidar * sp.lidar.mount.inverse();
          const Pose guess_body = r.loc.initialized() ? loc::localize(r.loc, ego_body) : ego_body;
          LocalizationRecord lr;
          lr.t = t;
          lr.robot = sp.name;
          try {
            r.map = loc::select_map(guess_body.translation, maps, r.map);
            const auto& map = *std::find_if(maps.begin(), maps.end(), [&](const auto& m) { return m.name == *r.map; });
            const auto reg = loc::register_scan(s.cloud, map, guess_body * sp.lidar.mount, sp.registration);
            const Pose reg_body = reg.pose * sp.lidar.mount.inverse();
            const Pose candidate = reg_body * ego_body.inverse();
            lr.delta = r.loc.offset ? translation_distance(candidate, *r.loc.offset) : 0.0;
            lr.rms = reg.rms;
            const int before = r.loc.accepted;
            r.loc = loc::update_offset(r.loc, reg_body, ego_body, t, sp.offset_bounds);
            r.loc.active_map = *r.map;
            lr.status = r.loc.accepted > before ? "accepted" : "rejected";
            if (lr.status == "accepted") r.lost_logged = false;
          } catch (const RegistrationFailure& e) {
            lr.status = "failed";
            lr.detail = e.what();
          } catch (const NoMap& e) {
            lr.status = "failed";
            lr.detail = e.what();
          }
          lr.map = r.map.value_or("");
          lr.error = translation_distance(r.localized(), r.state.true_pose);
          lr.raw_error = translation_distance(r.ego, r.state.true_pose);
          rep.localization.push_back(lr);
          if (r.loc.initialized() && t - r.loc.last_update_time > 3.0 && !r.lost_logged) {
            LocalizationRecord lost = lr;
            lost.status = "lost";
            lost.detail = "no accepted registration for more than 3 s";
            rep.localization.push_back(lost);
            r.lost_logged = true;
          }
        }

        if (!r.is_uav()) {
          if (frames[r.index]) {
            auto contours = thermal::detect_heat(*frames[r.index], sp.thermal.lower, sp.thermal.upper,
                                                 sp.thermal.min_area);
            if (!contours.empty()) {
              const auto& c = *std::max_element(contours.begin(), contours.end(),
                                                [](const auto& a, const auto& b) { return a.area < b.area; });
              const Pose cam = r.loc.initialized() ? *r.loc.offset * frame_ego_optical[r.index]
                                                   : frame_ego_optical[r.index];
              try {
                const auto est = thermal::estimate_distance_bbox(c, sp.thermal.camera, sp.element_size,
                                                                 study::recess_calibration(sp.recess_depth), cam, t);
                r.heat = est.detection.position;
                r.last_heat = r.heat;
                log_detection(r, est.detection, "bbox", true, "heat-estimate", est.distance);
              } catch (const OutOfRange& e) {
                Detection d;
                log_detection(r, d, "bbox", false, "out-of-range");
              }
            }
          }
          continue;
        }

        // UAV: hole detections first, then thermal detections, through the filter.
        const Vec3 robot_pos = r.localized().translation;
        if (r.scan && due(k, scn.rates.holes, dyn) && r.tracker.phase == filter::Phase::Tracking) {
          const Pose lidar_loc = r.loc.initialized() ? *r.loc.offset * r.scan->ego_lidar : r.scan->ego_lidar;
          for (const auto& h : holes::detect_holes(r.scan->cloud, lidar_loc, sp.holes)) {
            const Detection d{h.position, h.normal, DetectionKind::Hole, t};
            const auto res = filter::ingest(r.tracker, d, robot_pos, t, sp.filter);
            r.tracker = res.state;
            r.outcomes.push_back(autonomy::classify(res));
            log_detection(r, d, "lidar-circle", res.admitted, res.reason);
          }
        }
        if (frames[r.index] && r.scan) {
          const auto contours =
              thermal::detect_heat(*frames[r.index], sp.thermal.lower, sp.thermal.upper, sp.thermal.min_area);
          const Pose lidar_loc = r.loc.initialized() ? *r.loc.offset * r.scan->ego_lidar : r.scan->ego_lidar;
          const thermal::Extrinsics extr{r.scan->ego_lidar.inverse() * frame_ego_optical[r.index]};
          for (const auto& c : contours) {
            Detection d;
            try {
              d = thermal::localize_heat_lidar(c, r.scan->cloud, extr, sp.thermal.camera, lidar_loc, t);
            } catch (const InsufficientSupport&) {
              log_detection(r, d, "lidar-box", false, "insufficient-support");
              continue;
            }
            const auto res = filter::ingest(r.tracker, d, robot_pos, t, sp.filter);
            r.tracker = res.state;
            r.outcomes.push_back(autonomy::classify(res));
            log_detection(r, d, "lidar-box", res.admitted, res.reason);
          }
        }
        r.tracker = filter::check_timeout(r.tracker, t, sp.filter);
      }

      // State machines and actuation.
      if (due(k, scn.rates.fsm, dyn)) {
        for (auto& r : robots) {
          const auto& sp = *r.spec;
          const Pose L = r.localized();
          const bool jump = r.prev_localized && loc::detect_jump(*r.prev_localized, L);
          r.prev_localized = L;
          StepRecord rec;
          rec.t = t;
          rec.robot = sp.name;
          sim::MotionCommand motion = sim::HoverCommand{};
          double volume = 0.0;
          Pose nozzle_true;
          double exit_speed = sp.exit_speed;

          if (r.is_uav()) {
            autonomy::UavInputs in;
            in.localized = L;
            in.phase = r.tracker.phase;
            if (r.tracker.phase == filter::Phase::Tracking) in.estimate = filter::estimate(r.tracker);
            in.outcomes = std::move(r.outcomes);
            r.outcomes.clear();
            in.jump = jump;
            in.now = t;
            auto [fsm, cmd] = autonomy::uav_step(r.uav, in, sp.uav, fsm_dt);
            r.uav = fsm;
            motion = cmd.motion;
            volume = cmd.volume;
            r.cmd.arm_target.reset();
            nozzle_true = r.state.true_pose * sp.nozzle_mount;
            r.state.water_remaining = r.uav.water;
            r.state.pump_on = cmd.pump;
            rec.reason = r.uav.reason;
            rec.phase = filter::to_string(r.tracker.phase);
            rec.streak = r.uav.consecutive_detections;
            if (in.estimate) rec.target = in.estimate->position;
          } else {
            autonomy::UgvInputs in;
            in.localized = L;
            in.heat = r.heat;
            r.heat.reset();
            in.arm_pose = r.state.arm_pose;
            in.now = t;
            auto [fsm, cmd] = autonomy::ugv_step(r.ugv, in, sp.ugv, fsm_dt);
            r.ugv = fsm;
            motion = cmd.base;
            volume = cmd.volume;
            r.cmd.arm_target = cmd.arm;
            if (cmd.arm) rec.arm_step = (cmd.arm->translation - r.state.arm_pose.translation).norm();
            nozzle_true = r.state.true_pose * r.state.arm_pose;
            exit_speed = sp.ugv.arm.exit_speed;
            r.state.water_remaining = r.ugv.water;
            r.state.pump_on = cmd.pump;
            rec.reason = r.ugv.reason;
            rec.target = r.last_heat;
            rec.arm_position = r.state.arm_pose.translation;
            rec.arm_rpy = Vec3(rad2deg(r.state.arm_pose.roll()), rad2deg(r.state.arm_pose.pitch()),
                               rad2deg(r.state.arm_pose.yaw()));
          }
          r.cmd.motion = to_true_frame(motion, L, r.state.true_pose);

          rec.state = r.state_name();
          rec.position = L.translation;
          rec.yaw = L.yaw();
          rec.true_position = r.state.true_pose.translation;
          rec.true_yaw = r.state.true_pose.yaw();
          rec.localized = r.loc.initialized();
          rec.map = r.map.value_or("");
          rec.pump = r.state.pump_on;
          rec.volume = volume;
          rec.water_remaining = r.state.water_remaining;
          if (const auto* w = std::get_if<sim::WaypointCommand>(&motion)) {
            rec.command = "goto";
            rec.goal_position = w->position;
            rec.goal_yaw = w->yaw;
          }
          rep.steps.push_back(rec);

          if (volume > 0.0) {
            sim::JetModel jet;
            jet.exit_speed = exit_speed;
            jet.exit_pose = nozzle_true;
            jet.flow_rate = sp.flow_rate;
            const auto hit = sim::simulate_jet(jet, arena, volume / sp.flow_rate);
            SprayRecord sr{t, sp.name, volume, "", hit.hit_point, nozzle_true.translation};
            if (hit.hole_hit) {
              sr.hole = arena.holes[*hit.hole_hit].id;
              rep.water_by_hole[sr.hole] += hit.water_delivered;
            } else {
              rep.water_missed += volume;
            }
            rep.sprays.push_back(sr);
          }

          const bool terminal =
              r.is_uav() ? (r.uav.state == autonomy::UavState::Stop ||
                            (r.uav.state == autonomy::UavState::ReturnHome &&
                             (r.state.true_pose.translation - sp.uav.home).norm() <= sp.uav.arrival_tolerance))
                         : r.ugv.state == autonomy::UgvState::Done;
          if (!terminal) {
            r.terminal_since.reset();
          } else if (!r.terminal_since) {
            r.terminal_since = t;
          }
        }
        const bool all_done = std::all_of(robots.begin(), robots.end(), [&](const Runtime& r) {
          return r.terminal_since && t - *r.terminal_since >= opts.linger - 1e-9;
        });
        if (all_done) break;
      }
    }
  } catch (const Error& e) {
    rep.complete = false;
    rep.abort_reason = e.what();
  }
  rep.end_time = t;
  for (std::size_t i = 0; i < robots.size(); ++i) {
    rep.robots[i].final_state = robots[i].state_name();
    rep.robots[i].water_remaining = robots[i].state.water_remaining;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

/// One JSON object per line, keys sorted: header, then steps, detections,
/// localization, sprays, then summary.
inline std::string to_jsonl(const MissionReport& r) {
  using detail::json;
  using detail::vec;
  std::ostringstream os;
  auto opt = [](const std::optional<Vec3>& v) { return v ? vec(*v) : json(nullptr); };
  json h = {{"type", "header"},
            {"scenario", r.scenario},
            {"seed", r.seed},
            {"duration", r.duration},
            {"camera",
             {{"fx", r.camera.fx}, {"fy", r.camera.fy}, {"cx", r.camera.cx}, {"cy", r.camera.cy},
              {"width", r.camera.width}, {"height", r.camera.height}}},
            {"recess_depth", r.recess_depth}};
  json holes = json::array();
  for (const auto& x : r.holes)
    holes.push_back({{"id", x.id}, {"center", vec(x.center)}, {"normal", vec(x.normal)}, {"heated", x.heated},
                     {"group", x.group}});
  h["holes"] = holes;
  os << h.dump() << '\n';
  for (const auto& s : r.steps) {
    json j = {{"type", "step"},         {"t", s.t},
              {"robot", s.robot},       {"state", s.state},
              {"position", vec(s.position)}, {"yaw", s.yaw},
              {"true_position", vec(s.true_position)}, {"true_yaw", s.true_yaw},
              {"localized", s.localized}, {"map", s.map},
              {"pump", s.pump},         {"volume", s.volume},
              {"water_remaining", s.water_remaining}, {"reason", s.reason},
              {"command", s.command},   {"goal_position", opt(s.goal_position)},
              {"goal_yaw", s.goal_yaw ? json(*s.goal_yaw) : json(nullptr)},
              {"target", opt(s.target)}, {"phase", s.phase},
              {"streak", s.streak},     {"arm_position", opt(s.arm_position)},
              {"arm_rpy_deg", opt(s.arm_rpy)}, {"arm_step", s.arm_step}};
    os << j.dump() << '\n';
  }
  for (const auto& d : r.detections) {
    json j = {{"type", "detection"}, {"t", d.t},          {"robot", d.robot},
              {"kind", d.kind},      {"source", d.source}, {"position", vec(d.position)},
              {"normal", vec(d.normal)}, {"admitted", d.admitted}, {"reason", d.reason},
              {"distance", d.distance ? json(*d.distance) : json(nullptr)}};
    os << j.dump() << '\n';
  }
  for (const auto& l : r.localization) {
    json j = {{"type", "localization"}, {"t", l.t},       {"robot", l.robot},
              {"map", l.map},           {"status", l.status}, {"error", l.error},
              {"raw_error", l.raw_error}, {"delta", l.delta}, {"rms", l.rms},
              {"detail", l.detail}};
    os << j.dump() << '\n';
  }
  for (const auto& s : r.sprays) {
    json j = {{"type", "spray"}, {"t", s.t},      {"robot", s.robot},         {"volume", s.volume},
              {"hole", s.hole},  {"hit_point", vec(s.hit_point)}, {"nozzle", vec(s.nozzle)}};
    os << j.dump() << '\n';
  }
  json robots = json::array();
  for (const auto& x : r.robots)
    robots.push_back({{"name", x.name}, {"kind", x.kind}, {"final_state", x.final_state},
                      {"water_initial", x.water_initial}, {"water_remaining", x.water_remaining}});
  json summary = {{"type", "summary"},      {"end_time", r.end_time},      {"complete", r.complete},
                  {"abort_reason", r.abort_reason}, {"water_by_hole", r.water_by_hole},
                  {"water_missed", r.water_missed}, {"robots", robots}};
  os << summary.dump() << '\n';
  return os.str();
}

/// Inverse of to_jsonl. A missing summary line marks the report incomplete.
inline MissionReport from_jsonl(const std::string& text) {
  using detail::json;
  using detail::vec;
  MissionReport r;
  r.complete = false;
  bool header = false, summary = false;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto optv = [](const json& j, const char* k) -> std::optional<Vec3> {
    if (!j.contains(k) || j[k].is_null()) return std::nullopt;
    return vec(j[k]);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type");
      if (type == "header") {
        header = true;
        r.scenario = j.at("scenario");
        r.seed = j.at("seed");
        r.duration = j.at("duration");
        const auto& c = j.at("camera");
        r.camera = {c.at("fx"), c.at("fy"), c.at("cx"), c.at("cy"), c.at("width"), c.at("height")};
        r.recess_depth = j.at("recess_depth");
        for (const auto& h : j.at("holes"))
          r.holes.push_back({h.at("id"), vec(h.at("center")), vec(h.at("normal")), h.at("heated"), h.at("group")});
      } else if (type == "step") {
        StepRecord s;
        s.t = j.at("t");
        s.robot = j.at("robot");
        s.state = j.at("state");
        s.position = vec(j.at("position"));
        s.yaw = j.at("yaw");
        s.true_position = vec(j.at("true_position"));
        s.true_yaw = j.at("true_yaw");
        s.localized = j.at("localized");
        s.map = j.at("map");
        s.pump = j.at("pump");
        s.volume = j.at("volume");
        s.water_remaining = j.at("water_remaining");
        s.reason = j.at("reason");
        s.command = j.at("command");
        s.goal_position = optv(j, "goal_position");
        if (!j.at("goal_yaw").is_null()) s.goal_yaw = j.at("goal_yaw").get<double>();
        s.target = optv(j, "target");
        s.phase = j.at("phase");
        s.streak = j.at("streak");
        s.arm_position = optv(j, "arm_position");
        s.arm_rpy = optv(j, "arm_rpy_deg");
        s.arm_step = j.at("arm_step");
        r.steps.push_back(s);
      } else if (type == "detection") {
        DetectionRecord d;
        d.t = j.at("t");
        d.robot = j.at("robot");
        d.kind = j.at("kind");
        d.source = j.at("source");
        d.position = vec(j.at("position"));
        d.normal = vec(j.at("normal"));
        d.admitted = j.at("admitted");
        d.reason = j.at("reason");
        if (!j.at("distance").is_null()) d.distance = j.at("distance").get<double>();
        r.detections.push_back(d);
      } else if (type == "localization") {
        LocalizationRecord l;
        l.t = j.at("t");
        l.robot = j.at("robot");
        l.map = j.at("map");
        l.status = j.at("status");
        l.error = j.at("error");
        l.raw_error = j.at("raw_error");
        l.delta = j.at("delta");
        l.rms = j.at("rms");
        l.detail = j.at("detail");
        r.localization.push_back(l);
      } else if (type == "spray") {
        r.sprays.push_back({j.at("t"), j.at("robot"), j.at("volume"), j.at("hole"), vec(j.at("hit_point")),
                            vec(j.at("nozzle"))});
      } else if (type == "summary") {
        summary = true;
        r.end_time = j.at("end_time");
        r.complete = j.at("complete");
        r.abort_reason = j.at("abort_reason");
        r.water_by_hole = j.at("water_by_hole").get<std::map<std::string, double>>();
        r.water_missed = j.at("water_missed");
        for (const auto& x : j.at("robots"))
          r.robots.push_back({x.at("name"), x.at("kind"), x.at("final_state"), x.at("water_initial"),
                              x.at("water_remaining")});
      } else {
        throw ParseError("unknown record type '" + type + "'", lineno);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed report record: ") + e.what(), lineno);
    }
  }
  if (!header) throw ParseError("report has no header record");
  if (!summary) r.complete = false;
  return r;
}

/// Per-robot text trace: `t state x y z yaw pump water_remaining reason`.
inline std::string trace_text(const MissionReport& r, const std::string& robot) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  for (const auto& s : r.steps) {
    if (s.robot != robot) continue;
    os << s.t << ' ' << s.state << ' ' << s.position.x() << ' ' << s.position.y() << ' ' << s.position.z() << ' '
       << rad2deg(s.yaw) << ' ' << (s.pump ? 1 : 0) << ' ' << s.water_remaining << ' '
       << (s.reason.empty() ? "-" : s.reason) << '\n';
  }
  return os.str();
}

}  // namespace emberpipe::mission
