#pragma once

// Scenario documents: strict JSON parsing (unknown keys are errors) with
// defaults, followed by a validation pass that reports every violation.

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "emberpipe/arena.hpp"
#include "emberpipe/autonomy.hpp"
#include "emberpipe/dynamics.hpp"
#include "emberpipe/errors.hpp"
#include "emberpipe/geometry.hpp"
#include "emberpipe/gnss.hpp"
#include "emberpipe/holes.hpp"
#include "emberpipe/localization.hpp"
#include "emberpipe/sensors.hpp"
#include "emberpipe/target_filter.hpp"

namespace emberpipe::scenario {

struct Rates {
  int dynamics = 100;
  int lidar = 10;
  int thermal = 9;
  int fsm = 20;
  int registration = 2;
  int holes = 2;
};

struct MapSpec {
  std::string name;
  Aabb activation;
  std::optional<Aabb> region;  // crop of the sampled surfaces
  double spacing = 0.15;
};

struct ThermalSpec {
  PinholeCamera camera;
  Pose mount;  // housing, x forward; UAV: body frame, UGV: nozzle frame
  double noise = 2.0;
  double lower = 400.0;
  double upper = 2000.0;
  int min_area = 2;
};

struct RobotSpec {
  std::string name;
  sim::RobotKind kind = sim::RobotKind::Uav;
  Pose spawn;
  double water = 1.0;
  double flow_rate = 0.1;
  sim::GnssParams drift;
  sim::MotionLimits limits;
  sim::LidarConfig lidar;
  ThermalSpec thermal;
  Pose nozzle_mount;  // UAV body frame
  double exit_speed = 9.47;
  loc::RegistrationParams registration;
  loc::OffsetBounds offset_bounds;
  filter::FilterParams filter;
  holes::HoleDetectorParams holes;
  autonomy::UavParams uav;
  autonomy::UgvParams ugv;
  double element_size = 0.15;  // heating element width for the bbox range
  double recess_depth = 0.10;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double duration = 120.0;
  Rates rates;
  bool allow_multiple_heated_per_group = false;
  sim::ArenaModel arena;
  std::vector<MapSpec> maps;
  std::vector<RobotSpec> robots;
};

namespace detail {

using json = nlohmann::json;

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + std::size_t(std::count(text.begin(), text.begin() + std::ptrdiff_t(offset), '\n'));
}

/// Line of the first occurrence of `"key"`, 0 when absent.
inline std::size_t line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

/// Object view that records which keys were read so leftovers can be rejected.
class Node {
 public:
  Node(const json& j, std::string path, const std::string& text) : j_(&j), path_(std::move(path)), text_(&text) {
    if (!j.is_object()) fail(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_->contains(key); }

  const json& raw(const std::string& key) const {
    used_.insert(key);
    if (!j_->contains(key)) fail(key, "missing required field");
    return (*j_)[key];
  }

  Node object(const std::string& key) const { return Node(raw(key), sub(key), *text_); }

  double number(const std::string& key) const { return as_number(raw(key), key); }
  double number(const std::string& key, double def) const { return has(key) ? number(key) : def; }

  int integer(const std::string& key, int def) const {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }

  std::uint64_t uint64(const std::string& key, std::uint64_t def) const {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& def) const { return has(key) ? string(key) : def; }

  std::vector<double> numbers(const std::string& key, std::size_t n) const {
    const auto& v = raw(key);
    if (!v.is_array() || v.size() != n) fail(key, "expected an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(as_number(e, key));
    return out;
  }

  Vec3 vec3(const std::string& key) const {
    const auto v = numbers(key, 3);
    return {v[0], v[1], v[2]};
  }
  Vec3 vec3(const std::string& key, const Vec3& def) const { return has(key) ? vec3(key) : def; }

  std::vector<Node> objects(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_array()) fail(key, "expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(v[i], sub(key) + "[" + std::to_string(i) + "]", *text_);
    return out;
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [k, v] : j_->items())
      if (!used_.count(k)) throw ParseError("unknown field '" + sub(k) + "'", line_of_key(*text_, k));
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ParseError("field '" + (key == path_ ? path_ : sub(key)) + "': " + what, line_of_key(*text_, key));
  }

 private:
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double as_number(const json& v, const std::string& key) const {
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }

  const json* j_;
  std::string path_;
  const std::string* text_;
  mutable std::set<std::string> used_;
};

/// {"position": [x,y,z], "yaw_deg": a} or {"position": [...], "rpy_deg": [r,p,y]}.
inline Pose read_pose(const Node& n) {
  const Vec3 p = n.vec3("position", Vec3::Zero());
  if (n.has("yaw_deg") && n.has("rpy_deg")) n.fail("rpy_deg", "give either yaw_deg or rpy_deg");
  Pose out = Pose::from_translation(p);
  if (n.has("yaw_deg")) out = Pose::from_position_yaw(p, deg2rad(n.number("yaw_deg")));
  if (n.has("rpy_deg")) {
    const auto r = n.numbers("rpy_deg", 3);
    out = Pose::from_xyz_rpy(p.x(), p.y(), p.z(), deg2rad(r[0]), deg2rad(r[1]), deg2rad(r[2]));
  }
  n.finish();
  return out;
}

inline Pose read_pose(const Node& parent, const std::string& key, const Pose& def) {
  return parent.has(key) ? read_pose(parent.object(key)) : def;
}

inline Aabb read_box(const Node& n) {
  Aabb b{n.vec3("min"), n.vec3("max")};
  n.finish();
  return b;
}

inline autonomy::Waypoint read_waypoint(const Node& n) {
  autonomy::Waypoint w;
  const Vec3 p = n.vec3("position");
  w.pose = Pose::from_position_yaw(p, deg2rad(n.number("yaw_deg", 0.0)));
  const std::string kind = n.string("kind", "transfer");
  if (kind == "transfer") {
    w.kind = autonomy::WaypointKind::Transfer;
  } else if (kind == "observation") {
    w.kind = autonomy::WaypointKind::Observation;
  } else {
    n.fail("kind", "expected 'transfer' or 'observation'");
  }
  w.hover_duration = n.number("hover", w.hover_duration);
  n.finish();
  return w;
}

inline sim::ArenaModel read_arena(const Node& n) {
  sim::ArenaModel a;
  a.bounds = read_box(n.object("bounds"));
  a.floor_z = n.number("floor_z", a.floor_z);
  a.ambient_temp = n.number("ambient_temp", a.ambient_temp);
  for (const auto& w : n.objects("walls")) {
    sim::Facet f;
    f.id = w.string("id");
    f.corner = w.vec3("corner");
    f.edge1 = w.vec3("edge1");
    f.edge2 = w.vec3("edge2");
    const std::string m = w.string("material", "opaque");
    if (m == "opaque") {
      f.material = sim::Material::Opaque;
    } else if (m == "acrylic") {
      f.material = sim::Material::Acrylic;
    } else {
      w.fail("material", "expected 'opaque' or 'acrylic'");
    }
    w.finish();
    a.walls.push_back(f);
  }
  if (n.has("holes"))
    for (const auto& h : n.objects("holes")) {
      sim::Hole hole;
      hole.id = h.string("id");
      hole.center = h.vec3("center");
      hole.normal = h.vec3("normal");
      hole.diameter = h.number("diameter", hole.diameter);
      hole.recess_depth = h.number("recess_depth", hole.recess_depth);
      hole.heated = h.boolean("heated", false);
      hole.heat_temp = h.number("heat_temp", hole.heat_temp);
      const std::string e = h.string("enclosure", "none");
      if (e == "none") {
        hole.enclosure = sim::Enclosure::None;
      } else if (e == "acrylic") {
        hole.enclosure = sim::Enclosure::Acrylic;
      } else {
        h.fail("enclosure", "expected 'none' or 'acrylic'");
      }
      hole.group = h.string("group", "");
      h.finish();
      a.holes.push_back(hole);
    }
  n.finish();
  return a;
}

inline void read_limits(const Node& n, sim::MotionLimits& l) {
  l.max_speed = n.vec3("max_speed", l.max_speed);
  l.max_accel = n.number("max_accel", l.max_accel);
  if (n.has("max_yaw_rate_deg")) l.max_yaw_rate = deg2rad(n.number("max_yaw_rate_deg"));
  l.position_gain = n.number("position_gain", l.position_gain);
  l.yaw_gain = n.number("yaw_gain", l.yaw_gain);
  l.arm_speed = n.number("arm_speed", l.arm_speed);
  if (n.has("arm_rate_deg")) l.arm_rate = deg2rad(n.number("arm_rate_deg"));
  n.finish();
}

inline void read_lidar(const Node& n, sim::LidarConfig& c) {
  c.rings = n.integer("rings", c.rings);
  c.horizontal_steps = n.integer("horizontal_steps", c.horizontal_steps);
  if (n.has("vfov_deg")) {
    const auto v = n.numbers("vfov_deg", 2);
    c.vfov_min = deg2rad(v[0]);
    c.vfov_max = deg2rad(v[1]);
  }
  c.max_range = n.number("max_range", c.max_range);
  c.min_range = n.number("min_range", c.min_range);
  c.range_noise = n.number("range_noise", c.range_noise);
  c.mount = read_pose(n, "mount", c.mount);
  n.finish();
}

inline void read_thermal(const Node& n, ThermalSpec& t) {
  if (n.has("camera")) {
    const Node c = n.object("camera");
    t.camera.fx = c.number("fx", t.camera.fx);
    t.camera.fy = c.number("fy", t.camera.fy);
    t.camera.cx = c.number("cx", t.camera.cx);
    t.camera.cy = c.number("cy", t.camera.cy);
    t.camera.width = c.integer("width", t.camera.width);
    t.camera.height = c.integer("height", t.camera.height);
    c.finish();
  }
  t.mount = read_pose(n, "mount", t.mount);
  t.noise = n.number("noise", t.noise);
  t.lower = n.number("lower", t.lower);
  t.upper = n.number("upper", t.upper);
  t.min_area = n.integer("min_area", t.min_area);
  n.finish();
}

inline void read_filter(const Node& n, filter::FilterParams& f) {
  if (n.has("max_view_angle_deg")) f.max_view_angle = deg2rad(n.number("max_view_angle_deg"));
  f.ball_radius = n.number("ball_radius", f.ball_radius);
  if (n.has("max_normal_angle_deg")) f.max_normal_angle = deg2rad(n.number("max_normal_angle_deg"));
  f.init_required = std::size_t(n.integer("init_required", int(f.init_required)));
  f.init_window = std::size_t(n.integer("init_window", int(f.init_window)));
  f.init_radius = n.number("init_radius", f.init_radius);
  f.history_size = std::size_t(n.integer("history_size", int(f.history_size)));
  f.precedence_window = n.number("precedence_window", f.precedence_window);
  f.timeout = n.number("timeout", f.timeout);
  n.finish();
}

inline void read_uav(const Node& n, autonomy::UavParams& u) {
  for (const auto& w : n.objects("route")) u.route.push_back(read_waypoint(w));
  if (n.has("altitude_corridor")) {
    const auto c = n.numbers("altitude_corridor", 2);
    u.z_min = c[0];
    u.z_max = c[1];
  }
  u.home = n.vec3("home", u.home);
  u.arrival_tolerance = n.number("arrival_tolerance", u.arrival_tolerance);
  u.required_streak = n.integer("required_streak", u.required_streak);
  if (n.has("max_heading_angle_deg")) u.max_heading_angle = deg2rad(n.number("max_heading_angle_deg"));
  u.loss_timeout = n.number("loss_timeout", u.loss_timeout);
  u.standoff = n.number("standoff", u.standoff);
  u.height_offset = n.number("height_offset", u.height_offset);
  u.pos_tol = n.number("pos_tol", u.pos_tol);
  if (n.has("yaw_tol_deg")) u.yaw_tol = deg2rad(n.number("yaw_tol_deg"));
  u.rearm_fraction = n.number("rearm_fraction", u.rearm_fraction);
  n.finish();
}

inline void read_ugv(const Node& n, RobotSpec& r) {
  auto& g = r.ugv;
  for (const auto& s : n.objects("slots")) {
    autonomy::FireSlot slot;
    slot.id = s.string("id");
    for (const auto& w : s.objects("approach")) slot.approach.push_back(read_waypoint(w));
    slot.scan_arm = read_pose(s.object("scan_arm"));
    if (s.has("rect")) {
      const Node rc = s.object("rect");
      slot.rect.width = rc.number("width", slot.rect.width);
      slot.rect.height = rc.number("height", slot.rect.height);
      slot.rect.period = rc.number("period", slot.rect.period);
      rc.finish();
    }
    s.finish();
    g.slots.push_back(slot);
  }
  if (n.has("arm")) {
    const Node a = n.object("arm");
    g.arm.shoulder = a.vec3("shoulder", g.arm.shoulder);
    g.arm.reach = a.number("reach", g.arm.reach);
    g.arm.min_z = a.number("min_z", g.arm.min_z);
    g.arm.max_z = a.number("max_z", g.arm.max_z);
    g.arm.max_head = a.number("max_head", g.arm.max_head);
    g.arm.standoff = a.number("standoff", g.arm.standoff);
    g.arm.max_step = a.number("max_step", g.arm.max_step);
    g.arm.exit_speed = a.number("exit_speed", g.arm.exit_speed);
    a.finish();
  }
  g.water_per_fire = n.number("water_per_fire", g.water_per_fire);
  g.arrival_tolerance = n.number("arrival_tolerance", g.arrival_tolerance);
  if (n.has("arrival_yaw_tolerance_deg")) g.arrival_yaw_tolerance = deg2rad(n.number("arrival_yaw_tolerance_deg"));
  g.aligned_translation = n.number("aligned_translation", g.aligned_translation);
  if (n.has("aligned_rotation_deg")) g.aligned_rotation = deg2rad(n.number("aligned_rotation_deg"));
  if (n.has("spray_amplitude_deg")) g.spray_amplitude = deg2rad(n.number("spray_amplitude_deg"));
  g.spray_period = n.number("spray_period", g.spray_period);
  r.element_size = n.number("element_size", r.element_size);
  r.recess_depth = n.number("recess_depth", r.recess_depth);
  n.finish();
}

inline RobotSpec read_robot(const Node& n) {
  RobotSpec r;
  r.name = n.string("name");
  const std::string kind = n.string("kind");
  if (kind == "uav") {
    r.kind = sim::RobotKind::Uav;
  } else if (kind == "ugv") {
    r.kind = sim::RobotKind::Ugv;
    r.thermal.mount = Pose::from_translation(Vec3(0.0, 0.0, 0.06));
    r.lidar.mount = Pose::from_translation(Vec3(0.0, 0.0, 0.6));
  } else {
    n.fail("kind", "expected 'uav' or 'ugv'");
  }
  if (r.kind == sim::RobotKind::Uav) {
    const double down = deg2rad(10.0);
    r.lidar.mount = Pose::from_xyz_rpy(0.1, 0.0, 0.1, 0.0, down, 0.0);
    r.thermal.mount = Pose::from_xyz_rpy(0.15, 0.0, 0.05, 0.0, down, 0.0);
    r.nozzle_mount = Pose::from_xyz_rpy(0.3, 0.0, 0.15, 0.0, down, 0.0);
  }
  r.spawn = read_pose(n.object("spawn"));
  r.water = n.number("water", r.water);
  r.flow_rate = n.number("flow_rate", r.flow_rate);
  if (n.has("drift")) {
    const Node d = n.object("drift");
    r.drift.sigma = d.number("sigma", r.drift.sigma);
    r.drift.bound = d.number("bound", r.drift.bound);
    d.finish();
  }
  if (n.has("limits")) read_limits(n.object("limits"), r.limits);
  if (n.has("lidar")) read_lidar(n.object("lidar"), r.lidar);
  if (n.has("thermal")) read_thermal(n.object("thermal"), r.thermal);
  if (n.has("nozzle")) {
    const Node z = n.object("nozzle");
    r.nozzle_mount = read_pose(z, "mount", r.nozzle_mount);
    r.exit_speed = z.number("exit_speed", r.exit_speed);
    z.finish();
  }
  if (n.has("registration")) {
    const Node g = n.object("registration");
    r.registration.max_iterations = g.integer("max_iterations", r.registration.max_iterations);
    r.registration.gate_start = g.number("gate_start", r.registration.gate_start);
    r.registration.gate_end = g.number("gate_end", r.registration.gate_end);
    r.registration.voxel = g.number("voxel", r.registration.voxel);
    r.registration.min_inlier_fraction = g.number("min_inlier_fraction", r.registration.min_inlier_fraction);
    r.registration.max_rms = g.number("max_rms", r.registration.max_rms);
    if (g.has("max_offset_translation")) r.offset_bounds.max_translation = g.number("max_offset_translation");
    if (g.has("max_offset_rotation_deg"))
      r.offset_bounds.max_rotation = deg2rad(g.number("max_offset_rotation_deg"));
    g.finish();
  }
  if (n.has("filter")) read_filter(n.object("filter"), r.filter);
  if (n.has("holes")) {
    const Node h = n.object("holes");
    r.holes.min_diameter = h.number("min_diameter", r.holes.min_diameter);
    r.holes.max_diameter = h.number("max_diameter", r.holes.max_diameter);
    r.holes.max_range = h.number("max_range", r.holes.max_range);
    r.holes.resolution = h.number("resolution", r.holes.resolution);
    h.finish();
  }
  r.uav.flow_rate = r.flow_rate;
  r.ugv.flow_rate = r.flow_rate;
  if (r.kind == sim::RobotKind::Uav) {
    read_uav(n.object("uav"), r.uav);
    if (n.has("ugv")) n.fail("ugv", "only valid for kind 'ugv'");
  } else {
    read_ugv(n.object("ugv"), r);
    if (n.has("uav")) n.fail("uav", "only valid for kind 'uav'");
  }
  n.finish();
  return r;
}

/// True when the open segment p-q passes through the facet.
inline bool segment_crosses(const sim::Facet& f, const Vec3& p, const Vec3& q) {
  const Vec3 n = f.normal();
  const double dp = n.dot(p - f.corner), dq = n.dot(q - f.corner);
  if (dp * dq >= 0.0) return false;
  const Vec3 x = p + (dp / (dp - dq)) * (q - p);
  return f.contains_on_plane(x);
}

}  // namespace detail

inline std::string fmt_vec(const Vec3& v) {
  std::ostringstream os;
  os << "(" << v.x() << ", " << v.y() << ", " << v.z() << ")";
  return os.str();
}

/// Every violation of the scenario invariants; empty when valid.
inline std::vector<std::string> validate(Scenario& s) {
  std::vector<std::string> errs;
  if (!(s.duration > 0.0)) errs.push_back("duration must be > 0");
  const auto& r = s.rates;
  if (r.dynamics < 1) errs.push_back("rates.dynamics must be >= 1");
  for (auto [name, v] : {std::pair{"lidar", r.lidar}, {"thermal", r.thermal}, {"fsm", r.fsm},
                         {"registration", r.registration}, {"holes", r.holes}})
    if (v < 1 || v > r.dynamics) errs.push_back(std::string("rates.") + name + " must lie in [1, rates.dynamics]");
  try {
    s.arena.validate();
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) errs.push_back("arena: " + v);
  }
  const Aabb& b = s.arena.bounds;
  if (!s.allow_multiple_heated_per_group) {
    std::map<std::string, int> heated;
    for (const auto& h : s.arena.holes)
      if (h.heated) ++heated[h.group.empty() ? h.id : h.group];
    for (const auto& [g, c] : heated)
      if (c > 1) errs.push_back("fire group '" + g + "' has " + std::to_string(c) + " heated holes");
  }
  std::set<std::string> names;
  if (s.maps.empty()) errs.push_back("at least one map is required");
  for (const auto& m : s.maps) {
    if (!names.insert("map:" + m.name).second) errs.push_back("duplicate map name '" + m.name + "'");
    if (!m.activation.valid()) errs.push_back("map '" + m.name + "': activation min exceeds max");
    if (!(m.spacing > 0.0)) errs.push_back("map '" + m.name + "': spacing must be > 0");
  }
  if (s.robots.empty()) errs.push_back("at least one robot is required");

  auto check_path = [&](const std::string& who, const std::vector<std::pair<std::string, Vec3>>& pts, bool cyclic) {
    for (const auto& [label, p] : pts)
      if (!b.contains(p)) errs.push_back(who + " " + label + " " + fmt_vec(p) + " is outside the arena bounds");
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i + 1 < n + (cyclic && n > 2 ? 1 : 0); ++i) {
      const auto& [la, pa] = pts[i];
      const auto& [lb, pb] = pts[(i + 1) % n];
      for (const auto& w : s.arena.walls)
        if (detail::segment_crosses(w, pa, pb))
          errs.push_back(who + " segment " + la + " -> " + lb + " crosses wall '" + w.id + "'");
    }
  };

  for (auto& rb : s.robots) {
    const std::string who = "robot '" + rb.name + "'";
    if (!names.insert("robot:" + rb.name).second) errs.push_back("duplicate robot name '" + rb.name + "'");
    if (rb.water < 0.0) errs.push_back(who + ": water must be >= 0");
    if (!(rb.flow_rate > 0.0)) errs.push_back(who + ": flow_rate must be > 0");
    if (!(rb.exit_speed > 0.0)) errs.push_back(who + ": nozzle exit_speed must be > 0");
    if (!rb.thermal.camera.valid()) errs.push_back(who + ": invalid thermal camera");
    if (!(rb.thermal.lower < rb.thermal.upper)) errs.push_back(who + ": thermal lower must be < upper");
    try {
      rb.lidar.validate();
    } catch (const Error& e) {
      errs.push_back(who + ": " + e.what());
    }
    std::vector<std::pair<std::string, Vec3>> pts{{"spawn", rb.spawn.translation}};
    if (rb.kind == sim::RobotKind::Uav) {
      auto& u = rb.uav;
      u.bounds = b;
      if (!(u.z_min < u.z_max)) errs.push_back(who + ": altitude corridor min must be < max");
      if (u.route.empty()) errs.push_back(who + ": route is empty");
      if (!b.contains(u.home)) errs.push_back(who + " home " + fmt_vec(u.home) + " is outside the arena bounds");
      std::vector<std::pair<std::string, Vec3>> route;
      for (std::size_t i = 0; i < u.route.size(); ++i) {
        const Vec3& p = u.route[i].pose.translation;
        const std::string label = "waypoint route[" + std::to_string(i) + "]";
        if (p.z() < u.z_min || p.z() > u.z_max)
          errs.push_back(who + " " + label + " " + fmt_vec(p) + " is outside the altitude corridor");
        route.emplace_back(label, p);
      }
      check_path(who, route, true);
      if (!route.empty()) check_path(who, {pts.front(), route.front()}, false);
    } else {
      auto& g = rb.ugv;
      if (g.slots.size() != 2)
        errs.push_back(who + ": exactly 2 fire slots required, found " + std::to_string(g.slots.size()));
      for (std::size_t k = 0; k < g.slots.size(); ++k) {
        if (g.slots[k].approach.empty()) errs.push_back(who + " slot '" + g.slots[k].id + "': approach is empty");
        for (std::size_t i = 0; i < g.slots[k].approach.size(); ++i)
          pts.emplace_back("waypoint slots[" + std::to_string(k) + "].approach[" + std::to_string(i) + "]",
                           g.slots[k].approach[i].pose.translation);
      }
      if (!(g.water_per_fire > 0.0)) errs.push_back(who + ": water_per_fire must be > 0");
      if (!(rb.element_size > 0.0)) errs.push_back(who + ": element_size must be > 0");
      check_path(who, pts, false);
    }
  }
  return errs;
}

/// Parses and validates; throws ParseError or ValidationError.
inline Scenario parse_scenario(const std::string& text) {
  detail::json doc;
  try {
    doc = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), detail::line_of_offset(text, e.byte ? e.byte - 1 : 0));
  }
  if (!doc.is_object()) throw ParseError("scenario must be a JSON object", 1);
  const detail::Node root(doc, "", text);
  Scenario s;
  s.name = root.string("name", s.name);
  s.seed = root.uint64("seed", s.seed);
  s.duration = root.number("duration", s.duration);
  s.allow_multiple_heated_per_group = root.boolean("allow_multiple_heated_per_group", false);
  if (root.has("rates")) {
    const auto r = root.object("rates");
    s.rates.dynamics = r.integer("dynamics", s.rates.dynamics);
    s.rates.lidar = r.integer("lidar", s.rates.lidar);
    s.rates.thermal = r.integer("thermal", s.rates.thermal);
    s.rates.fsm = r.integer("fsm", s.rates.fsm);
    s.rates.registration = r.integer("registration", s.rates.registration);
    s.rates.holes = r.integer("holes", s.rates.holes);
    r.finish();
  }
  s.arena = detail::read_arena(root.object("arena"));
  for (const auto& m : root.objects("maps")) {
    MapSpec spec;
    spec.name = m.string("name");
    spec.activation = detail::read_box(m.object("activation"));
    if (m.has("region")) spec.region = detail::read_box(m.object("region"));
    spec.spacing = m.number("spacing", spec.spacing);
    m.finish();
    s.maps.push_back(spec);
  }
  for (const auto& r : root.objects("robots")) s.robots.push_back(detail::read_robot(r));
  root.finish();
  auto errs = validate(s);
  if (!errs.empty()) throw ValidationError(std::move(errs));
  return s;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_text_file(path)); }

/// Reference maps sampled from the arena surfaces, cropped to each region.
inline std::vector<loc::ReferenceMap> build_maps(const Scenario& s) {
  std::vector<loc::ReferenceMap> out;
  for (const auto& m : s.maps) {
    PointCloud cloud = loc::sample_arena_surfaces(s.arena, m.spacing);
    if (m.region) {
      PointCloud cropped;
      cropped.frame_id = cloud.frame_id;
      for (const auto& p : cloud.points)
        if (m.region->contains(p)) cropped.points.push_back(p);
      cloud = std::move(cropped);
    }
    out.push_back(loc::ReferenceMap::build(std::move(cloud), m.name, m.activation));
  }
  return out;
}

}  // namespace emberpipe::scenario
