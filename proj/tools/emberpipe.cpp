// emberpipe command-line interface.
//
// Exit codes: 0 success, 2 parse or validation error, 3 mission abort,
// 1 any other failure. EMBERPIPE_LOG=error|warn|info|debug sets stderr verbosity.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emberpipe/emberpipe.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace emberpipe;

namespace {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level log_level() {
  const char* env = std::getenv("EMBERPIPE_LOG");
  if (!env) return Level::Warn;
  const std::string v = env;
  if (v == "error" || v == "0") return Level::Error;
  if (v == "info" || v == "2") return Level::Info;
  if (v == "debug" || v == "3") return Level::Debug;
  return Level::Warn;
}

void log(Level level, const std::string& msg) {
  static const Level threshold = log_level();
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (int(level) <= int(threshold)) std::cerr << "[" << names[int(level)] << "] " << msg << '\n';
}

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Pose pose_from(const std::vector<double>& v) {
  if (v.size() == 4) return Pose::from_position_yaw(Vec3(v[0], v[1], v[2]), deg2rad(v[3]));
  if (v.size() == 6)
    return Pose::from_xyz_rpy(v[0], v[1], v[2], deg2rad(v[3]), deg2rad(v[4]), deg2rad(v[5]));
  throw DegenerateInput("pose needs 4 values (x y z yaw_deg) or 6 values (x y z roll pitch yaw, degrees)");
}

json pose_json(const Pose& p) {
  return {{"position", vec(p.translation)},
          {"rpy_deg", json::array({rad2deg(p.roll()), rad2deg(p.pitch()), rad2deg(p.yaw())})}};
}

PinholeCamera camera_from(const std::vector<double>& v) {
  PinholeCamera cam;
  if (v.empty()) return cam;
  if (v.size() != 6) throw DegenerateInput("camera needs 6 values: fx fy cx cy width height");
  cam = {v[0], v[1], v[2], v[3], int(v[4]), int(v[5])};
  cam.validate();
  return cam;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string out;
  std::string maps_out;
};

int cmd_simulate(const SimulateArgs& a) {
  const auto scn = scenario::load_scenario(a.scenario);
  log(Level::Info, "scenario '" + scn.name + "' with " + std::to_string(scn.robots.size()) + " robot(s)");
  if (!a.maps_out.empty()) {
    fs::create_directories(a.maps_out);
    for (const auto& m : scenario::build_maps(scn)) loc::save_map((fs::path(a.maps_out) / (m.name + ".xyz")).string(), m);
  }
  mission::MissionOptions opts;
  opts.seed = a.seed;
  opts.duration = a.duration;
  const auto t0 = std::chrono::steady_clock::now();
  auto report = mission::run_mission(scn, opts);
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string jsonl = mission::to_jsonl(report);
  if (a.out.empty()) {
    std::cout << jsonl;
  } else {
    fs::create_directories(a.out);
    write_file(fs::path(a.out) / "report.jsonl", jsonl);
    for (const auto& r : report.robots)
      write_file(fs::path(a.out) / (r.name + ".trace"), mission::trace_text(report, r.name));
    json summary = {{"scenario", report.scenario}, {"seed", report.seed},       {"end_time", report.end_time},
                    {"complete", report.complete}, {"water_by_hole", report.water_by_hole},
                    {"water_missed", report.water_missed}};
    for (const auto& r : report.robots) summary["final_state"][r.name] = r.final_state;
    std::cout << summary.dump(2) << '\n';
  }
  std::ostringstream wt;
  wt << std::fixed << std::setprecision(2) << report.wall_time;
  log(Level::Info, "wall time " + wt.str() + " s");
  if (!report.complete) {
    log(Level::Error, "mission aborted: " + report.abort_reason);
    return 3;
  }
  return 0;
}

struct HolesArgs {
  std::string cloud;
  std::vector<double> pose;
  double min_diameter = 0.10, max_diameter = 0.20, max_range = 5.0, resolution = 0.01;
};

int cmd_detect_holes(const HolesArgs& a) {
  const auto file = read_cloud(a.cloud);
  holes::HoleDetectorParams p;
  p.min_diameter = a.min_diameter;
  p.max_diameter = a.max_diameter;
  p.max_range = a.max_range;
  p.resolution = a.resolution;
  const Pose sensor = a.pose.empty() ? Pose::identity() : pose_from(a.pose);
  const auto dets = holes::detect_holes(file.cloud, sensor, p);
  log(Level::Info, std::to_string(dets.size()) + " hole(s) in " + std::to_string(file.cloud.size()) + " points");
  for (const auto& d : dets)
    std::cout << json{{"position", vec(d.position)}, {"normal", vec(d.normal)}, {"diameter", d.diameter},
                      {"score", d.score}}
                     .dump()
              << '\n';
  return 0;
}

struct HeatArgs {
  std::string image;
  double lower = 400.0, upper = 2000.0;
  int min_area = 2;
  std::vector<double> camera;
  std::string cloud;
  std::vector<double> camera_in_lidar;
  std::optional<double> element;
  double recess = 0.0;
};

int cmd_detect_heat(const HeatArgs& a) {
  const auto img = read_pgm(a.image);
  const auto cam = camera_from(a.camera);
  std::optional<PointCloud> cloud;
  if (!a.cloud.empty()) cloud = read_cloud(a.cloud).cloud;
  const thermal::Extrinsics extr{optical_frame(a.camera_in_lidar.empty() ? Pose::identity() : pose_from(a.camera_in_lidar))};
  const auto contours = thermal::detect_heat(img, a.lower, a.upper, a.min_area);
  for (const auto& c : contours) {
    json j = {{"area", c.area},
              {"bbox", json::array({c.u0, c.v0, c.u1, c.v1})},
              {"center_of_intensity", json::array({c.center_of_intensity.x(), c.center_of_intensity.y()})},
              {"max_intensity", c.max_intensity}};
    if (cloud) {
      try {
        const auto d = thermal::localize_heat_lidar(c, *cloud, extr, cam, Pose::identity());
        j["lidar"] = {{"position", vec(d.position)}, {"normal", vec(d.normal)}};
      } catch (const InsufficientSupport& e) {
        j["lidar"] = nullptr;
        log(Level::Warn, e.what());
      }
    }
    if (a.element) {
      try {
        const auto est =
            thermal::estimate_distance_bbox(c, cam, *a.element, study::recess_calibration(a.recess));
        j["bbox"] = {{"distance", est.distance}, {"position", vec(est.detection.position)}};
      } catch (const OutOfRange& e) {
        j["bbox"] = nullptr;
        log(Level::Warn, e.what());
      }
    }
    std::cout << j.dump() << '\n';
  }
  return 0;
}

struct CalibrateArgs {
  std::string observations;
  std::vector<double> camera;
  std::vector<double> initial;
};

int cmd_calibrate(const CalibrateArgs& a) {
  std::ifstream in(a.observations);
  if (!in) throw ParseError("cannot open '" + a.observations + "'");
  std::vector<thermal::CalibrationObservation> obs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double x, y, z, u, v;
    if (!(ls >> x >> y >> z >> u >> v)) throw ParseError("expected 'x y z u v'", lineno);
    obs.push_back({Vec3(x, y, z), Vec2(u, v)});
  }
  const auto cam = camera_from(a.camera);
  const thermal::Extrinsics init{optical_frame(a.initial.empty() ? Pose::identity() : pose_from(a.initial))};
  const auto res = thermal::calibrate_extrinsics(obs, cam, init);
  json j = {{"camera_in_lidar_optical", pose_json(res.extrinsics.thermal_camera_in_lidar_frame)},
            {"residual_px", res.residual_px},
            {"iterations", res.iterations},
            {"residual_history", res.residual_history}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

struct ReplayArgs {
  std::string detections;
};

// Lines: t kind px py pz nx ny nz rx ry rz (r = robot position).
int cmd_filter_replay(const ReplayArgs& a) {
  std::ifstream in(a.detections);
  if (!in) throw ParseError("cannot open '" + a.detections + "'");
  filter::TrackerState s;
  std::string line, kind;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double t, px, py, pz, nx, ny, nz, rx, ry, rz;
    if (!(ls >> t >> kind >> px >> py >> pz >> nx >> ny >> nz >> rx >> ry >> rz))
      throw ParseError("expected 't kind px py pz nx ny nz rx ry rz'", lineno);
    const auto k = parse_detection_kind(kind);
    if (!k) throw ParseError("unknown detection kind '" + kind + "'", lineno);
    s = filter::check_timeout(s, t);
    const Detection d{Vec3(px, py, pz), Vec3(nx, ny, nz).normalized(), *k, t};
    const auto r = filter::ingest(s, d, Vec3(rx, ry, rz), t);
    s = r.state;
    json j = {{"t", t},
              {"kind", kind},
              {"admitted", r.admitted},
              {"reason", r.reason},
              {"phase", filter::to_string(s.phase)}};
    if (s.phase == filter::Phase::Tracking) {
      const auto e = filter::estimate(s);
      j["estimate"] = {{"position", vec(e.position)}, {"normal", vec(e.normal)}};
    }
    std::cout << j.dump() << '\n';
  }
  return 0;
}

struct LocalizeArgs {
  std::string scan, map;
  std::vector<double> initial, ego;
};

int cmd_localize(const LocalizeArgs& a) {
  const auto scan = read_cloud(a.scan).cloud;
  const auto map = loc::load_map(a.map);
  const Pose init = pose_from(a.initial);
  const auto reg = loc::register_scan(scan, map, init);
  json j = {{"pose", pose_json(reg.pose)},
            {"rms", reg.rms},
            {"inlier_fraction", reg.inlier_fraction},
            {"iterations", reg.iterations},
            {"map", map.name}};
  if (!a.ego.empty()) {
    const auto st = loc::update_offset({}, reg.pose, pose_from(a.ego));
    j["offset"] = pose_json(*st.offset);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

struct MetricsArgs {
  std::string report;
  std::string csv;
  int seeds = 20;
  double threshold = 0.3;
};

int cmd_metrics(const MetricsArgs& a) {
  const auto report = mission::from_jsonl(scenario::read_text_file(a.report));
  const auto m = metrics::eval_metrics(report, a.threshold);
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j = {{"detection_position_rms", opt(m.detection_position_rms)},
            {"detection_normal_rms_deg", opt(m.detection_normal_rms_deg)},
            {"localization_rms", opt(m.localization_rms)},
            {"time_to_extinguish", opt(m.time_to_extinguish)},
            {"water_sprayed", m.water_sprayed},
            {"water_on_target", m.water_on_target},
            {"water_efficiency", opt(m.water_efficiency)},
            {"detections_used", m.detections_used}};
  std::cout << j.dump(2) << '\n';
  if (!a.csv.empty()) {
    write_file(a.csv, study::to_csv(metrics::distance_comparison(report, a.seeds)));
    log(Level::Info, "distance comparison written to " + a.csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fire detection and extinguishing pipeline"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run a closed-loop mission");
  s->add_option("--scenario", sim.scenario, "Scenario JSON")->required();
  s->add_option("--seed", sim.seed, "Override the scenario seed");
  s->add_option("--duration", sim.duration, "Override the duration cap, seconds");
  s->add_option("--out", sim.out, "Output directory (report.jsonl and per-robot traces); stdout when absent");
  s->add_option("--maps-out", sim.maps_out, "Also write the reference maps to this directory");

  HolesArgs ha;
  auto* h = app.add_subcommand("detect-holes", "Detect circular holes in a LiDAR cloud");
  h->add_option("--cloud", ha.cloud, "Cloud file (x y z [intensity] per line)")->required();
  h->add_option("--pose", ha.pose, "Sensor pose: x y z yaw_deg or x y z roll pitch yaw (deg)");
  h->add_option("--min-diameter", ha.min_diameter);
  h->add_option("--max-diameter", ha.max_diameter);
  h->add_option("--max-range", ha.max_range);
  h->add_option("--resolution", ha.resolution);

  HeatArgs he;
  auto* t = app.add_subcommand("detect-heat", "Detect heat contours in a thermal PGM and localize them");
  t->add_option("--image", he.image, "Thermal frame (PGM, kelvin)")->required();
  t->add_option("--lower", he.lower);
  t->add_option("--upper", he.upper);
  t->add_option("--min-area", he.min_area);
  t->add_option("--camera", he.camera, "fx fy cx cy width height");
  t->add_option("--cloud", he.cloud, "LiDAR cloud for box localization");
  t->add_option("--camera-in-lidar", he.camera_in_lidar, "Camera housing pose in the LiDAR frame");
  t->add_option("--element", he.element, "Heating element size for the bbox range, m");
  t->add_option("--recess", he.recess, "Element recess depth behind the wall, m");

  CalibrateArgs ca;
  auto* c = app.add_subcommand("calibrate", "Estimate LiDAR to thermal camera extrinsics");
  c->add_option("--observations", ca.observations, "Lines of 'x y z u v'")->required();
  c->add_option("--camera", ca.camera, "fx fy cx cy width height");
  c->add_option("--initial", ca.initial, "Initial camera housing pose in the LiDAR frame");

  ReplayArgs ra;
  auto* f = app.add_subcommand("filter-replay", "Replay detections through the target filter");
  f->add_option("--detections", ra.detections, "Lines of 't kind px py pz nx ny nz rx ry rz'")->required();

  LocalizeArgs la;
  auto* l = app.add_subcommand("localize", "Register a scan against a reference map");
  l->add_option("--scan", la.scan, "Scan cloud in the LiDAR frame")->required();
  l->add_option("--map", la.map, "Reference map cloud")->required();
  l->add_option("--initial", la.initial, "Initial LiDAR pose guess")->required();
  l->add_option("--ego", la.ego, "Ego-motion pose estimate, to report the offset");

  MetricsArgs ma;
  auto* m = app.add_subcommand("metrics", "Aggregate statistics over a mission report");
  m->add_option("--report", ma.report, "report.jsonl")->required();
  m->add_option("--csv", ma.csv, "Write the distance-estimator comparison table here");
  m->add_option("--seeds", ma.seeds, "Seeds per range bin for the comparison table");
  m->add_option("--threshold", ma.threshold, "Liters into heated holes counted as extinguished");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*h) return cmd_detect_holes(ha);
    if (*t) return cmd_detect_heat(he);
    if (*c) return cmd_calibrate(ca);
    if (*f) return cmd_filter_replay(ra);
    if (*l) return cmd_localize(la);
    if (*m) return cmd_metrics(ma);
  } catch (const ValidationError& e) {
    log(Level::Error, "validation failed:");
    for (const auto& v : e.violations()) std::cerr << "  - " << v << '\n';
    return 2;
  } catch (const ParseError& e) {
    log(Level::Error, e.what());
    return 2;
  } catch (const IncompleteReport& e) {
    log(Level::Error, e.what());
    return 3;
  } catch (const std::exception& e) {
    log(Level::Error, e.what());
    return 1;
  }
  return 1;
}
