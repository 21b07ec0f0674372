#pragma once

// Aggregate statistics over a mission report, plus the bbox vs LiDAR
// distance-estimator comparison table.

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emberpipe/arena.hpp"
#include "emberpipe/errors.hpp"
#include "emberpipe/mission.hpp"
#include "emberpipe/range_study.hpp"

namespace emberpipe::metrics {

struct Metrics {
  std::optional<double> detection_position_rms;  // m, admitted detections vs nearest hole center
  std::optional<double> detection_normal_rms_deg;
  std::optional<double> localization_rms;  // m, localized vs true position over localized steps
  std::optional<double> time_to_extinguish;  // s, heated holes reach the threshold volume
  double water_sprayed = 0.0;
  double water_on_target = 0.0;  // into heated holes
  std::optional<double> water_efficiency;
  std::size_t detections_used = 0;
  std::size_t localized_steps = 0;
};

/// Ground truth taken from `holes`. Throws IncompleteReport for aborted or empty reports.
inline Metrics eval_metrics(const mission::MissionReport& report, const std::vector<mission::HoleTruth>& holes,
                            double extinguish_threshold = 0.3) {
  if (!report.complete) throw IncompleteReport("report is incomplete: " + report.abort_reason);
  if (report.steps.empty()) throw IncompleteReport("report has an empty trace");
  Metrics m;

  double pos_sq = 0.0, ang_sq = 0.0;
  for (const auto& d : report.detections) {
    if (!d.admitted || holes.empty()) continue;
    const mission::HoleTruth* best = &holes.front();
    for (const auto& h : holes)
      if ((h.center - d.position).squaredNorm() < (best->center - d.position).squaredNorm()) best = &h;
    pos_sq += (best->center - d.position).squaredNorm();
    const double a = rad2deg(angle_between(d.normal, best->normal));
    ang_sq += a * a;
    ++m.detections_used;
  }
  if (m.detections_used) {
    m.detection_position_rms = std::sqrt(pos_sq / double(m.detections_used));
    m.detection_normal_rms_deg = std::sqrt(ang_sq / double(m.detections_used));
  }

  double loc_sq = 0.0;
  for (const auto& s : report.steps) {
    if (!s.localized) continue;
    loc_sq += (s.position - s.true_position).squaredNorm();
    ++m.localized_steps;
  }
  if (m.localized_steps) m.localization_rms = std::sqrt(loc_sq / double(m.localized_steps));

  std::set<std::string> heated;
  for (const auto& h : holes)
    if (h.heated) heated.insert(h.id);
  for (const auto& s : report.sprays) {
    m.water_sprayed += s.volume;
    if (!heated.count(s.hole)) continue;
    m.water_on_target += s.volume;
    if (!m.time_to_extinguish && m.water_on_target >= extinguish_threshold - 1e-12) m.time_to_extinguish = s.t;
  }
  if (m.water_sprayed > 0.0) m.water_efficiency = m.water_on_target / m.water_sprayed;
  return m;
}

inline Metrics eval_metrics(const mission::MissionReport& report, double extinguish_threshold = 0.3) {
  return eval_metrics(report, report.holes, extinguish_threshold);
}

inline Metrics eval_metrics(const mission::MissionReport& report, const sim::ArenaModel& arena,
                            double extinguish_threshold = 0.3) {
  std::vector<mission::HoleTruth> holes;
  for (const auto& h : arena.holes)
    holes.push_back({h.id, h.center, h.normal, h.heated, h.group.empty() ? h.id : h.group});
  return eval_metrics(report, holes, extinguish_threshold);
}

/// Range-binned bbox vs LiDAR-projection errors for the report's thermal camera.
inline std::vector<study::RangeBin> distance_comparison(const mission::MissionReport& report, int seeds = 20) {
  study::RangeStudyParams p;
  p.camera = report.camera;
  p.recess_depth = report.recess_depth;
  p.seeds = seeds;
  return study::summarize(study::run_range_study(p));
}

}  // namespace emberpipe::metrics
