#pragma once

// Synthetic world geometry: rectangular wall facets, circular holes with a
// recessed plate behind them, and an implicit floor. Everything the sensor
// renderers and the jet model need to intersect rays and arcs with.

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "emberpipe/errors.hpp"
#include "emberpipe/geometry.hpp"

namespace emberpipe::sim {

enum class Material { Opaque, Acrylic };
enum class Enclosure { None, Acrylic };

inline const char* to_string(Material m) { return m == Material::Opaque ? "opaque" : "acrylic"; }
inline const char* to_string(Enclosure e) { return e == Enclosure::None ? "none" : "acrylic"; }

/// Rectangle corner + s*edge1 + t*edge2, s,t in [0,1].
struct Facet {
  std::string id;
  Vec3 corner = Vec3::Zero();
  Vec3 edge1 = Vec3::UnitX();
  Vec3 edge2 = Vec3::UnitY();
  Material material = Material::Opaque;

  Vec3 normal() const { return edge1.cross(edge2).normalized(); }

  /// In-facet coordinates (s, t) of a point lying on the facet plane.
  Vec2 local(const Vec3& p) const {
    const Vec3 r = p - corner;
    return {r.dot(edge1) / edge1.squaredNorm(), r.dot(edge2) / edge2.squaredNorm()};
  }

  bool contains_on_plane(const Vec3& p, double tol = 0.0) const {
    const Vec2 st = local(p);
    const double ts = tol / edge1.norm();
    const double tt = tol / edge2.norm();
    return st.x() >= -ts && st.x() <= 1.0 + ts && st.y() >= -tt && st.y() <= 1.0 + tt;
  }

  double plane_distance(const Vec3& p) const { return std::abs(normal().dot(p - corner)); }
};

struct Hole {
  std::string id;
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();  // points out of the wall, toward open space
  double diameter = 0.15;
  double recess_depth = 0.10;
  bool heated = false;
  double heat_temp = 600.0;
  Enclosure enclosure = Enclosure::None;
  std::string group;  // fire group label; empty means the hole id

  double radius() const { return 0.5 * diameter; }
  Vec3 plate_center() const { return center - recess_depth * normal; }
};

struct ArenaModel {
  std::vector<Facet> walls;
  std::vector<Hole> holes;
  double floor_z = 0.0;
  Aabb bounds{Vec3(-20, -20, 0), Vec3(20, 20, 15)};
  double ambient_temp = 300.0;

  /// Index of the wall facet each hole sits on; filled by validate().
  std::vector<std::size_t> hole_facet;

  /// Check invariants and resolve hole -> facet; throws ValidationError listing every problem.
  void validate() {
    std::vector<std::string> errors;
    if (!bounds.valid()) errors.push_back("arena bounds: min exceeds max");
    for (const auto& w : walls) {
      if (w.edge1.cross(w.edge2).norm() < 1e-12)
        errors.push_back("wall '" + w.id + "': degenerate edges");
    }
    hole_facet.assign(holes.size(), 0);
    for (std::size_t h = 0; h < holes.size(); ++h) {
      auto& hole = holes[h];
      if (!(hole.diameter > 0.0)) errors.push_back("hole '" + hole.id + "': diameter must be > 0");
      if (hole.recess_depth < 0.0) errors.push_back("hole '" + hole.id + "': recess_depth must be >= 0");
      if (hole.normal.norm() < 1e-9) {
        errors.push_back("hole '" + hole.id + "': zero normal");
        continue;
      }
      hole.normal.normalize();
      std::vector<std::size_t> on;
      for (std::size_t f = 0; f < walls.size(); ++f) {
        if (walls[f].edge1.cross(walls[f].edge2).norm() < 1e-12) continue;
        if (walls[f].plane_distance(hole.center) <= 1e-3 && walls[f].contains_on_plane(hole.center))
          on.push_back(f);
      }
      if (on.size() != 1) {
        errors.push_back("hole '" + hole.id + "': center must lie on exactly one wall facet (found " +
                         std::to_string(on.size()) + ")");
        continue;
      }
      hole_facet[h] = on.front();
      const auto& w = walls[on.front()];
      if (std::abs(std::abs(w.normal().dot(hole.normal)) - 1.0) > 1e-6)
        errors.push_back("hole '" + hole.id + "': normal not perpendicular to its wall");
      if (hole.enclosure == Enclosure::Acrylic && w.material != Material::Acrylic)
        errors.push_back("hole '" + hole.id + "': acrylic enclosure requires an acrylic front panel");
    }
    if (!errors.empty()) throw ValidationError(std::move(errors));
  }

  std::vector<std::size_t> holes_on(std::size_t facet) const {
    std::vector<std::size_t> out;
    for (std::size_t h = 0; h < hole_facet.size(); ++h)
      if (hole_facet[h] == facet) out.push_back(h);
    return out;
  }
};

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit
};

enum class SurfaceKind { None, Wall, Floor, Plate };

struct RayHit {
  double t = std::numeric_limits<double>::infinity();
  SurfaceKind kind = SurfaceKind::None;
  std::size_t index = 0;  // wall or hole index
  Vec3 point = Vec3::Zero();
  bool hit() const { return kind != SurfaceKind::None; }
};

/// Precomputed intersection structure for one arena. Cheap to build; immutable.
class RayCaster {
 public:
  explicit RayCaster(const ArenaModel& arena) : arena_(&arena) {
    for (std::size_t f = 0; f < arena.walls.size(); ++f) {
      const auto& w = arena.walls[f];
      FacetData d;
      d.n = w.normal();
      d.off = d.n.dot(w.corner);
      d.corner = w.corner;
      d.e1 = w.edge1 / w.edge1.squaredNorm();
      d.e2 = w.edge2 / w.edge2.squaredNorm();
      d.acrylic = w.material == Material::Acrylic;
      facets_.push_back(d);
    }
    holes_per_facet_.resize(arena.walls.size());
    for (std::size_t h = 0; h < arena.holes.size() && h < arena.hole_facet.size(); ++h)
      holes_per_facet_[arena.hole_facet[h]].push_back(h);
  }

  const ArenaModel& arena() const { return *arena_; }

  /// Transmission applied per acrylic panel crossing for thermal rays.
  double acrylic_transmission = 0.3;

  /// First surface a LiDAR ray returns from. Acrylic panels are invisible.
  RayHit cast_lidar(const Ray& ray, double t_max) const {
    return cast(ray, t_max, nullptr);
  }

  struct ThermalSample {
    RayHit hit;
    double transmission = 1.0;
  };

  /// First opaque surface for a thermal ray plus accumulated acrylic attenuation.
  ThermalSample cast_thermal(const Ray& ray, double t_max) const {
    ThermalSample s;
    s.hit = cast(ray, t_max, &s.transmission);
    return s;
  }

  /// Hole whose disk contains `p`, given p lies on wall facet f.
  std::optional<std::size_t> hole_at(std::size_t f, const Vec3& p) const {
    for (std::size_t h : holes_per_facet_[f]) {
      const auto& hole = arena_->holes[h];
      if ((p - hole.center).squaredNorm() <= hole.radius() * hole.radius()) return h;
    }
    return std::nullopt;
  }

  std::size_t facet_count() const { return facets_.size(); }

  std::optional<double> intersect_facet(std::size_t f, const Ray& ray) const {
    const auto& d = facets_[f];
    const double denom = d.n.dot(ray.dir);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    const double t = (d.off - d.n.dot(ray.origin)) / denom;
    if (!(t > 1e-9)) return std::nullopt;
    const Vec3 r = ray.origin + t * ray.dir - d.corner;
    const double s = r.dot(d.e1);
    const double u = r.dot(d.e2);
    if (s < 0.0 || s > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
    return t;
  }

  bool inside_bounds_xy(const Vec3& p) const {
    const auto& b = arena_->bounds;
    return p.x() >= b.min.x() && p.x() <= b.max.x() && p.y() >= b.min.y() && p.y() <= b.max.y();
  }

 private:
  struct FacetData {
    Vec3 n, corner, e1, e2;
    double off = 0.0;
    bool acrylic = false;
  };

  // `transmission` null -> LiDAR semantics (acrylic invisible, no attenuation).
  RayHit cast(const Ray& ray, double t_max, double* transmission) const {
    RayHit best;
    best.t = t_max;
    const auto& arena = *arena_;

    // Floor.
    if (ray.dir.z() < -1e-12) {
      const double t = (arena.floor_z - ray.origin.z()) / ray.dir.z();
      if (t > 1e-9 && t < best.t) {
        const Vec3 p = ray.origin + t * ray.dir;
        if (inside_bounds_xy(p)) best = {t, SurfaceKind::Floor, 0, p};
      }
    }

    // Opaque walls; a ray entering a hole disk continues to the recessed plate plane.
    for (std::size_t f = 0; f < facets_.size(); ++f) {
      if (facets_[f].acrylic) continue;
      const auto t = intersect_facet(f, ray);
      if (!t || *t >= best.t) continue;
      const Vec3 p = ray.origin + *t * ray.dir;
      if (auto h = hole_at(f, p)) {
        const auto& hole = arena.holes[*h];
        const double denom = hole.normal.dot(ray.dir);
        double tp = *t;
        if (std::abs(denom) > 1e-12) tp = (hole.normal.dot(hole.plate_center()) - hole.normal.dot(ray.origin)) / denom;
        if (tp < *t) tp = *t;
        const Vec3 q = ray.origin + tp * ray.dir;
        const bool on_plate = (q - hole.plate_center()).squaredNorm() <= hole.radius() * hole.radius();
        // Off-plate recess hits land on the tube wall; report them at plate depth as wall.
        best = {tp, on_plate ? SurfaceKind::Plate : SurfaceKind::Wall, on_plate ? *h : f, q};
      } else {
        best = {*t, SurfaceKind::Wall, f, p};
      }
    }

    // Plates of acrylic-enclosed holes are finite disks behind an invisible panel.
    for (std::size_t h = 0; h < arena.holes.size(); ++h) {
      const auto& hole = arena.holes[h];
      if (hole.enclosure != Enclosure::Acrylic) continue;
      const double denom = hole.normal.dot(ray.dir);
      if (std::abs(denom) < 1e-12) continue;
      const double t = (hole.normal.dot(hole.plate_center()) - hole.normal.dot(ray.origin)) / denom;
      if (!(t > 1e-9) || t >= best.t) continue;
      const Vec3 q = ray.origin + t * ray.dir;
      if ((q - hole.plate_center()).squaredNorm() <= hole.radius() * hole.radius())
        best = {t, SurfaceKind::Plate, h, q};
    }

    if (transmission) {
      *transmission = 1.0;
      for (std::size_t f = 0; f < facets_.size(); ++f) {
        if (!facets_[f].acrylic) continue;
        const auto t = intersect_facet(f, ray);
        if (!t || *t >= best.t) continue;
        if (!hole_at(f, ray.origin + *t * ray.dir)) *transmission *= acrylic_transmission;
      }
    }

    if (best.t >= t_max) best.kind = SurfaceKind::None;
    return best;
  }

  const ArenaModel* arena_;
  std::vector<FacetData> facets_;
  std::vector<std::vector<std::size_t>> holes_per_facet_;
};

}  // namespace emberpipe::sim
