#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace artn::geo {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double k) { return {k * a.x, k * a.y}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(b - a); }

inline constexpr double kMinPointGap = 1e-6;
inline constexpr double kDefaultSpacing = 2.0;
inline constexpr double kDefaultWaypointRadius = 3.0;

struct Tile {
  int index = 0;
  double s_start = 0.0;
  double s_end = 0.0;
};

enum class WaypointKind { Pickup, Dropoff, Custom };

std::string_view to_string(WaypointKind kind) noexcept;
// Throws Error(InvalidWaypoint) on anything other than pickup/dropoff/custom.
WaypointKind waypoint_kind_from_string(std::string_view text);

struct Waypoint {
  std::string name;
  WaypointKind kind = WaypointKind::Custom;
  Vec2 position;
  double radius = kDefaultWaypointRadius;
};

struct Projection {
  double s = 0.0;
  // Signed distance to the centerline, positive to the left of travel.
  double lateral = 0.0;
  int tile_index = 0;
  Vec2 foot;
};

/// Regularizes a freehand polyline: two rounds of corner cutting (each
/// segment replaced by its 1/4 and 3/4 points) followed by uniform
/// arc-length resampling. Open polylines keep their first and last points.
/// Throws DegenerateInput when fewer than two distinct points are given or
/// spacing is not positive.
std::vector<Vec2> smooth_polyline(std::span<const Vec2> raw, double spacing = kDefaultSpacing,
                                  bool closed = false);

/// Everything needed to build a track; also the in-memory form of a track file.
struct TrackSpec {
  std::string id;
  std::string name;
  std::vector<Vec2> centerline;
  double width = 8.0;
  bool closed = false;
  int tile_count = 0;  // 0 selects default_tile_count(arc length)
  std::vector<Waypoint> waypoints;
};

int default_tile_count(double arc_length);

/// Immutable track. Construction goes through build_track, which validates
/// every invariant; afterwards the object is safe to share across threads.
class Track {
 public:
  const std::string& id() const noexcept { return id_; }
  const std::string& name() const noexcept { return name_; }
  const std::vector<Vec2>& centerline() const noexcept { return points_; }
  double width() const noexcept { return width_; }
  bool closed() const noexcept { return closed_; }
  const std::vector<Tile>& tiles() const noexcept { return tiles_; }
  int tile_count() const noexcept { return static_cast<int>(tiles_.size()); }
  const std::vector<Waypoint>& waypoints() const noexcept { return waypoints_; }
  double length() const noexcept { return length_; }

  std::size_t segment_count() const noexcept { return seg_start_s_.size(); }
  Vec2 segment_begin(std::size_t i) const noexcept { return points_[i]; }
  Vec2 segment_end(std::size_t i) const noexcept { return points_[(i + 1) % points_.size()]; }

  Projection project(Vec2 p) const;
  bool is_on_track(Vec2 p, double margin) const;

  // Squared distance from p to segment i, computed exactly the way
  // project() and is_on_track() compute it.
  double segment_distance_sq(std::size_t i, Vec2 p) const noexcept;

  // Every segment that could lie within `radius` of `center` (a superset;
  // callers still test distances). Sorted, no duplicates.
  std::vector<std::uint32_t> segments_near(Vec2 center, double radius) const;

  int tile_at(double s) const noexcept;
  Vec2 point_at(double s) const noexcept;
  double heading_at(double s) const noexcept;

  TrackSpec to_spec() const;

 private:
  friend Track build_track(TrackSpec spec);
  Track() = default;

  struct CellRange {
    int x0, x1, y0, y1;
  };

  void build_index();
  CellRange cell_range(Vec2 lo, Vec2 hi) const noexcept;
  std::size_t cell_index(int cx, int cy) const noexcept;
  template <typename F>
  void visit_cells(Vec2 lo, Vec2 hi, F&& f) const;
  Projection brute_force_project(Vec2 p) const;

  std::string id_;
  std::string name_;
  std::vector<Vec2> points_;
  double width_ = 0.0;
  bool closed_ = false;
  std::vector<Tile> tiles_;
  std::vector<Waypoint> waypoints_;
  double length_ = 0.0;
  std::vector<double> seg_start_s_;
  std::vector<double> seg_len_;

  // Uniform bucket grid over segment bounding boxes.
  Vec2 grid_origin_;
  double cell_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::vector<std::uint32_t>> cells_;
};

/// Validates and builds a track: tiles of equal arc length; closed tracks
/// join the last point back to the first. Throws DegenerateInput or
/// InvalidWaypoint.
Track build_track(TrackSpec spec);

inline Projection project(const Track& track, Vec2 p) { return track.project(p); }
inline bool is_on_track(const Track& track, Vec2 p, double margin) {
  return track.is_on_track(p, margin);
}

Vec2 mirror_x(Vec2 p);
std::vector<Vec2> mirror_x(std::span<const Vec2> pts);

}  // namespace artn::geo
