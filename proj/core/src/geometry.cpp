#include "artn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "artn/error.hpp"

namespace artn::geo {

namespace {

std::vector<Vec2> drop_coincident(std::span<const Vec2> raw, bool closed) {
  std::vector<Vec2> out;
  out.reserve(raw.size());
  for (const Vec2& p : raw) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::DegenerateInput, "non-finite point in polyline");
    }
    if (out.empty() || distance(out.back(), p) > kMinPointGap) out.push_back(p);
  }
  if (closed) {
    while (out.size() > 1 && distance(out.back(), out.front()) <= kMinPointGap) out.pop_back();
  }
  return out;
}

std::vector<Vec2> corner_cut(const std::vector<Vec2>& pts, bool closed) {
  std::vector<Vec2> out;
  const std::size_t n = pts.size();
  const std::size_t segs = closed ? n : n - 1;
  out.reserve(2 * segs + 2);
  if (!closed) out.push_back(pts.front());
  for (std::size_t i = 0; i < segs; ++i) {
    const Vec2 a = pts[i];
    const Vec2 b = pts[(i + 1) % n];
    out.push_back(0.75 * a + 0.25 * b);
    out.push_back(0.25 * a + 0.75 * b);
  }
  if (!closed) out.push_back(pts.back());
  return out;
}

std::vector<Vec2> resample(const std::vector<Vec2>& pts, double spacing, bool closed) {
  const std::size_t n = pts.size();
  const std::size_t segs = closed ? n : n - 1;
  std::vector<double> cum(segs + 1, 0.0);
  for (std::size_t i = 0; i < segs; ++i) {
    cum[i + 1] = cum[i] + distance(pts[i], pts[(i + 1) % n]);
  }
  const double total = cum.back();
  auto count = static_cast<std::size_t>(std::llround(total / spacing));
  count = std::max<std::size_t>(count, closed ? 3 : 1);
  const double step = total / static_cast<double>(count);

  std::vector<Vec2> out;
  out.reserve(count + 1);
  std::size_t seg = 0;
  const std::size_t samples = closed ? count : count + 1;
  for (std::size_t k = 0; k < samples; ++k) {
    if (!closed && k == count) {
      out.push_back(pts.back());
      break;
    }
    const double s = step * static_cast<double>(k);
    while (seg + 1 < segs && cum[seg + 1] <= s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double t = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    const Vec2 a = pts[seg];
    const Vec2 b = pts[(seg + 1) % n];
    out.push_back(a + t * (b - a));
  }
  return out;
}

}  // namespace

std::string_view to_string(WaypointKind kind) noexcept {
  switch (kind) {
    case WaypointKind::Pickup: return "pickup";
    case WaypointKind::Dropoff: return "dropoff";
    case WaypointKind::Custom: return "custom";
  }
  return "custom";
}

WaypointKind waypoint_kind_from_string(std::string_view text) {
  if (text == "pickup") return WaypointKind::Pickup;
  if (text == "dropoff") return WaypointKind::Dropoff;
  if (text == "custom") return WaypointKind::Custom;
  throw Error(ErrorCode::InvalidWaypoint, "unknown waypoint kind '" + std::string(text) + "'");
}

std::vector<Vec2> smooth_polyline(std::span<const Vec2> raw, double spacing, bool closed) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw Error(ErrorCode::DegenerateInput, "spacing must be positive");
  }
  std::vector<Vec2> pts = drop_coincident(raw, closed);
  if (pts.size() < 2 || (closed && pts.size() < 3)) {
    throw Error(ErrorCode::DegenerateInput, "polyline needs at least two distinct points");
  }
  for (int round = 0; round < 2; ++round) pts = corner_cut(pts, closed);
  return resample(pts, spacing, closed);
}

int default_tile_count(double arc_length) {
  return std::max(16, static_cast<int>(std::lround(arc_length / 5.0)));
}

Track build_track(TrackSpec spec) {
  Track track;
  track.id_ = std::move(spec.id);
  track.name_ = std::move(spec.name);
  track.closed_ = spec.closed;
  track.points_ = std::move(spec.centerline);
  const auto& pts = track.points_;

  if (pts.size() < 2 || (spec.closed && pts.size() < 3)) {
    throw Error(ErrorCode::DegenerateInput, "centerline needs at least two points");
  }
  for (const Vec2& p : pts) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::DegenerateInput, "non-finite centerline point");
    }
  }
  const std::size_t segs = spec.closed ? pts.size() : pts.size() - 1;
  track.seg_start_s_.resize(segs);
  track.seg_len_.resize(segs);
  double s = 0.0;
  for (std::size_t i = 0; i < segs; ++i) {
    const double len = distance(pts[i], pts[(i + 1) % pts.size()]);
    if (!(len > kMinPointGap)) {
      throw Error(ErrorCode::DegenerateInput,
                  "coincident consecutive centerline points at index " + std::to_string(i));
    }
    track.seg_start_s_[i] = s;
    track.seg_len_[i] = len;
    s += len;
  }
  track.length_ = s;

  if (!(spec.width > 0.0) || !std::isfinite(spec.width)) {
    throw Error(ErrorCode::DegenerateInput, "track width must be positive");
  }
  track.width_ = spec.width;

  const int k = spec.tile_count == 0 ? default_tile_count(track.length_) : spec.tile_count;
  if (k < 4) throw Error(ErrorCode::DegenerateInput, "tile count must be at least 4");
  track.tiles_.resize(static_cast<std::size_t>(k));
  const double tile_len = track.length_ / k;
  for (int i = 0; i < k; ++i) {
    auto& tile = track.tiles_[static_cast<std::size_t>(i)];
    tile.index = i;
    tile.s_start = i == 0 ? 0.0 : track.tiles_[static_cast<std::size_t>(i - 1)].s_end;
    tile.s_end = i == k - 1 ? track.length_ : tile_len * (i + 1);
  }

  track.build_index();

  std::set<std::string> names;
  for (const Waypoint& wp : spec.waypoints) {
    if (wp.name.empty()) throw Error(ErrorCode::InvalidWaypoint, "waypoint name is empty");
    if (!names.insert(wp.name).second) {
      throw Error(ErrorCode::InvalidWaypoint, "duplicate waypoint name '" + wp.name + "'");
    }
    if (!(wp.radius > 0.0) || !std::isfinite(wp.radius)) {
      throw Error(ErrorCode::InvalidWaypoint, "waypoint '" + wp.name + "' needs a positive radius");
    }
    if (!std::isfinite(wp.position.x) || !std::isfinite(wp.position.y) ||
        std::abs(track.project(wp.position).lateral) > track.width_ / 2.0 + wp.radius) {
      throw Error(ErrorCode::InvalidWaypoint, "waypoint '" + wp.name + "' is off the track");
    }
  }
  track.waypoints_ = std::move(spec.waypoints);
  return track;
}

void Track::build_index() {
  Vec2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  Vec2 hi{-lo.x, -lo.y};
  for (const Vec2& p : points_) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  cell_ = std::clamp(width_, 2.0, 20.0);
  for (;;) {
    grid_origin_ = lo - Vec2{cell_, cell_};
    nx_ = static_cast<int>(std::floor((hi.x - grid_origin_.x) / cell_)) + 2;
    ny_ = static_cast<int>(std::floor((hi.y - grid_origin_.y) / cell_)) + 2;
    if (static_cast<long long>(nx_) * ny_ <= (1LL << 20)) break;
    cell_ *= 2.0;
  }
  cells_.assign(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_), {});
  for (std::size_t i = 0; i < segment_count(); ++i) {
    const Vec2 a = segment_begin(i);
    const Vec2 b = segment_end(i);
    const Vec2 seg_lo{std::min(a.x, b.x), std::min(a.y, b.y)};
    const Vec2 seg_hi{std::max(a.x, b.x), std::max(a.y, b.y)};
    const CellRange r = cell_range(seg_lo, seg_hi);
    for (int cy = r.y0; cy <= r.y1; ++cy) {
      for (int cx = r.x0; cx <= r.x1; ++cx) {
        cells_[cell_index(cx, cy)].push_back(static_cast<std::uint32_t>(i));
      }
    }
  }
}

Track::CellRange Track::cell_range(Vec2 lo, Vec2 hi) const noexcept {
  auto cell_x = [&](double x) {
    return std::clamp(static_cast<int>(std::floor((x - grid_origin_.x) / cell_)), 0, nx_ - 1);
  };
  auto cell_y = [&](double y) {
    return std::clamp(static_cast<int>(std::floor((y - grid_origin_.y) / cell_)), 0, ny_ - 1);
  };
  return {cell_x(lo.x), cell_x(hi.x), cell_y(lo.y), cell_y(hi.y)};
}

std::size_t Track::cell_index(int cx, int cy) const noexcept {
  return static_cast<std::size_t>(cy) * static_cast<std::size_t>(nx_) +
         static_cast<std::size_t>(cx);
}

template <typename F>
void Track::visit_cells(Vec2 lo, Vec2 hi, F&& f) const {
  const CellRange r = cell_range(lo, hi);
  for (int cy = r.y0; cy <= r.y1; ++cy) {
    for (int cx = r.x0; cx <= r.x1; ++cx) f(cells_[cell_index(cx, cy)]);
  }
}

double Track::segment_distance_sq(std::size_t i, Vec2 p) const noexcept {
  const Vec2 a = segment_begin(i);
  const Vec2 ab = segment_end(i) - a;
  const double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
  const Vec2 d = p - (a + t * ab);
  return dot(d, d);
}

namespace {

struct Candidate {
  double d2 = std::numeric_limits<double>::infinity();
  double s = 0.0;
  std::size_t seg = 0;
  double t = 0.0;
};

inline void consider(Candidate& best, std::size_t i, Vec2 a, Vec2 b, double s0, double len,
                     Vec2 p) {
  const Vec2 ab = b - a;
  const double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
  const Vec2 d = p - (a + t * ab);
  const double d2 = dot(d, d);
  const double s = s0 + t * len;
  if (d2 < best.d2 || (d2 == best.d2 && s < best.s)) best = {d2, s, i, t};
}

}  // namespace

Projection Track::brute_force_project(Vec2 p) const {
  Candidate best;
  for (std::size_t i = 0; i < segment_count(); ++i) {
    consider(best, i, segment_begin(i), segment_end(i), seg_start_s_[i], seg_len_[i], p);
  }
  const Vec2 a = segment_begin(best.seg);
  const Vec2 ab = segment_end(best.seg) - a;
  const Vec2 foot = a + best.t * ab;
  const double dist = std::sqrt(best.d2);
  Projection proj;
  proj.s = std::clamp(best.s, 0.0, length_);
  proj.lateral = cross(ab, p - foot) < 0.0 ? -dist : dist;
  proj.tile_index = tile_at(proj.s);
  proj.foot = foot;
  return proj;
}

Projection Track::project(Vec2 p) const {
  const double gx = (p.x - grid_origin_.x) / cell_;
  const double gy = (p.y - grid_origin_.y) / cell_;
  if (!(gx >= 0.0 && gy >= 0.0 && gx < nx_ && gy < ny_)) return brute_force_project(p);

  const int cx = static_cast<int>(gx);
  const int cy = static_cast<int>(gy);
  const int max_ring = std::max({cx, cy, nx_ - 1 - cx, ny_ - 1 - cy});
  Candidate best;
  auto scan = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= nx_ || y >= ny_) return;
    for (std::uint32_t i : cells_[cell_index(x, y)]) {
      consider(best, i, segment_begin(i), segment_end(i), seg_start_s_[i], seg_len_[i], p);
    }
  };
  for (int ring = 0; ring <= max_ring; ++ring) {
    if (ring == 0) {
      scan(cx, cy);
    } else {
      for (int x = cx - ring; x <= cx + ring; ++x) {
        scan(x, cy - ring);
        scan(x, cy + ring);
      }
      for (int y = cy - ring + 1; y <= cy + ring - 1; ++y) {
        scan(cx - ring, y);
        scan(cx + ring, y);
      }
    }
    // Anything in an unscanned ring is at least ring*cell away.
    const double reach = ring * cell_;
    if (best.d2 <= reach * reach) break;
  }

  const Vec2 a = segment_begin(best.seg);
  const Vec2 ab = segment_end(best.seg) - a;
  const Vec2 foot = a + best.t * ab;
  const double dist = std::sqrt(best.d2);
  Projection proj;
  proj.s = std::clamp(best.s, 0.0, length_);
  proj.lateral = cross(ab, p - foot) < 0.0 ? -dist : dist;
  proj.tile_index = tile_at(proj.s);
  proj.foot = foot;
  return proj;
}

bool Track::is_on_track(Vec2 p, double margin) const {
  const double limit = width_ / 2.0 + margin;
  double best = std::numeric_limits<double>::infinity();
  visit_cells(p - Vec2{limit, limit}, p + Vec2{limit, limit},
              [&](const std::vector<std::uint32_t>& bucket) {
                for (std::uint32_t i : bucket) best = std::min(best, segment_distance_sq(i, p));
              });
  return std::sqrt(best) <= limit;
}

std::vector<std::uint32_t> Track::segments_near(Vec2 center, double radius) const {
  std::vector<std::uint32_t> out;
  visit_cells(center - Vec2{radius, radius}, center + Vec2{radius, radius},
              [&](const std::vector<std::uint32_t>& bucket) {
                out.insert(out.end(), bucket.begin(), bucket.end());
              });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int Track::tile_at(double s) const noexcept {
  const int k = tile_count();
  int idx = static_cast<int>(std::floor(s / length_ * k));
  idx = std::clamp(idx, 0, k - 1);
  while (idx > 0 && s < tiles_[static_cast<std::size_t>(idx)].s_start) --idx;
  while (idx < k - 1 && s >= tiles_[static_cast<std::size_t>(idx)].s_end) ++idx;
  return idx;
}

Vec2 Track::point_at(double s) const noexcept {
  if (closed_) {
    s = std::fmod(s, length_);
    if (s < 0.0) s += length_;
  } else {
    s = std::clamp(s, 0.0, length_);
  }
  auto it = std::upper_bound(seg_start_s_.begin(), seg_start_s_.end(), s);
  const std::size_t i = it == seg_start_s_.begin()
                            ? 0
                            : static_cast<std::size_t>(std::distance(seg_start_s_.begin(), it)) - 1;
  const double t = std::clamp((s - seg_start_s_[i]) / seg_len_[i], 0.0, 1.0);
  return segment_begin(i) + t * (segment_end(i) - segment_begin(i));
}

double Track::heading_at(double s) const noexcept {
  if (closed_) {
    s = std::fmod(s, length_);
    if (s < 0.0) s += length_;
  }
  auto it = std::upper_bound(seg_start_s_.begin(), seg_start_s_.end(), s);
  std::size_t i = it == seg_start_s_.begin()
                      ? 0
                      : static_cast<std::size_t>(std::distance(seg_start_s_.begin(), it)) - 1;
  i = std::min(i, segment_count() - 1);
  const Vec2 d = segment_end(i) - segment_begin(i);
  return std::atan2(d.y, d.x);
}

TrackSpec Track::to_spec() const {
  TrackSpec spec;
  spec.id = id_;
  spec.name = name_;
  spec.centerline = points_;
  spec.width = width_;
  spec.closed = closed_;
  spec.tile_count = tile_count();
  spec.waypoints = waypoints_;
  return spec;
}

Vec2 mirror_x(Vec2 p) { return {p.x, -p.y}; }

std::vector<Vec2> mirror_x(std::span<const Vec2> pts) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const Vec2& p : pts) out.push_back(mirror_x(p));
  return out;
}

}  // namespace artn::geo
