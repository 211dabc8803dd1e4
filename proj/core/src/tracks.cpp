#include "artn/tracks.hpp"

#include <cmath>
#include <numbers>

#include "artn/error.hpp"

namespace artn::geo {

using nlohmann::json;

PathBuilder& PathBuilder::straight(double length) {
  const int n = std::max(1, static_cast<int>(std::ceil(length / spacing_)));
  const Vec2 dir{std::cos(heading_), std::sin(heading_)};
  const Vec2 start = pos_;
  for (int i = 1; i <= n; ++i) points_.push_back(start + (length * i / n) * dir);
  pos_ = points_.back();
  return *this;
}

PathBuilder& PathBuilder::arc(double radius, double angle_deg) {
  const double angle = angle_deg * std::numbers::pi / 180.0;
  const double side = angle > 0.0 ? 1.0 : -1.0;
  const Vec2 center = pos_ + side * radius * Vec2{-std::sin(heading_), std::cos(heading_)};
  const int n = std::max(2, static_cast<int>(std::ceil(std::abs(angle) * radius / spacing_)));
  const double h0 = heading_;
  for (int i = 1; i <= n; ++i) {
    const double h = h0 + angle * i / n;
    points_.push_back(center + side * radius * Vec2{std::sin(h), -std::cos(h)});
  }
  heading_ = h0 + angle;
  pos_ = points_.back();
  return *this;
}

std::vector<Vec2> PathBuilder::finish(bool closed) const {
  std::vector<Vec2> out = points_;
  if (closed && out.size() > 1 && distance(out.front(), out.back()) < 1e-6) out.pop_back();
  return out;
}

namespace {

constexpr double kRapidWidth = 8.0;

Track make_open(std::string id, std::string name, std::vector<Vec2> pts) {
  TrackSpec spec;
  spec.id = std::move(id);
  spec.name = std::move(name);
  spec.centerline = std::move(pts);
  spec.width = kRapidWidth;
  spec.closed = false;
  return build_track(std::move(spec));
}

std::vector<Vec2> turn_path(double radius, double angle_deg) {
  return PathBuilder().straight(30.0).arc(radius, angle_deg).straight(30.0).finish(false);
}

std::vector<Vec2> s_curve_path(double first_angle_deg) {
  return PathBuilder()
      .straight(20.0)
      .arc(15.0, first_angle_deg)
      .arc(15.0, -first_angle_deg)
      .straight(20.0)
      .finish(false);
}

}  // namespace

std::vector<Track> builtin_rapid_tracks() {
  std::vector<Track> out;
  const auto tight = turn_path(10.0, 90.0);
  const auto wide = turn_path(30.0, 90.0);
  const auto s_curve = s_curve_path(90.0);
  out.push_back(make_open("rapid-1", "Tight Left", tight));
  out.push_back(make_open("rapid-2", "Tight Right", mirror_x(tight)));
  out.push_back(make_open("rapid-3", "Wide Left", wide));
  out.push_back(make_open("rapid-4", "Wide Right", mirror_x(wide)));
  out.push_back(make_open("rapid-5", "S-Curve Left-Right", s_curve));
  out.push_back(make_open("rapid-6", "S-Curve Right-Left", mirror_x(s_curve)));

  // Counter-clockwise loop: wide left, tight left, tight right, tight left,
  // wide right, wide left, tight left, tight left. Straights are sized so
  // the loop closes exactly.
  TrackSpec loop;
  loop.id = "rapid-7";
  loop.name = "General Loop";
  loop.width = kRapidWidth;
  loop.closed = true;
  loop.centerline = PathBuilder()
                        .straight(90.0)
                        .arc(30.0, 90.0)
                        .straight(10.0)
                        .arc(10.0, 90.0)
                        .straight(10.0)
                        .arc(10.0, -90.0)
                        .straight(10.0)
                        .arc(10.0, 90.0)
                        .straight(10.0)
                        .arc(30.0, -90.0)
                        .straight(10.0)
                        .arc(30.0, 90.0)
                        .straight(10.0)
                        .arc(10.0, 90.0)
                        .straight(130.0)
                        .arc(10.0, 90.0)
                        .finish(true);
  out.push_back(build_track(std::move(loop)));
  return out;
}

Track oval_track() {
  TrackSpec spec;
  spec.id = "oval";
  spec.name = "Oval";
  spec.width = kRapidWidth;
  spec.closed = true;
  spec.centerline = PathBuilder()
                        .straight(30.0)
                        .arc(20.0, 180.0)
                        .straight(60.0)
                        .arc(20.0, 180.0)
                        .straight(30.0)
                        .finish(true);
  return build_track(std::move(spec));
}

Track bus_route_track() {
  const auto pts = PathBuilder()
                       .straight(40.0)
                       .arc(15.0, 90.0)
                       .straight(50.0)
                       .arc(15.0, -90.0)
                       .straight(40.0)
                       .arc(12.0, 90.0)
                       .straight(35.0)
                       .finish(false);
  TrackSpec spec;
  spec.id = "bus-route";
  spec.name = "Bus Route";
  spec.width = kRapidWidth;
  spec.closed = false;
  spec.centerline = pts;
  // Waypoints sit on the centerline; build a provisional track to place them.
  TrackSpec probe = spec;
  const Track provisional = build_track(std::move(probe));
  auto at = [&](std::string name, WaypointKind kind, double s) {
    return Waypoint{std::move(name), kind, provisional.point_at(s), kDefaultWaypointRadius};
  };
  spec.waypoints = {
      at("stop1", WaypointKind::Pickup, 30.0),
      at("stop2", WaypointKind::Pickup, 85.0),
      at("stop3", WaypointKind::Pickup, 145.0),
      at("school", WaypointKind::Dropoff, 200.0),
  };
  return build_track(std::move(spec));
}

std::vector<Track> builtin_tracks() {
  std::vector<Track> out = builtin_rapid_tracks();
  out.push_back(oval_track());
  out.push_back(bus_route_track());
  return out;
}

std::optional<Track> builtin_track(std::string_view id) {
  for (Track& t : builtin_tracks()) {
    if (t.id() == id) return std::move(t);
  }
  return std::nullopt;
}

json track_to_json(const Track& track) {
  json centerline = json::array();
  for (const Vec2& p : track.centerline()) centerline.push_back({p.x, p.y});
  json waypoints = json::array();
  for (const Waypoint& wp : track.waypoints()) {
    waypoints.push_back({{"name", wp.name},
                         {"kind", to_string(wp.kind)},
                         {"position", {wp.position.x, wp.position.y}},
                         {"radius", wp.radius}});
  }
  return json{{"id", track.id()},
              {"name", track.name()},
              {"width", track.width()},
              {"closed", track.closed()},
              {"tileCount", track.tile_count()},
              {"centerline", std::move(centerline)},
              {"waypoints", std::move(waypoints)}};
}

namespace {

Vec2 point_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorCode::InvalidTrack, std::string(what) + " must be [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
T require(const json& j, const char* key, bool (json::*check)() const noexcept) {
  if (!j.contains(key) || !(j.at(key).*check)()) {
    throw Error(ErrorCode::InvalidTrack, std::string("missing or mistyped field '") + key + "'");
  }
  return j.at(key).get<T>();
}

}  // namespace

TrackSpec track_spec_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidTrack, "track must be a JSON object");
  TrackSpec spec;
  spec.id = require<std::string>(j, "id", &json::is_string);
  spec.name = require<std::string>(j, "name", &json::is_string);
  spec.width = require<double>(j, "width", &json::is_number);
  spec.closed = require<bool>(j, "closed", &json::is_boolean);
  if (j.contains("tileCount")) spec.tile_count = require<int>(j, "tileCount", &json::is_number_integer);
  const json& centerline = j.contains("centerline") ? j.at("centerline") : json();
  if (!centerline.is_array()) throw Error(ErrorCode::InvalidTrack, "centerline must be an array");
  for (const json& p : centerline) spec.centerline.push_back(point_from_json(p, "centerline point"));
  if (j.contains("waypoints")) {
    if (!j.at("waypoints").is_array()) throw Error(ErrorCode::InvalidTrack, "waypoints must be an array");
    for (const json& w : j.at("waypoints")) {
      if (!w.is_object()) throw Error(ErrorCode::InvalidTrack, "waypoint must be an object");
      Waypoint wp;
      wp.name = require<std::string>(w, "name", &json::is_string);
      wp.kind = waypoint_kind_from_string(require<std::string>(w, "kind", &json::is_string));
      wp.position = point_from_json(w.contains("position") ? w.at("position") : json(), "position");
      if (w.contains("radius")) wp.radius = require<double>(w, "radius", &json::is_number);
      spec.waypoints.push_back(std::move(wp));
    }
  }
  return spec;
}

Track track_from_json(const json& j) { return build_track(track_spec_from_json(j)); }

}  // namespace artn::geo
