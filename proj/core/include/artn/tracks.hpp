#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "artn/geometry.hpp"

namespace artn::geo {

// Piecewise straight/arc centerline builder used for the builtin tracks.
class PathBuilder {
 public:
  explicit PathBuilder(double spacing = kDefaultSpacing) : spacing_(spacing) {
    points_.push_back(pos_);
  }

  PathBuilder& straight(double length);
  // Positive angle turns left (counter-clockwise).
  PathBuilder& arc(double radius, double angle_deg);

  // For closed paths the final point duplicates the first; drop it.
  std::vector<Vec2> finish(bool closed) const;

 private:
  double spacing_;
  Vec2 pos_{};
  double heading_ = 0.0;
  std::vector<Vec2> points_;
};

/// The seven rapid training tracks, in order: tight-left, tight-right,
/// wide-left, wide-right, s-curve left-then-right, s-curve right-then-left,
/// and a closed general-purpose loop with all four turn classes. Each odd/even
/// pair is mirrored across the x-axis.
std::vector<Track> builtin_rapid_tracks();

Track oval_track();
Track bus_route_track();

// rapid-1..rapid-7, oval, bus-route.
std::vector<Track> builtin_tracks();
std::optional<Track> builtin_track(std::string_view id);

nlohmann::json track_to_json(const Track& track);
TrackSpec track_spec_from_json(const nlohmann::json& j);
/// Parses and validates; throws InvalidTrack for schema problems and the
/// build_track errors for geometry problems.
Track track_from_json(const nlohmann::json& j);

}  // namespace artn::geo
