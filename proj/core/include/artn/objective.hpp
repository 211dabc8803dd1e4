#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "artn/dsl/interpreter.hpp"
#include "artn/geometry.hpp"
#include "artn/sim.hpp"

namespace artn::dsl {

enum class RequirementType { StartColor, Stop, FlashLights, LoadPassenger, Pause, UnloadAll, Outcome };

std::string_view to_string(RequirementType type) noexcept;

struct Requirement {
  RequirementType type = RequirementType::Outcome;
  std::string waypoint;            // waypoint requirements
  std::string color;               // StartColor
  double min_seconds = 0.0;        // Pause
  sim::Outcome outcome = sim::Outcome::Completed;  // Outcome

  // "stop@stop1", "start_color", "outcome".
  std::string label() const;
};

struct Objective {
  std::string name;
  std::string track_id;
  double stop_speed = 0.1;
  int stop_within_steps = 10;
  std::vector<Requirement> requirements;
};

// The school-bus task on the builtin bus-route track.
Objective bus_route_objective();

nlohmann::json to_json(const Objective& objective);
Objective objective_from_json(const nlohmann::json& j);

struct RequirementResult {
  std::string label;
  bool pass = false;
  // Step index (into episode.steps) of the satisfying or first violating
  // evidence; empty when there is none (e.g. the waypoint never fired).
  std::optional<int> evidence_step;
  std::string detail;
};

struct ObjectiveReport {
  std::string objective;
  bool pass = false;
  std::vector<RequirementResult> results;

  int failures() const;
};

nlohmann::json to_json(const ObjectiveReport& report);

/// Grades a programmed-mode episode and its effect log. Throws TrackMismatch
/// when a waypoint the objective names does not exist on `track`.
ObjectiveReport evaluate_objective(const geo::Track& track, const sim::Episode& episode,
                                   const EffectLog& effects, const Objective& objective);

}  // namespace artn::dsl
