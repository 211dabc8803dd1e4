#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "artn/dsl/ast.hpp"
#include "artn/dsl/diagnostic.hpp"

namespace artn::dsl {

struct VehicleEffects {
  std::string color = "white";
  int lights_flashes = 0;
  int horn_beeps = 0;
  int passengers = 0;
};

struct PauseRequest {
  enum class Kind { Pause, Resume };
  Kind kind = Kind::Pause;
  double seconds = 0.0;
};

struct EffectEntry {
  int t = 0;
  EventRef event;
  std::string function;
  std::vector<Literal> args;
  int passengers = 0;
  std::string color;
};

using EffectLog = std::vector<EffectEntry>;

struct DispatchResult {
  // Last pause/resume request issued by the handler, if any.
  std::optional<PauseRequest> pause;
  std::vector<Diagnostic> faults;
};

bool is_valid_color(std::string_view color);

/// Runs the handler for `event` (a no-op when the program has none). A
/// runtime fault aborts the rest of that handler and is reported in the
/// result; calls that completed before the fault keep their effects.
DispatchResult dispatch_event(const Program& program, const EventRef& event, int t,
                              VehicleEffects& effects, EffectLog& log);

nlohmann::json to_json(const EffectEntry& entry);
EffectEntry effect_entry_from_json(const nlohmann::json& j);

}  // namespace artn::dsl
