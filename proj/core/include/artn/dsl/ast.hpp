#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace artn::dsl {

struct SourcePos {
  int line = 1;
  int column = 1;
};

struct Literal {
  // std::int64_t for INT, double for NUMBER.
  std::variant<std::string, std::int64_t, double> value;
  SourcePos pos;

  bool is_string() const { return std::holds_alternative<std::string>(value); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(value); }
  bool is_number() const { return std::holds_alternative<double>(value); }
};

struct Call {
  std::string name;
  std::vector<Literal> args;
  SourcePos pos;
};

struct Statement {
  enum class Kind { Call, Repeat };

  Kind kind = Kind::Call;
  Call call;                     // Kind::Call
  std::int64_t count = 0;        // Kind::Repeat
  std::vector<Statement> body;   // Kind::Repeat
  SourcePos pos;
};

struct Handler {
  std::vector<Statement> body;
  SourcePos pos;
};

struct WaypointHandler {
  std::string waypoint;
  SourcePos name_pos;
  Handler handler;
};

struct Program {
  std::optional<Handler> on_start;
  std::optional<Handler> on_step;
  std::optional<Handler> on_end;
  // Source order; names are unique.
  std::vector<WaypointHandler> waypoints;

  const Handler* find_waypoint(std::string_view name) const;
  bool empty() const {
    return !on_start && !on_step && !on_end && waypoints.empty();
  }
};

// Structural equality; source positions are ignored.
bool same_structure(const Literal& a, const Literal& b);
bool same_structure(const Statement& a, const Statement& b);
bool same_structure(const Program& a, const Program& b);

enum class EventKind { Start, Step, End, Waypoint };

struct EventRef {
  EventKind kind = EventKind::Start;
  std::string waypoint;

  static EventRef start() { return {EventKind::Start, {}}; }
  static EventRef step() { return {EventKind::Step, {}}; }
  static EventRef end() { return {EventKind::End, {}}; }
  static EventRef at(std::string name) { return {EventKind::Waypoint, std::move(name)}; }

  friend bool operator==(const EventRef&, const EventRef&) = default;
};

// "start", "step", "end" or "at:<name>".
std::string to_string(const EventRef& event);
EventRef event_from_string(std::string_view text);

}  // namespace artn::dsl
