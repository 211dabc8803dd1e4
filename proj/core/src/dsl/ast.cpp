#include "artn/dsl/ast.hpp"

#include "artn/dsl/diagnostic.hpp"

namespace artn::dsl {

const Handler* Program::find_waypoint(std::string_view name) const {
  for (const auto& wp : waypoints) {
    if (wp.waypoint == name) return &wp.handler;
  }
  return nullptr;
}

bool same_structure(const Literal& a, const Literal& b) { return a.value == b.value; }

namespace {

bool same_body(const std::vector<Statement>& a, const std::vector<Statement>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_structure(a[i], b[i])) return false;
  }
  return true;
}

bool same_handler(const std::optional<Handler>& a, const std::optional<Handler>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same_body(a->body, b->body);
}

}  // namespace

bool same_structure(const Statement& a, const Statement& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Statement::Kind::Repeat) return a.count == b.count && same_body(a.body, b.body);
  if (a.call.name != b.call.name || a.call.args.size() != b.call.args.size()) return false;
  for (std::size_t i = 0; i < a.call.args.size(); ++i) {
    if (!same_structure(a.call.args[i], b.call.args[i])) return false;
  }
  return true;
}

bool same_structure(const Program& a, const Program& b) {
  if (!same_handler(a.on_start, b.on_start) || !same_handler(a.on_step, b.on_step) ||
      !same_handler(a.on_end, b.on_end) || a.waypoints.size() != b.waypoints.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.waypoints.size(); ++i) {
    if (a.waypoints[i].waypoint != b.waypoints[i].waypoint ||
        !same_body(a.waypoints[i].handler.body, b.waypoints[i].handler.body)) {
      return false;
    }
  }
  return true;
}

std::string to_string(const EventRef& event) {
  switch (event.kind) {
    case EventKind::Start: return "start";
    case EventKind::Step: return "step";
    case EventKind::End: return "end";
    case EventKind::Waypoint: return "at:" + event.waypoint;
  }
  return "start";
}

EventRef event_from_string(std::string_view text) {
  if (text == "start") return EventRef::start();
  if (text == "step") return EventRef::step();
  if (text == "end") return EventRef::end();
  if (text.starts_with("at:")) return EventRef::at(std::string(text.substr(3)));
  return EventRef::at(std::string(text));
}

std::string format(const Diagnostic& d) {
  return std::to_string(d.line) + ":" + std::to_string(d.column) + ": " +
         (d.severity == Severity::Error ? "error " : "warning ") + d.code + ": " + d.message;
}

std::string format(const std::vector<Diagnostic>& ds) {
  std::string out;
  for (const auto& d : ds) out += format(d) + "\n";
  return out;
}

bool has_errors(const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds) {
    if (d.severity == Severity::Error) return true;
  }
  return false;
}

nlohmann::json to_json(const Diagnostic& d) {
  return {{"severity", d.severity == Severity::Error ? "error" : "warning"},
          {"line", d.line},
          {"column", d.column},
          {"code", d.code},
          {"message", d.message}};
}

nlohmann::json to_json(const std::vector<Diagnostic>& ds) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : ds) out.push_back(to_json(d));
  return out;
}

}  // namespace artn::dsl
