#include "artn/dsl/interpreter.hpp"

#include <array>
#include <cmath>

namespace artn::dsl {

namespace {

// Control characters spelled as escapes so a diagnostic stays on one line.
std::string printable(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '\n') out += "\\n";
    else if (c == '\t') out += "\\t";
    else if (static_cast<unsigned char>(c) < 0x20) out += '?';
    else out += c;
  }
  return out;
}

struct Fault {
  Diagnostic diagnostic;
};

double as_number(const Literal& lit) {
  if (const auto* i = std::get_if<std::int64_t>(&lit.value)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&lit.value)) return *d;
  return 0.0;
}

[[noreturn]] void fault(const Call& call, const char* code, std::string msg) {
  throw Fault{{Severity::Error, call.pos.line, call.pos.column, code, std::move(msg)}};
}

class Runner {
 public:
  Runner(const EventRef& event, int t, VehicleEffects& fx, EffectLog& log, DispatchResult& out)
      : event_(event), t_(t), fx_(fx), log_(log), out_(out) {}

  void run(const std::vector<Statement>& body) {
    for (const Statement& st : body) {
      if (st.kind == Statement::Kind::Repeat) {
        for (std::int64_t i = 0; i < st.count; ++i) run(st.body);
      } else {
        call(st.call);
      }
    }
  }

 private:
  void call(const Call& c) {
    const auto arg_string = [&]() -> const std::string& {
      return std::get<std::string>(c.args.at(0).value);
    };
    if (c.name == "setColor") {
      if (!is_valid_color(arg_string())) fault(c, "R001", "invalid color '" + printable(arg_string()) + "'");
      fx_.color = arg_string();
    } else if (c.name == "beepHorn") {
      ++fx_.horn_beeps;
    } else if (c.name == "flashLights") {
      const auto n = std::get<std::int64_t>(c.args.at(0).value);
      if (n < 0 || n > 1'000'000) {
        fault(c, "R003", "flashLights count out of range: " + std::to_string(n));
      }
      fx_.lights_flashes += static_cast<int>(n);
    } else if (c.name == "loadPassenger") {
      ++fx_.passengers;
    } else if (c.name == "unloadPassenger") {
      if (fx_.passengers == 0) fault(c, "R002", "no passengers to unload");
      --fx_.passengers;
    } else if (c.name == "unloadAllPassengers") {
      fx_.passengers = 0;
    } else if (c.name == "pauseDriving") {
      const double s = as_number(c.args.at(0));
      if (!(s >= 0.0) || !std::isfinite(s)) {
        fault(c, "R003", "pause duration out of range");
      }
      out_.pause = PauseRequest{PauseRequest::Kind::Pause, s};
    } else if (c.name == "resumeDriving") {
      out_.pause = PauseRequest{PauseRequest::Kind::Resume, 0.0};
    } else {
      fault(c, "R003", "unknown function '" + c.name + "'");
    }
    log_.push_back({t_, event_, c.name, c.args, fx_.passengers, fx_.color});
  }

  const EventRef& event_;
  int t_;
  VehicleEffects& fx_;
  EffectLog& log_;
  DispatchResult& out_;
};

const Handler* handler_for(const Program& program, const EventRef& event) {
  switch (event.kind) {
    case EventKind::Start: return program.on_start ? &*program.on_start : nullptr;
    case EventKind::Step: return program.on_step ? &*program.on_step : nullptr;
    case EventKind::End: return program.on_end ? &*program.on_end : nullptr;
    case EventKind::Waypoint: return program.find_waypoint(event.waypoint);
  }
  return nullptr;
}

nlohmann::json literal_json(const Literal& lit) {
  if (const auto* s = std::get_if<std::string>(&lit.value)) return *s;
  if (const auto* i = std::get_if<std::int64_t>(&lit.value)) return *i;
  return std::get<double>(lit.value);
}

}  // namespace

bool is_valid_color(std::string_view color) {
  static constexpr std::array<std::string_view, 6> named = {"red",   "yellow", "blue",
                                                            "green", "white",  "black"};
  for (auto n : named) {
    if (color == n) return true;
  }
  if (color.size() != 7 || color[0] != '#') return false;
  for (std::size_t i = 1; i < 7; ++i) {
    const char c = color[i];
    const bool hex = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
    if (!hex) return false;
  }
  return true;
}

DispatchResult dispatch_event(const Program& program, const EventRef& event, int t,
                              VehicleEffects& effects, EffectLog& log) {
  DispatchResult result;
  const Handler* h = handler_for(program, event);
  if (!h) return result;
  try {
    Runner(event, t, effects, log, result).run(h->body);
  } catch (const Fault& f) {
    result.faults.push_back(f.diagnostic);
  } catch (const std::exception& e) {
    // Only reachable for unchecked programs (wrong literal types).
    result.faults.push_back({Severity::Error, h->pos.line, h->pos.column, "R003", e.what()});
  }
  return result;
}

nlohmann::json to_json(const EffectEntry& entry) {
  nlohmann::json args = nlohmann::json::array();
  for (const Literal& lit : entry.args) args.push_back(literal_json(lit));
  return {{"t", entry.t},
          {"event", to_string(entry.event)},
          {"function", entry.function},
          {"args", std::move(args)},
          {"passengers", entry.passengers},
          {"color", entry.color}};
}

EffectEntry effect_entry_from_json(const nlohmann::json& j) {
  EffectEntry e;
  e.t = j.at("t").get<int>();
  e.event = event_from_string(j.at("event").get<std::string>());
  e.function = j.at("function").get<std::string>();
  for (const auto& a : j.at("args")) {
    Literal lit;
    if (a.is_string()) {
      lit.value = a.get<std::string>();
    } else if (a.is_number_integer()) {
      lit.value = a.get<std::int64_t>();
    } else {
      lit.value = a.get<double>();
    }
    e.args.push_back(std::move(lit));
  }
  e.passengers = j.at("passengers").get<int>();
  e.color = j.at("color").get<std::string>();
  return e;
}

}  // namespace artn::dsl
