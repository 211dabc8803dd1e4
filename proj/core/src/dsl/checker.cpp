#include "artn/dsl/checker.hpp"

#include <algorithm>
#include <array>

namespace artn::dsl {

namespace {

const std::array<FunctionSignature, 8>& library() {
  static const std::array<FunctionSignature, 8> table = {{
      {"setColor", {ParamType::String}, "set the body color (named color or #RRGGBB)"},
      {"beepHorn", {}, "beep the horn once"},
      {"flashLights", {ParamType::Integer}, "flash the lights n times"},
      {"loadPassenger", {}, "load one passenger"},
      {"unloadPassenger", {}, "unload one passenger"},
      {"unloadAllPassengers", {}, "unload every passenger"},
      {"pauseDriving", {ParamType::Number}, "hold the brake for the given seconds"},
      {"resumeDriving", {}, "cancel a pause and keep driving"},
  }};
  return table;
}

std::string_view type_name(ParamType t) {
  switch (t) {
    case ParamType::String: return "string";
    case ParamType::Integer: return "integer";
    case ParamType::Number: return "number";
  }
  return "value";
}

std::string_view literal_type_name(const Literal& lit) {
  if (lit.is_string()) return "string";
  if (lit.is_int()) return "integer";
  return "number";
}

bool accepts(ParamType t, const Literal& lit) {
  switch (t) {
    case ParamType::String: return lit.is_string();
    case ParamType::Integer: return lit.is_int();
    case ParamType::Number: return lit.is_int() || lit.is_number();
  }
  return false;
}

void error(std::vector<Diagnostic>& out, SourcePos pos, const char* code, std::string msg) {
  out.push_back({Severity::Error, pos.line, pos.column, code, std::move(msg)});
}

void check_body(const std::vector<Statement>& body, std::vector<Diagnostic>& out) {
  for (const Statement& st : body) {
    if (st.kind == Statement::Kind::Repeat) {
      if (st.count <= 0) {
        error(out, st.pos, "E105",
              "repeat count must be positive, got " + std::to_string(st.count));
      }
      check_body(st.body, out);
      continue;
    }
    const Call& call = st.call;
    const FunctionSignature* sig = find_function(call.name);
    if (!sig) {
      error(out, call.pos, "E101", "unknown function '" + call.name + "'");
      continue;
    }
    if (call.args.size() != sig->params.size()) {
      error(out, call.pos, "E102",
            "'" + call.name + "' expects " + std::to_string(sig->params.size()) +
                " argument(s), got " + std::to_string(call.args.size()));
      continue;
    }
    for (std::size_t i = 0; i < call.args.size(); ++i) {
      if (!accepts(sig->params[i], call.args[i])) {
        error(out, call.args[i].pos, "E103",
              "argument " + std::to_string(i + 1) + " of '" + call.name + "' expects " +
                  std::string(type_name(sig->params[i])) + ", got " +
                  std::string(literal_type_name(call.args[i])));
      }
    }
  }
}

}  // namespace

std::span<const FunctionSignature> function_library() { return library(); }

const FunctionSignature* find_function(std::string_view name) {
  for (const auto& f : library()) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::vector<Diagnostic> check(const Program& program, const geo::Track& track) {
  std::vector<Diagnostic> out;
  for (const auto* h : {&program.on_start, &program.on_step, &program.on_end}) {
    if (*h) check_body((*h)->body, out);
  }
  for (const auto& wp : program.waypoints) {
    const auto& known = track.waypoints();
    const bool exists = std::any_of(known.begin(), known.end(),
                                    [&](const geo::Waypoint& w) { return w.name == wp.waypoint; });
    if (!exists) {
      error(out, wp.name_pos, "E104",
            "unknown waypoint \"" + wp.waypoint + "\" on track '" + track.id() + "'");
    }
    check_body(wp.handler.body, out);
  }
  std::stable_sort(out.begin(), out.end(), [](const Diagnostic& a, const Diagnostic& b) {
    return std::tie(a.line, a.column) < std::tie(b.line, b.column);
  });
  for (const geo::Waypoint& w : track.waypoints()) {
    if (!program.find_waypoint(w.name)) {
      out.push_back({Severity::Warning, 1, 1, "W201",
                     "waypoint \"" + w.name + "\" has no handler"});
    }
  }
  return out;
}

}  // namespace artn::dsl
