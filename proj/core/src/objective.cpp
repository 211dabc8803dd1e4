#include "artn/objective.hpp"

#include <algorithm>

#include "artn/error.hpp"

namespace artn::dsl {

namespace {

constexpr std::pair<RequirementType, std::string_view> kTypeNames[] = {
    {RequirementType::StartColor, "start_color"}, {RequirementType::Stop, "stop"},
    {RequirementType::FlashLights, "flash_lights"}, {RequirementType::LoadPassenger, "load_passenger"},
    {RequirementType::Pause, "pause"},           {RequirementType::UnloadAll, "unload_all"},
    {RequirementType::Outcome, "outcome"},
};

RequirementType type_from_string(std::string_view text) {
  for (const auto& [t, n] : kTypeNames) {
    if (n == text) return t;
  }
  throw Error(ErrorCode::ValidationFailed, "unknown requirement type '" + std::string(text) + "'");
}

bool is_waypoint_requirement(RequirementType t) {
  return t != RequirementType::StartColor && t != RequirementType::Outcome;
}

std::optional<int> trigger_step(const sim::Episode& ep, const std::string& waypoint) {
  for (std::size_t i = 0; i < ep.steps.size(); ++i) {
    const auto& ev = ep.steps[i].events;
    if (std::find(ev.begin(), ev.end(), waypoint) != ev.end()) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::vector<const EffectEntry*> entries_for(const EffectLog& log, const EventRef& event) {
  std::vector<const EffectEntry*> out;
  for (const auto& e : log) {
    if (e.event == event) out.push_back(&e);
  }
  return out;
}

double numeric_arg(const EffectEntry& e) {
  if (e.args.empty()) return 0.0;
  if (const auto* i = std::get_if<std::int64_t>(&e.args[0].value)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&e.args[0].value)) return *d;
  return 0.0;
}

class Grader {
 public:
  Grader(const sim::Episode& ep, const EffectLog& log, const Objective& obj)
      : ep_(ep), log_(log), obj_(obj) {}

  RequirementResult grade(const Requirement& req) const {
    RequirementResult r;
    r.label = req.label();
    switch (req.type) {
      case RequirementType::StartColor: return start_color(req, r);
      case RequirementType::Outcome: return outcome(req, r);
      default: break;
    }
    const auto trig = trigger_step(ep_, req.waypoint);
    if (!trig) {
      r.detail = "waypoint '" + req.waypoint + "' was never reached";
      return r;
    }
    r.evidence_step = *trig;
    const auto entries = entries_for(log_, EventRef::at(req.waypoint));
    switch (req.type) {
      case RequirementType::Stop: return stop(*trig, r);
      case RequirementType::FlashLights:
        return called(entries, "flashLights", r, [](const EffectEntry& e) { return numeric_arg(e) > 0; });
      case RequirementType::LoadPassenger:
        return called(entries, "loadPassenger", r, [](const EffectEntry&) { return true; });
      case RequirementType::Pause: {
        const double min = req.min_seconds;
        return called(entries, "pauseDriving", r,
                      [min](const EffectEntry& e) { return numeric_arg(e) >= min - 1e-9; });
      }
      case RequirementType::UnloadAll: {
        called(entries, "unloadAllPassengers", r, [](const EffectEntry&) { return true; });
        if (r.pass && entries.back()->passengers != 0) {
          r.pass = false;
          r.detail = "passengers remain after the handler: " + std::to_string(entries.back()->passengers);
        }
        return r;
      }
      default: return r;
    }
  }

 private:
  RequirementResult start_color(const Requirement& req, RequirementResult& r) const {
    const auto entries = entries_for(log_, EventRef::start());
    r.evidence_step = 0;
    const std::string color = entries.empty() ? std::string("white") : entries.back()->color;
    r.pass = color == req.color;
    r.detail = "color after onStart is '" + color + "'";
    return r;
  }

  RequirementResult outcome(const Requirement& req, RequirementResult& r) const {
    r.pass = ep_.outcome == req.outcome;
    if (!ep_.steps.empty()) r.evidence_step = static_cast<int>(ep_.steps.size()) - 1;
    r.detail = "episode outcome " + std::string(sim::to_string(ep_.outcome));
    return r;
  }

  RequirementResult stop(int trig, RequirementResult& r) const {
    const int last = std::min(static_cast<int>(ep_.steps.size()) - 1, trig + obj_.stop_within_steps);
    for (int i = trig; i <= last; ++i) {
      if (ep_.steps[static_cast<std::size_t>(i)].state.speed < obj_.stop_speed) {
        r.pass = true;
        r.evidence_step = i;
        r.detail = "stopped " + std::to_string(i - trig) + " steps after trigger";
        return r;
      }
    }
    r.detail = "no stop within " + std::to_string(obj_.stop_within_steps) + " steps of trigger";
    return r;
  }

  template <typename Pred>
  RequirementResult& called(const std::vector<const EffectEntry*>& entries, std::string_view fn,
                            RequirementResult& r, Pred ok) const {
    for (const EffectEntry* e : entries) {
      if (e->function == fn && ok(*e)) {
        r.pass = true;
        r.evidence_step = e->t;
        r.detail = std::string(fn) + " called";
        return r;
      }
    }
    r.detail = std::string(fn) + " not called with a qualifying argument";
    return r;
  }

  const sim::Episode& ep_;
  const EffectLog& log_;
  const Objective& obj_;
};

}  // namespace

std::string_view to_string(RequirementType type) noexcept {
  for (const auto& [t, n] : kTypeNames) {
    if (t == type) return n;
  }
  return "outcome";
}

std::string Requirement::label() const {
  std::string out(to_string(type));
  if (is_waypoint_requirement(type)) out += "@" + waypoint;
  return out;
}

Objective bus_route_objective() {
  Objective o;
  o.name = "School Bus";
  o.track_id = "bus-route";
  Requirement color;
  color.type = RequirementType::StartColor;
  color.color = "yellow";
  o.requirements.push_back(color);
  auto at = [](RequirementType t, const char* wp) {
    Requirement r;
    r.type = t;
    r.waypoint = wp;
    return r;
  };
  for (const char* stop : {"stop1", "stop2", "stop3"}) {
    o.requirements.push_back(at(RequirementType::Stop, stop));
    o.requirements.push_back(at(RequirementType::FlashLights, stop));
    o.requirements.push_back(at(RequirementType::LoadPassenger, stop));
  }
  o.requirements.push_back(at(RequirementType::Stop, "school"));
  o.requirements.push_back(at(RequirementType::FlashLights, "school"));
  Requirement pause = at(RequirementType::Pause, "school");
  pause.min_seconds = 2.0;
  o.requirements.push_back(pause);
  o.requirements.push_back(at(RequirementType::UnloadAll, "school"));
  o.requirements.push_back(Requirement{});  // outcome == completed
  return o;
}

nlohmann::json to_json(const Objective& o) {
  nlohmann::json reqs = nlohmann::json::array();
  for (const auto& r : o.requirements) {
    nlohmann::json j{{"type", std::string(to_string(r.type))}};
    if (is_waypoint_requirement(r.type)) j["waypoint"] = r.waypoint;
    if (r.type == RequirementType::StartColor) j["color"] = r.color;
    if (r.type == RequirementType::Pause) j["minSeconds"] = r.min_seconds;
    if (r.type == RequirementType::Outcome) j["outcome"] = std::string(sim::to_string(r.outcome));
    reqs.push_back(std::move(j));
  }
  return {{"name", o.name},
          {"trackId", o.track_id},
          {"stopSpeed", o.stop_speed},
          {"stopWithinSteps", o.stop_within_steps},
          {"requirements", std::move(reqs)}};
}

Objective objective_from_json(const nlohmann::json& j) {
  try {
    Objective o;
    o.name = j.value("name", std::string());
    o.track_id = j.at("trackId").get<std::string>();
    o.stop_speed = j.value("stopSpeed", 0.1);
    o.stop_within_steps = j.value("stopWithinSteps", 10);
    for (const auto& rj : j.at("requirements")) {
      Requirement r;
      r.type = type_from_string(rj.at("type").get<std::string>());
      if (is_waypoint_requirement(r.type)) r.waypoint = rj.at("waypoint").get<std::string>();
      if (r.type == RequirementType::StartColor) r.color = rj.at("color").get<std::string>();
      if (r.type == RequirementType::Pause) r.min_seconds = rj.at("minSeconds").get<double>();
      if (r.type == RequirementType::Outcome) {
        r.outcome = sim::outcome_from_string(rj.value("outcome", std::string("completed")));
      }
      o.requirements.push_back(std::move(r));
    }
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ValidationFailed, std::string("objective: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ValidationFailed, "objective: " + e.detail());
  }
}

int ObjectiveReport::failures() const {
  return static_cast<int>(std::count_if(results.begin(), results.end(),
                                        [](const RequirementResult& r) { return !r.pass; }));
}

nlohmann::json to_json(const ObjectiveReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.results) {
    rows.push_back({{"label", r.label},
                    {"pass", r.pass},
                    {"evidenceStep", r.evidence_step ? nlohmann::json(*r.evidence_step) : nlohmann::json(nullptr)},
                    {"detail", r.detail}});
  }
  return {{"objective", report.objective}, {"pass", report.pass}, {"requirements", std::move(rows)}};
}

ObjectiveReport evaluate_objective(const geo::Track& track, const sim::Episode& episode,
                                   const EffectLog& effects, const Objective& objective) {
  for (const auto& req : objective.requirements) {
    if (!is_waypoint_requirement(req.type)) continue;
    const auto& wps = track.waypoints();
    const bool found = std::any_of(wps.begin(), wps.end(),
                                   [&](const geo::Waypoint& w) { return w.name == req.waypoint; });
    if (!found) {
      throw Error(ErrorCode::TrackMismatch,
                  "waypoint '" + req.waypoint + "' is not on track '" + track.id() + "'");
    }
  }
  ObjectiveReport report;
  report.objective = objective.name;
  const Grader grader(episode, effects, objective);
  for (const auto& req : objective.requirements) report.results.push_back(grader.grade(req));
  report.pass = report.failures() == 0;
  return report;
}

}  // namespace artn::dsl
