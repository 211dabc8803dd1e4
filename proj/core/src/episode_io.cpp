#include "artn/episode_io.hpp"

#include <sstream>

#include "artn/error.hpp"

namespace artn::sim {

namespace {

nlohmann::json point(geo::Vec2 p) { return nlohmann::json::array({p.x, p.y}); }

geo::Vec2 point_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::CorruptRecord, "expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

nlohmann::json episode_header_json(const Episode& episode) {
  return {{"id", episode.id},
          {"trackId", episode.track_id},
          {"seed", episode.seed},
          {"outcome", std::string(to_string(episode.outcome))},
          {"totalReward", episode.total_reward},
          {"endpoint", point(episode.endpoint)}};
}

nlohmann::json step_json(const StepRecord& step) {
  return {{"t", step.t},
          {"pos", point(step.state.position)},
          {"heading", step.state.heading},
          {"speed", step.state.speed},
          {"action", static_cast<int>(step.action)},
          {"reward", step.reward},
          {"newTiles", step.new_tiles},
          {"events", step.events}};
}

void write_episode_jsonl(std::ostream& out, const Episode& episode) {
  out << episode_header_json(episode).dump() << '\n';
  for (const StepRecord& s : episode.steps) out << step_json(s).dump() << '\n';
}

std::string episode_to_jsonl(const Episode& episode) {
  std::ostringstream out;
  write_episode_jsonl(out, episode);
  return out.str();
}

Episode read_episode_jsonl(std::istream& in) {
  Episode ep;
  std::string line;
  try {
    if (!std::getline(in, line)) throw Error(ErrorCode::CorruptRecord, "empty episode file");
    const auto header = nlohmann::json::parse(line);
    ep.id = header.at("id").get<std::string>();
    ep.track_id = header.at("trackId").get<std::string>();
    ep.seed = header.at("seed").get<std::uint64_t>();
    ep.outcome = outcome_from_string(header.at("outcome").get<std::string>());
    ep.total_reward = header.at("totalReward").get<double>();
    ep.endpoint = point_from(header.at("endpoint"));
    int step_no = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      StepRecord s;
      s.t = j.at("t").get<int>();
      s.state.position = point_from(j.at("pos"));
      s.state.heading = j.at("heading").get<double>();
      s.state.speed = j.at("speed").get<double>();
      s.state.step = ++step_no;
      const int action = j.at("action").get<int>();
      if (action < 0 || action >= kActionCount) {
        throw Error(ErrorCode::CorruptRecord, "action out of range");
      }
      s.action = static_cast<Action>(action);
      s.reward = j.at("reward").get<double>();
      s.new_tiles = j.at("newTiles").get<std::vector<int>>();
      s.events = j.at("events").get<std::vector<std::string>>();
      ep.steps.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptRecord, e.what());
  }
  return ep;
}

Episode episode_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  return read_episode_jsonl(in);
}

void write_effects_jsonl(std::ostream& out, const dsl::EffectLog& log) {
  for (const auto& e : log) out << dsl::to_json(e).dump() << '\n';
}

dsl::EffectLog read_effects_jsonl(std::istream& in) {
  dsl::EffectLog log;
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      log.push_back(dsl::effect_entry_from_json(nlohmann::json::parse(line)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptRecord, e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptRecord, e.detail());
  }
  return log;
}

}  // namespace artn::sim
