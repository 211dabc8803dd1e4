#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "artn/dsl/interpreter.hpp"
#include "artn/sim.hpp"

namespace artn::sim {

nlohmann::json episode_header_json(const Episode& episode);
nlohmann::json step_json(const StepRecord& step);

/// Header line followed by one line per step, each terminated by '\n'.
/// Byte-identical for identical episodes.
void write_episode_jsonl(std::ostream& out, const Episode& episode);
std::string episode_to_jsonl(const Episode& episode);

/// Throws CorruptRecord on malformed input. Step states round-trip
/// position, heading and speed; `paused_until` is not persisted.
Episode read_episode_jsonl(std::istream& in);
Episode episode_from_jsonl(const std::string& text);

void write_effects_jsonl(std::ostream& out, const dsl::EffectLog& log);
dsl::EffectLog read_effects_jsonl(std::istream& in);

}  // namespace artn::sim
