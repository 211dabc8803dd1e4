#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "artn/policy_net.hpp"
#include "artn/sim.hpp"

namespace artn::nn {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

/// Binary weight file: "ARTN", u32 version, u32 tensor count, then per
/// tensor a u16 name length, the UTF-8 name, a u8 rank, u32 dims and
/// little-endian f32 data in row-major order.
std::vector<std::uint8_t> serialize_weights(const PolicyNet& net);

/// Parses a weight file against the layout of `expected`. Throws BadMagic,
/// VersionMismatch, or ShapeMismatch naming the offending tensor; truncated
/// input is reported, never read past.
PolicyNet deserialize_weights(std::span<const std::uint8_t> bytes, const NetConfig& expected = {});

void save_weights(const std::filesystem::path& path, const PolicyNet& net);
PolicyNet load_weights(const std::filesystem::path& path, const NetConfig& expected = {});

struct ModelMeta {
  std::string model_id;
  std::string name;
  std::int64_t trained_episodes = 0;
  std::string created_at;  // ISO-8601 UTC

  friend bool operator==(const ModelMeta&, const ModelMeta&) = default;
};

nlohmann::json to_json(const ModelMeta& meta);
ModelMeta model_meta_from_json(const nlohmann::json& j);

/// Runs a network as a simulator policy.
class NetPolicy final : public sim::Policy {
 public:
  explicit NetPolicy(const PolicyNet& net) : net_(net) {}
  nn::Logits logits(const sim::Observation& obs, const sim::VehicleState& state) override;

 private:
  const PolicyNet& net_;
  Activations<float> act_;
};

}  // namespace artn::nn
