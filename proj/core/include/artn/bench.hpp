#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "artn/geometry.hpp"
#include "artn/ppo.hpp"

namespace artn::bench {

struct BenchConfig {
  int episodes = 300;
  int seeds = 10;
  std::uint64_t first_seed = 1;
  // Episodes of training on the general loop (rapid-7) before the run.
  int pretrain_episodes = 0;
  int baseline_episodes = 20;
  int final_window = 20;
  double min_tile_fraction = 0.8;
  int required_passes = 7;
  // Seeds run concurrently; results do not depend on this.
  int threads = 1;
  ppo::TrainOptions train;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double baseline_mean = 0.0;
  double first_mean = 0.0;
  double final_mean = 0.0;
  double eval_reward = 0.0;
  sim::Outcome eval_outcome = sim::Outcome::Timeout;
  double eval_tile_fraction = 0.0;
  bool reward_ok = false;
  bool tiles_ok = false;
  bool pass = false;
  double seconds = 0.0;
  ppo::TrainSummary summary;
};

struct BenchReport {
  std::string track_id;
  std::vector<SeedResult> seeds;
  int passed = 0;
  bool pass = false;
};

/// Reward target derived from the random-policy baseline: three times the
/// baseline when it is positive, generalized as baseline + 2|baseline| so a
/// negative baseline still demands a real improvement.
double reward_target(double baseline_mean);

// Visited tiles over the episode (the start tile counts), as a fraction of K.
double tile_fraction(const geo::Track& track, const sim::Episode& episode);

// Mean total reward of `n` sampled episodes with `net` (seeds derived from `seed`).
double sampled_mean_reward(const nn::PolicyNet& net, const geo::Track& track, int n, std::uint64_t seed,
                           const sim::SimParams& params = {});

SeedResult run_seed(const geo::Track& track, std::uint64_t seed, const BenchConfig& cfg);

using ProgressFn = std::function<void(const SeedResult&)>;
BenchReport run_bench(const geo::Track& track, const BenchConfig& cfg, const ProgressFn& progress = {});

nlohmann::json to_json(const BenchReport& report);

}  // namespace artn::bench
