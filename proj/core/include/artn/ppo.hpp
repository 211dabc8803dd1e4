#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "artn/geometry.hpp"
#include "artn/model.hpp"
#include "artn/policy_net.hpp"
#include "artn/rng.hpp"
#include "artn/sim.hpp"

namespace artn::ppo {

struct TrainHyper {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 64;
  int rollout = 1024;
  double lr = 2.5e-4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  // Rewards are multiplied by this before advantage estimation so value
  // targets stay O(1). Episode logs keep raw rewards.
  double reward_scale = 0.01;

  // Throws DegenerateInput.
  void validate() const;
};

struct RolloutBuffer {
  int obs_size = 0;
  std::vector<float> obs;  // size() * obs_size
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<char> dones;  // episode ended after this step
  std::vector<double> values;
  std::vector<double> log_probs;
  double bootstrap = 0.0;  // value of the state after the last step, 0 if it ended an episode

  std::size_t size() const { return actions.size(); }
};

struct GaeOutput {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Reverse GAE recursion:
///   delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
///   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
/// with V_T = bootstrap; returns = advantages + values.
GaeOutput compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const char> dones, double bootstrap, double gamma, double lambda);

// In place: mean 0, std 1 (population std, eps 1e-8).
void normalize_advantages(std::vector<double>& adv);

// Receives each finished episode with its 1-based ordinal within the run.
using EpisodeSink = std::function<void(std::int64_t ordinal, sim::Episode&& episode)>;

/// Runs episodes back to back with one environment. The environment and the
/// in-progress episode carry over between collect() calls. Each episode's
/// seed comes from the collector's RNG and seeds its action sampling.
class RolloutCollector {
 public:
  RolloutCollector(const geo::Track& track, std::uint64_t seed, sim::SimParams params = {},
                   sim::ObservationConfig obs = {});

  /// Gathers exactly `steps` transitions. Finished episodes go to `sink` in
  /// completion order before this returns. When `cancel` becomes true the
  /// collection stops and Error(Cancelled) is thrown.
  RolloutBuffer collect(const nn::PolicyNet& net, int steps, const EpisodeSink& sink,
                        const std::atomic<bool>* cancel = nullptr);

  std::int64_t episodes_completed() const { return completed_; }

 private:
  sim::Environment env_;
  Rng seed_rng_;
  Rng action_rng_{0};
  std::uint64_t episode_seed_ = 0;
  bool need_reset_ = true;
  std::int64_t completed_ = 0;
};

struct UpdateStats {
  nn::LossStats mean;  // averaged over minibatches
  double grad_norm = 0.0;
};

/// One PPO update (epochs x shuffled minibatches) on a collected rollout.
UpdateStats ppo_update(nn::PolicyNet& net, nn::Adam& adam, const RolloutBuffer& buffer,
                       const TrainHyper& hyper, Rng& shuffle_rng);

struct EpisodeSummary {
  std::int64_t ordinal = 0;
  double total_reward = 0.0;
  int steps = 0;
  sim::Outcome outcome = sim::Outcome::Timeout;
  int tiles_visited = 0;
};

struct TrainSummary {
  std::vector<EpisodeSummary> episodes;
  std::vector<UpdateStats> updates;
};

struct TrainOptions {
  TrainHyper hyper;
  sim::SimParams sim;
  sim::ObservationConfig obs;
  std::uint64_t seed = 0;
  const std::atomic<bool>* cancel = nullptr;
};

struct Model {
  nn::ModelMeta meta;
  nn::PolicyNet net;
};

/// Alternates rollouts and updates until `n_episodes` episodes have been
/// delivered to `sink`; episodes completed after that are used for the final
/// update but not delivered. `model.meta.trained_episodes` grows with every
/// delivered episode. Cancellation is checked during rollouts; it throws
/// Error(Cancelled) leaving the model with the updates made so far (a
/// partially collected rollout is discarded). Throws NonFiniteLoss.
TrainSummary train(Model& model, const geo::Track& track, int n_episodes, const TrainOptions& opts,
                   const EpisodeSink& sink = {});

// "episode,total_reward,steps,outcome" plus one row per episode.
void write_summary_csv(std::ostream& out, const TrainSummary& summary);

}  // namespace artn::ppo
