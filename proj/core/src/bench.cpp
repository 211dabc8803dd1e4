#include "artn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "artn/error.hpp"
#include "artn/tracks.hpp"

namespace artn::bench {

double reward_target(double baseline_mean) { return baseline_mean + 2.0 * std::abs(baseline_mean); }

double tile_fraction(const geo::Track& track, const sim::Episode& episode) {
  return (episode.tiles_visited() + 1.0) / track.tile_count();
}

double sampled_mean_reward(const nn::PolicyNet& net, const geo::Track& track, int n, std::uint64_t seed,
                           const sim::SimParams& params) {
  if (n <= 0) return 0.0;
  Rng rng(seed);
  nn::NetPolicy policy(net);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    sum += sim::run_episode(policy, track, rng.next_u64(), sim::RunMode::Train, nullptr, params)
               .episode.total_reward;
  }
  return sum / n;
}

SeedResult run_seed(const geo::Track& track, std::uint64_t seed, const BenchConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  SeedResult r;
  r.seed = seed;
  ppo::Model model{{"bench", "bench", 0, ""}, nn::PolicyNet()};
  Rng init_rng(seed);
  model.net.init(init_rng);
  ppo::TrainOptions opts = cfg.train;

  if (cfg.pretrain_episodes > 0) {
    const geo::Track loop = *geo::builtin_track("rapid-7");
    opts.seed = seed ^ 0x9e3779b97f4a7c15ull;
    ppo::train(model, loop, cfg.pretrain_episodes, opts);
  }

  r.baseline_mean = sampled_mean_reward(model.net, track, cfg.baseline_episodes, seed + 1000, opts.sim);

  opts.seed = seed;
  r.summary = ppo::train(model, track, cfg.episodes, opts);
  const auto& eps = r.summary.episodes;
  const auto window = static_cast<std::size_t>(std::min<int>(cfg.final_window, static_cast<int>(eps.size())));
  for (std::size_t i = 0; i < window; ++i) {
    r.first_mean += eps[i].total_reward / window;
    r.final_mean += eps[eps.size() - window + i].total_reward / window;
  }

  nn::NetPolicy greedy(model.net);
  const auto eval = sim::run_episode(greedy, track, seed, sim::RunMode::Test, nullptr, opts.sim, opts.obs);
  r.eval_reward = eval.episode.total_reward;
  r.eval_outcome = eval.episode.outcome;
  r.eval_tile_fraction = tile_fraction(track, eval.episode);

  r.reward_ok = r.final_mean >= reward_target(r.baseline_mean);
  r.tiles_ok = r.eval_tile_fraction >= cfg.min_tile_fraction;
  r.pass = r.reward_ok && r.tiles_ok;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

BenchReport run_bench(const geo::Track& track, const BenchConfig& cfg, const ProgressFn& progress) {
  if (cfg.seeds < 1 || cfg.episodes < 1) throw Error(ErrorCode::DegenerateInput, "need at least one seed and episode");
  BenchReport report;
  report.track_id = track.id();
  report.seeds.resize(static_cast<std::size_t>(cfg.seeds));

  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= report.seeds.size()) return;
        i = next++;
      }
      SeedResult r = run_seed(track, cfg.first_seed + i, cfg);
      std::lock_guard lock(mu);
      report.seeds[i] = std::move(r);
      if (progress) progress(report.seeds[i]);
    }
  };
  const int threads = std::clamp(cfg.threads, 1, cfg.seeds);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& s : report.seeds) report.passed += s.pass ? 1 : 0;
  report.pass = report.passed >= cfg.required_passes;
  return report;
}

nlohmann::json to_json(const BenchReport& report) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& s : report.seeds) {
    seeds.push_back({{"seed", s.seed},
                     {"baselineMean", s.baseline_mean},
                     {"rewardTarget", reward_target(s.baseline_mean)},
                     {"firstMean", s.first_mean},
                     {"finalMean", s.final_mean},
                     {"evalReward", s.eval_reward},
                     {"evalOutcome", std::string(sim::to_string(s.eval_outcome))},
                     {"evalTileFraction", s.eval_tile_fraction},
                     {"episodes", s.summary.episodes.size()},
                     {"pass", s.pass},
                     {"seconds", s.seconds}});
  }
  return {{"trackId", report.track_id}, {"passed", report.passed}, {"pass", report.pass}, {"seeds", std::move(seeds)}};
}

}  // namespace artn::bench
