#include "artn/ppo.hpp"

#include <cmath>
#include <numeric>

#include "artn/error.hpp"

namespace artn::ppo {

void TrainHyper::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0) || !(lambda > 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::DegenerateInput, "gamma and lambda must lie in (0, 1]");
  }
  if (epochs <= 0 || minibatch <= 0 || rollout <= 0 || rollout % minibatch != 0) {
    throw Error(ErrorCode::DegenerateInput, "rollout must be a positive multiple of minibatch");
  }
  if (!(lr > 0.0) || !(clip > 0.0) || !(reward_scale > 0.0) || entropy_coef < 0.0 || value_coef < 0.0) {
    throw Error(ErrorCode::DegenerateInput, "invalid optimizer hyperparameters");
  }
}

GaeOutput compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const char> dones, double bootstrap, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "GAE inputs differ in length");
  }
  GaeOutput out{std::vector<double>(n), std::vector<double>(n)};
  double next_adv = 0.0;
  double next_value = bootstrap;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * live - values[i];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
    next_value = values[i];
  }
  return out;
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / n);
  for (double& a : adv) a = (a - mean) / (std + 1e-8);
}

RolloutCollector::RolloutCollector(const geo::Track& track, std::uint64_t seed, sim::SimParams params,
                                   sim::ObservationConfig obs)
    : env_(track, params, obs), seed_rng_(seed) {}

RolloutBuffer RolloutCollector::collect(const nn::PolicyNet& net, int steps, const EpisodeSink& sink,
                                        const std::atomic<bool>* cancel) {
  RolloutBuffer buf;
  buf.obs_size = net.config().input_size();
  const auto n = static_cast<std::size_t>(steps);
  buf.obs.reserve(n * static_cast<std::size_t>(buf.obs_size));
  buf.actions.reserve(n);
  buf.rewards.reserve(n);
  buf.dones.reserve(n);
  buf.values.reserve(n);
  buf.log_probs.reserve(n);

  nn::Activations<float> act;
  for (int t = 0; t < steps; ++t) {
    if (cancel && cancel->load(std::memory_order_relaxed)) {
      throw Error(ErrorCode::Cancelled, "training cancelled");
    }
    if (need_reset_) {
      episode_seed_ = seed_rng_.next_u64();
      action_rng_ = Rng(episode_seed_);
      env_.reset();
      need_reset_ = false;
    }
    const sim::Observation& obs = env_.observation();
    net.forward(obs.data, act);
    for (float l : act.out.logits) {
      if (!std::isfinite(l)) throw Error(ErrorCode::NonFiniteLoss, "policy produced non-finite logits");
    }
    const nn::SampledAction s = nn::sample_action(act.out.logits, action_rng_);
    buf.obs.insert(buf.obs.end(), obs.data.begin(), obs.data.end());
    buf.actions.push_back(s.action);
    buf.log_probs.push_back(s.log_prob);
    buf.values.push_back(static_cast<double>(act.out.value));

    const sim::StepRecord& rec = env_.step(static_cast<sim::Action>(s.action));
    buf.rewards.push_back(rec.reward);
    const bool done = env_.done();
    buf.dones.push_back(done ? 1 : 0);
    if (done) {
      ++completed_;
      sim::Episode ep = env_.take_episode("", episode_seed_);
      if (sink) sink(completed_, std::move(ep));
      need_reset_ = true;
    }
  }
  buf.bootstrap = need_reset_ ? 0.0 : static_cast<double>(net.forward(env_.observation().data).value);
  return buf;
}

UpdateStats ppo_update(nn::PolicyNet& net, nn::Adam& adam, const RolloutBuffer& buffer,
                       const TrainHyper& hyper, Rng& shuffle_rng) {
  const std::size_t n = buffer.size();
  std::vector<double> rewards(buffer.rewards);
  for (double& r : rewards) r *= hyper.reward_scale;
  GaeOutput gae = compute_gae(rewards, buffer.values, buffer.dones, buffer.bootstrap, hyper.gamma,
                              hyper.lambda);
  if (hyper.normalize_advantages) normalize_advantages(gae.advantages);

  const nn::PpoLossConfig loss_cfg{hyper.clip, hyper.value_coef, hyper.entropy_coef};
  adam.config().lr = hyper.lr;
  adam.config().max_grad_norm = hyper.max_grad_norm;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<float> grad(net.param_count());
  const auto in = static_cast<std::size_t>(buffer.obs_size);
  const auto mb = static_cast<std::size_t>(hyper.minibatch);

  UpdateStats stats;
  int count = 0;
  nn::Minibatch<float> batch;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      batch.obs.clear();
      batch.actions.clear();
      batch.old_log_probs.clear();
      batch.advantages.clear();
      batch.returns.clear();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t j = order[k];
        const float* o = buffer.obs.data() + j * in;
        batch.obs.insert(batch.obs.end(), o, o + in);
        batch.actions.push_back(buffer.actions[j]);
        batch.old_log_probs.push_back(buffer.log_probs[j]);
        batch.advantages.push_back(gae.advantages[j]);
        batch.returns.push_back(gae.returns[j]);
      }
      const nn::LossStats st = nn::ppo_loss(net, batch, loss_cfg, std::span<float>(grad));
      stats.grad_norm += adam.step(net.params(), std::span<float>(grad));
      stats.mean.total += st.total;
      stats.mean.policy_loss += st.policy_loss;
      stats.mean.value_loss += st.value_loss;
      stats.mean.entropy += st.entropy;
      stats.mean.clip_fraction += st.clip_fraction;
      stats.mean.approx_kl += st.approx_kl;
      ++count;
    }
  }
  if (count > 0) {
    const double k = 1.0 / count;
    stats.grad_norm *= k;
    stats.mean.total *= k;
    stats.mean.policy_loss *= k;
    stats.mean.value_loss *= k;
    stats.mean.entropy *= k;
    stats.mean.clip_fraction *= k;
    stats.mean.approx_kl *= k;
  }
  return stats;
}

TrainSummary train(Model& model, const geo::Track& track, int n_episodes, const TrainOptions& opts,
                   const EpisodeSink& sink) {
  if (n_episodes < 1) throw Error(ErrorCode::DegenerateInput, "n_episodes must be at least 1");
  opts.hyper.validate();
  if (model.net.config().input_size() != opts.obs.frames * opts.obs.height * opts.obs.width) {
    throw Error(ErrorCode::ShapeMismatch, "network input does not match the observation shape");
  }

  Rng master(opts.seed);
  RolloutCollector collector(track, master.next_u64(), opts.sim, opts.obs);
  Rng shuffle_rng(master.next_u64());
  nn::Adam adam(model.net.param_count());

  TrainSummary summary;
  // The last rollout may finish episodes past n_episodes; they still feed
  // the update but are not reported.
  const EpisodeSink forward = [&](std::int64_t ordinal, sim::Episode&& ep) {
    if (ordinal > n_episodes) return;
    summary.episodes.push_back(
        {ordinal, ep.total_reward, static_cast<int>(ep.steps.size()), ep.outcome, ep.tiles_visited()});
    ++model.meta.trained_episodes;
    if (sink) sink(ordinal, std::move(ep));
  };
  while (collector.episodes_completed() < n_episodes) {
    const RolloutBuffer buf = collector.collect(model.net, opts.hyper.rollout, forward, opts.cancel);
    summary.updates.push_back(ppo_update(model.net, adam, buf, opts.hyper, shuffle_rng));
  }
  return summary;
}

void write_summary_csv(std::ostream& out, const TrainSummary& summary) {
  out << "episode,total_reward,steps,outcome\n";
  char buf[64];
  for (const auto& e : summary.episodes) {
    std::snprintf(buf, sizeof buf, "%.6f", e.total_reward);
    out << e.ordinal << ',' << buf << ',' << e.steps << ',' << sim::to_string(e.outcome) << '\n';
  }
}

}  // namespace artn::ppo
