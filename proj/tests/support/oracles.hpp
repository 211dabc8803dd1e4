#pragma once

// Reference computations the tests compare the library against. Written
// from the definitions, independently of the production code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "artn/policy_net.hpp"
#include "artn/rng.hpp"

namespace artn::oracle {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// A_t = sum_k (prod_{j<k} gamma*lambda*(1-done_j)) * delta_k, summed directly.
inline GaeResult gae_bruteforce(const std::vector<double>& rewards, const std::vector<double>& values,
                                const std::vector<bool>& dones, double bootstrap, double gamma,
                                double lambda) {
  const std::size_t n = rewards.size();
  std::vector<double> delta(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double next_v = k + 1 < n ? values[k + 1] : bootstrap;
    delta[k] = rewards[k] + gamma * next_v * (dones[k] ? 0.0 : 1.0) - values[k];
  }
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0;
    for (std::size_t k = t; k < n; ++k) {
      double w = 1.0;
      for (std::size_t j = t; j < k; ++j) w *= gamma * lambda * (dones[j] ? 0.0 : 1.0);
      sum += w * delta[k];
    }
    out.advantages[t] = sum;
    out.returns[t] = sum + values[t];
  }
  return out;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped = 0;  // parameters whose perturbation crossed a ReLU or clip boundary
};

namespace detail {

// Which ReLUs are active and which samples sit outside the clip range.
inline std::vector<bool> kink_signature(const nn::ActorCritic<double>& net,
                                        const nn::Minibatch<double>& batch, double clip) {
  std::vector<bool> sig;
  nn::Activations<double> act;
  const auto in = static_cast<std::size_t>(net.config().input_size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    net.forward(std::span<const double>(batch.obs.data() + i * in, in), act);
    for (double v : act.conv1) sig.push_back(v > 0);
    for (double v : act.conv2) sig.push_back(v > 0);
    for (double v : act.hidden) sig.push_back(v > 0);
    const auto& z = act.out.logits;
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0;
    for (double l : z) s += std::exp(l - m);
    const double logp = z[static_cast<std::size_t>(batch.actions[i])] - m - std::log(s);
    const double r = std::exp(logp - batch.old_log_probs[i]);
    sig.push_back(r < 1 - clip);
    sig.push_back(r > 1 + clip);
  }
  return sig;
}

}  // namespace detail

/// Central-difference check of ppo_loss gradients on the tiny network.
inline GradCheckResult gradient_check(std::uint64_t seed, double h = 1e-4, std::size_t batch_size = 8) {
  Rng rng(seed);
  nn::ActorCritic<double> net(nn::tiny_net_config());
  net.init(rng);
  // Larger policy weights and non-zero biases so every term matters.
  for (const auto& t : net.tensors()) {
    for (std::size_t i = 0; i < t.size; ++i) {
      double& p = net.params()[t.offset + i];
      if (t.shape.size() == 1) p = 0.1 * rng.normal();
      if (t.name == "policy.weight") p = 0.5 * rng.normal();
    }
  }
  const nn::PpoLossConfig cfg;
  nn::Minibatch<double> batch;
  const auto in = static_cast<std::size_t>(net.config().input_size());
  for (std::size_t i = 0; i < batch_size; ++i) {
    for (std::size_t k = 0; k < in; ++k) batch.obs.push_back(rng.uniform());
    batch.actions.push_back(static_cast<int>(rng.below(5)));
    batch.advantages.push_back(rng.normal());
    batch.returns.push_back(rng.normal());
  }
  // Old log-probs put each ratio well inside or well outside the clip range.
  nn::Activations<double> act;
  for (std::size_t i = 0; i < batch_size; ++i) {
    net.forward(std::span<const double>(batch.obs.data() + i * in, in), act);
    const auto& z = act.out.logits;
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0;
    for (double l : z) s += std::exp(l - m);
    const double logp = z[static_cast<std::size_t>(batch.actions[i])] - m - std::log(s);
    const double band = rng.uniform();
    double ratio;
    if (band < 0.25) {
      ratio = 0.55 + 0.15 * rng.uniform();
    } else if (band < 0.75) {
      ratio = 0.9 + 0.2 * rng.uniform();
    } else {
      ratio = 1.3 + 0.2 * rng.uniform();
    }
    batch.old_log_probs.push_back(logp - std::log(ratio));
  }

  std::vector<double> grad(net.param_count());
  nn::ppo_loss(net, batch, cfg, std::span<double>(grad));
  const auto base = detail::kink_signature(net, batch, cfg.clip);

  GradCheckResult res;
  for (std::size_t i = 0; i < net.param_count(); ++i) {
    double& p = net.params()[i];
    const double saved = p;
    p = saved + h;
    const double lp = nn::ppo_loss(net, batch, cfg).total;
    const bool kink_p = detail::kink_signature(net, batch, cfg.clip) != base;
    p = saved - h;
    const double lm = nn::ppo_loss(net, batch, cfg).total;
    const bool kink_m = detail::kink_signature(net, batch, cfg.clip) != base;
    p = saved;
    if (kink_p || kink_m) {
      ++res.skipped;
      continue;
    }
    const double numeric = (lp - lm) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-7});
    res.max_rel_error = std::max(res.max_rel_error, std::abs(numeric - grad[i]) / denom);
    ++res.checked;
  }
  return res;
}

}  // namespace artn::oracle
