#include <atomic>
#include <sstream>

#include "../support/oracles.hpp"
#include "artn/error.hpp"
#include "artn/ppo.hpp"
#include "artn/tracks.hpp"
#include "doctest.h"

using namespace artn;
using namespace artn::ppo;

namespace {

nn::PolicyNet random_net(std::uint64_t seed) {
  nn::PolicyNet net;
  Rng rng(seed);
  net.init(rng);
  return net;
}

}  // namespace

TEST_CASE("gae closed forms") {
  SUBCASE("single terminal step") {
    const std::vector<double> r{1.0}, v{0.0};
    const std::vector<char> d{1};
    const auto g = compute_gae(r, v, d, 123.0, 0.99, 0.95);
    CHECK(g.advantages[0] == 1.0);
    CHECK(g.returns[0] == 1.0);
  }
  SUBCASE("gamma = lambda = 1 telescopes to suffix sums") {
    const std::vector<double> r{1, 2, 3, 4}, v(4, 0.0);
    const std::vector<char> d(4, 0);
    const auto g = compute_gae(r, v, d, 5.0, 1.0, 1.0);
    CHECK(g.advantages == std::vector<double>{15, 14, 12, 9});
  }
}

TEST_CASE("gae matches the brute-force oracle") {
  Rng rng(21);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<double> r(n), v(n);
    std::vector<char> d(n);
    std::vector<bool> db(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = rng.normal() * 10;
      v[i] = rng.normal() * 5;
      db[i] = rng.uniform() < 0.2;
      d[i] = db[i] ? 1 : 0;
    }
    const double boot = rng.normal();
    const double gamma = 0.5 + 0.5 * rng.uniform(), lambda = 0.5 + 0.5 * rng.uniform();
    const auto got = compute_gae(r, v, d, boot, gamma, lambda);
    const auto want = oracle::gae_bruteforce(r, v, db, boot, gamma, lambda);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(got.advantages[i] - want.advantages[i]) <= 1e-9);
      CHECK(std::abs(got.returns[i] - want.returns[i]) <= 1e-9);
    }
  }
}

TEST_CASE("advantage normalization") {
  Rng rng(2);
  std::vector<double> a(1024);
  for (auto& x : a) x = rng.normal() * 30 + 7;
  normalize_advantages(a);
  double mean = 0, var = 0;
  for (double x : a) mean += x / a.size();
  for (double x : a) var += (x - mean) * (x - mean) / a.size();
  CHECK(std::abs(mean) <= 1e-6);
  CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-6);
}

TEST_CASE("hyperparameter validation") {
  TrainHyper h;
  CHECK_NOTHROW(h.validate());
  h.rollout = 1000;
  CHECK_THROWS_AS(h.validate(), Error);
  h = {};
  h.gamma = 1.5;
  CHECK_THROWS_AS(h.validate(), Error);
}

TEST_CASE("rollout collection") {
  const geo::Track track = *geo::builtin_track("rapid-1");
  const nn::PolicyNet net = random_net(3);
  sim::SimParams params;
  params.max_steps = 5;

  SUBCASE("episode boundaries") {
    RolloutCollector c(track, 7, params);
    int sunk = 0;
    const auto buf = c.collect(net, 10, [&](std::int64_t, sim::Episode&&) { ++sunk; });
    int dones = 0;
    for (char d : buf.dones) dones += d;
    CHECK(dones == 2);
    CHECK(sunk == 2);
    CHECK(buf.size() == 10);
    CHECK(buf.bootstrap == 0.0);
  }
  SUBCASE("sunk episodes account for the buffer rewards") {
    RolloutCollector c(track, 9);
    std::vector<sim::Episode> eps;
    std::vector<std::int64_t> ordinals;
    const auto buf = c.collect(net, 3000, [&](std::int64_t o, sim::Episode&& e) {
      ordinals.push_back(o);
      eps.push_back(std::move(e));
    });
    REQUIRE(!eps.empty());
    std::size_t pos = 0;
    for (const auto& e : eps) {
      double sum = 0;
      for (std::size_t k = 0; k < e.steps.size(); ++k) sum += buf.rewards[pos + k];
      pos += e.steps.size();
      CHECK(buf.dones[pos - 1] == 1);
      CHECK(std::abs(sum - e.total_reward) <= 1e-6);
    }
    for (std::size_t i = 1; i < ordinals.size(); ++i) CHECK(ordinals[i] > ordinals[i - 1]);
  }
  SUBCASE("same seed, same buffer") {
    RolloutCollector a(track, 5, params), b(track, 5, params);
    const auto ba = a.collect(net, 64, {});
    const auto bb = b.collect(net, 64, {});
    CHECK(ba.obs == bb.obs);
    CHECK(ba.actions == bb.actions);
    CHECK(ba.rewards == bb.rewards);
    CHECK(ba.log_probs == bb.log_probs);
  }
}

TEST_CASE("zero advantage with a fitted value changes nothing without entropy") {
  nn::PolicyNet net = random_net(4);
  Rng rng(5);
  nn::Minibatch<float> batch;
  for (int i = 0; i < 8; ++i) {
    std::vector<float> obs(static_cast<std::size_t>(net.config().input_size()));
    for (auto& v : obs) v = rng.uniform() < 0.5 ? 1.0f : 0.0f;
    const auto out = net.forward(obs);
    batch.obs.insert(batch.obs.end(), obs.begin(), obs.end());
    batch.actions.push_back(i % 5);
    batch.old_log_probs.push_back(nn::log_prob(out.logits, i % 5));
    batch.advantages.push_back(0.0);
    batch.returns.push_back(out.value);
  }
  std::vector<float> grad(net.param_count());
  const std::vector<float> before(net.params().begin(), net.params().end());
  nn::Adam adam(net.param_count());

  nn::ppo_loss(net, batch, {0.2, 0.5, 0.0}, std::span<float>(grad));
  adam.step(net.params(), std::span<float>(grad));
  CHECK(std::equal(before.begin(), before.end(), net.params().begin()));

  nn::ppo_loss(net, batch, {0.2, 0.5, 0.01}, std::span<float>(grad));
  adam.step(net.params(), std::span<float>(grad));
  CHECK_FALSE(std::equal(before.begin(), before.end(), net.params().begin()));
}

TEST_CASE("train contract") {
  const geo::Track track = *geo::builtin_track("rapid-1");
  TrainOptions opts;
  opts.hyper.rollout = 128;
  opts.hyper.minibatch = 32;
  opts.hyper.epochs = 1;
  opts.sim.max_steps = 60;
  opts.seed = 3;

  SUBCASE("one episode") {
    Model m{{"m", "m", 5, ""}, random_net(1)};
    std::vector<std::int64_t> ord;
    const auto s = train(m, track, 1, opts, [&](std::int64_t o, sim::Episode&&) { ord.push_back(o); });
    CHECK(s.episodes.size() >= 1);
    CHECK(m.meta.trained_episodes == 5 + static_cast<std::int64_t>(s.episodes.size()));
    CHECK(ord.front() == 1);
    for (std::size_t i = 1; i < ord.size(); ++i) CHECK(ord[i] == ord[i - 1] + 1);
  }
  SUBCASE("cancel before the first rollout leaves the model untouched") {
    Model m{{"m", "m", 0, ""}, random_net(2)};
    const auto before = nn::serialize_weights(m.net);
    std::atomic<bool> cancel{true};
    opts.cancel = &cancel;
    try {
      train(m, track, 10, opts);
      FAIL("expected Cancelled");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Cancelled);
    }
    CHECK(nn::serialize_weights(m.net) == before);
    CHECK(m.meta.trained_episodes == 0);
  }
  SUBCASE("deterministic") {
    Model a{{}, random_net(3)}, b{{}, random_net(3)};
    const auto sa = train(a, track, 5, opts);
    const auto sb = train(b, track, 5, opts);
    CHECK(nn::serialize_weights(a.net) == nn::serialize_weights(b.net));
    REQUIRE(sa.episodes.size() == sb.episodes.size());
    std::ostringstream ca, cb;
    write_summary_csv(ca, sa);
    write_summary_csv(cb, sb);
    CHECK(ca.str() == cb.str());
    CHECK(ca.str().rfind("episode,total_reward,steps,outcome\n", 0) == 0);
  }
  SUBCASE("bad arguments") {
    Model m{{}, random_net(1)};
    CHECK_THROWS_AS(train(m, track, 0, opts), Error);
  }
}
