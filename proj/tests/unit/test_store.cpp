#include <filesystem>
#include <fstream>
#include <random>

#include "artn/error.hpp"
#include "artn/store.hpp"
#include "artn/tracks.hpp"
#include "doctest.h"

using namespace artn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("artn-store-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

store::Clock fixed_clock() {
  return [] { return std::string("2024-01-01T00:00:00Z"); };
}

sim::EpisodeRun drive(const std::string& track_id, std::uint64_t seed = 0) {
  const geo::Track track = *geo::builtin_track(track_id);
  sim::UniformPolicy policy;
  return sim::run_episode(policy, track, seed, sim::RunMode::Train);
}

}  // namespace

TEST_CASE("episode ids round trip") {
  const store::EpisodeRef ref{"model-3", "rapid-2", 17};
  CHECK(store::format_episode_id(ref) == "model-3:rapid-2:17");
  const auto back = store::parse_episode_id("model-3:rapid-2:17");
  CHECK(back.model_id == "model-3");
  CHECK(back.track_id == "rapid-2");
  CHECK(back.ordinal == 17);
  for (const char* bad : {"", "a:b", "a:b:c", "a:b:0", "a:b:-1", "a:b:1:2", "a b:c:1", ":b:1"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(store::parse_episode_id(bad), Error);
  }
}

TEST_CASE("fresh store has the builtin tracks and no models") {
  TempDir dir;
  store::Store s(dir.path, fixed_clock());
  CHECK(s.track_ids().size() == geo::builtin_tracks().size());
  CHECK(s.has_track("oval"));
  CHECK(s.list_models().empty());
  CHECK(s.warnings().empty());
  CHECK_THROWS_AS(s.track("nope"), Error);
}

TEST_CASE("models get sequential ids and persist") {
  TempDir dir;
  {
    store::Store s(dir.path, fixed_clock());
    CHECK(s.create_model("a", 1).model_id == "model-1");
    CHECK(s.create_model("b", 2).model_id == "model-2");
    auto m = s.load_model("model-2");
    CHECK(m.meta.name == "b");
    CHECK(m.meta.created_at == "2024-01-01T00:00:00Z");
    m.meta.trained_episodes = 12;
    m.net.params()[0] = 0.25f;
    s.save_model(m);
  }
  store::Store s(dir.path, fixed_clock());
  const auto models = s.list_models();
  REQUIRE(models.size() == 2);
  CHECK(models[0].model_id == "model-1");
  const auto m = s.load_model("model-2");
  CHECK(m.meta.trained_episodes == 12);
  CHECK(m.net.params()[0] == 0.25f);
  CHECK(s.create_model("c").model_id == "model-3");
  try {
    s.load_model("model-9");
    FAIL("expected UnknownModel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownModel);
  }
}

TEST_CASE("episodes keep insertion order and survive reopening") {
  TempDir dir;
  std::vector<sim::Episode> written;
  {
    store::Store s(dir.path, fixed_clock());
    const auto meta = s.create_model("m");
    for (std::uint64_t i = 0; i < 4; ++i) {
      auto run = drive("rapid-1", i);
      const std::string id = s.put_episode(meta.model_id, run.episode, &run.effects);
      CHECK(id == "model-1:rapid-1:" + std::to_string(i + 1));
      run.episode.id = id;
      written.push_back(run.episode);
    }
  }
  store::Store s(dir.path, fixed_clock());
  const auto list = s.list_episodes("model-1", "rapid-1");
  REQUIRE(list.size() == 4);
  for (std::size_t i = 0; i < list.size(); ++i) {
    CHECK(list[i].ordinal == static_cast<std::int64_t>(i + 1));
    const auto ep = s.get_episode(list[i].id);
    CHECK(ep.steps.size() == written[i].steps.size());
    CHECK(ep.total_reward == doctest::Approx(written[i].total_reward).epsilon(1e-12));
    CHECK(ep.outcome == written[i].outcome);
  }
  const auto curve = s.reward_curve("model-1", "rapid-1");
  REQUIRE(curve.size() == 4);
  CHECK(curve[2].first == 3);
  CHECK(curve[2].second == doctest::Approx(written[2].total_reward));
  CHECK(s.put_episode("model-1", drive("rapid-1", 9).episode) == "model-1:rapid-1:5");
  CHECK_FALSE(s.episode_summary("model-1:rapid-1:6"));
  CHECK_THROWS_AS(s.get_episode("model-1:rapid-1:6"), Error);
}

TEST_CASE("truncated episode file is reported and skipped") {
  TempDir dir;
  fs::path victim;
  {
    store::Store s(dir.path, fixed_clock());
    s.create_model("m");
    s.put_episode("model-1", drive("rapid-3", 1).episode);
    s.put_episode("model-1", drive("rapid-3", 2).episode);
    victim = dir.path / "models" / "model-1" / "episodes" / "rapid-3" / "1.jsonl";
  }
  const auto size = fs::file_size(victim);
  fs::resize_file(victim, size / 2);
  store::Store s(dir.path, fixed_clock());
  const auto warnings = s.warnings();
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].code == ErrorCode::CorruptRecord);
  CHECK(warnings[0].path.find("1.jsonl") != std::string::npos);
  const auto list = s.list_episodes("model-1", "rapid-3");
  REQUIRE(list.size() == 1);
  CHECK(list[0].ordinal == 2);
  // The corrupt ordinal is not reused.
  CHECK(s.put_episode("model-1", drive("rapid-3", 3).episode) == "model-1:rapid-3:3");
}

TEST_CASE("interrupted write leaves the previous state intact") {
  TempDir dir;
  {
    store::Store s(dir.path, fixed_clock());
    s.create_model("m");
    s.put_episode("model-1", drive("rapid-4", 1).episode);
    s.set_commit_hook([](const fs::path&, const fs::path& final_path) {
      if (final_path.extension() == ".jsonl") throw std::runtime_error("simulated crash");
    });
    CHECK_THROWS(s.put_episode("model-1", drive("rapid-4", 2).episode));
  }
  bool saw_tmp = false;
  for (const auto& e : fs::recursive_directory_iterator(dir.path)) {
    saw_tmp |= e.path().filename().string().find(".tmp") != std::string::npos;
  }
  CHECK(saw_tmp);
  store::Store s(dir.path, fixed_clock());
  CHECK(s.warnings().empty());
  CHECK(s.list_episodes("model-1", "rapid-4").size() == 1);
  for (const auto& e : fs::recursive_directory_iterator(dir.path)) {
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
  }
}

TEST_CASE("decimation bounds points and keeps both ends") {
  std::vector<geo::Vec2> pts;
  for (int i = 0; i < 1000; ++i) pts.push_back({static_cast<double>(i), 0.0});
  const auto d = store::decimate(pts);
  CHECK(d.size() <= store::kOverlayMaxPoints);
  CHECK(d.front().x == 0.0);
  CHECK(d.back().x == 999.0);
  for (std::size_t n : {0u, 1u, 2u, 499u, 500u, 501u, 998u, 1000u}) {
    std::vector<geo::Vec2> p(pts.begin(), pts.begin() + n);
    const auto r = store::decimate(p);
    CAPTURE(n);
    CHECK(r.size() <= n);
    CHECK(r.size() <= store::kOverlayMaxPoints);
    if (n > 0) {
      CHECK(r.front().x == p.front().x);
      CHECK(r.back().x == p.back().x);
    }
  }
}

TEST_CASE("overlay carries decimated paths and exact endpoints") {
  TempDir dir;
  store::Store s(dir.path, fixed_clock());
  s.create_model("m");
  const auto run = drive("oval", 5);
  const std::string id = s.put_episode("model-1", run.episode);
  s.put_episode("model-1", drive("oval", 6).episode);
  const auto all = s.overlay("model-1", "oval");
  REQUIRE(all.episodes.size() == 2);
  const auto& e = all.episodes[0];
  CHECK(e.id == id);
  CHECK(e.endpoint == run.episode.endpoint);
  CHECK(e.path.back() == run.episode.endpoint);
  CHECK(e.path.size() <= store::kOverlayMaxPoints);
  const auto one = s.overlay("model-1", "oval", id);
  CHECK(one.episodes.size() == 1);
  CHECK_THROWS_AS(s.overlay("model-1", "oval", std::string("model-1:oval:99")), Error);
  const auto j = store::to_json(all);
  CHECK(j["episodes"][0]["endpoint"][0].get<double>() == run.episode.endpoint.x);
}

TEST_CASE("job records persist") {
  TempDir dir;
  {
    store::Store s(dir.path, fixed_clock());
    s.put_job("job-1", {{"jobId", "job-1"}, {"status", "running"}});
    s.put_job("job-1", {{"jobId", "job-1"}, {"status", "done"}});
  }
  store::Store s(dir.path, fixed_clock());
  const auto jobs = s.list_jobs();
  REQUIRE(jobs.size() == 1);
  CHECK(jobs[0]["status"] == "done");
}
