#include <cmath>
#include <numbers>
#include <sstream>

#include "artn/dsl/parser.hpp"
#include "artn/episode_io.hpp"
#include "artn/error.hpp"
#include "artn/sim.hpp"
#include "artn/tracks.hpp"
#include "doctest.h"

using namespace artn;
using namespace artn::sim;
using geo::Vec2;

namespace {

geo::Track straight(double length = 100, double width = 5, int tiles = 20) {
  geo::TrackSpec spec;
  spec.id = "straight";
  spec.centerline = {{0, 0}, {length, 0}};
  spec.width = width;
  spec.tile_count = tiles;
  return geo::build_track(spec);
}

class FixedPolicy final : public Policy {
 public:
  explicit FixedPolicy(Action a) : a_(a) {}
  nn::Logits logits(const Observation&, const VehicleState&) override {
    nn::Logits l{};
    l[static_cast<std::size_t>(a_)] = 1.0f;
    return l;
  }

 private:
  Action a_;
};

}  // namespace

TEST_CASE("action encoding") {
  CHECK(static_cast<int>(Action::Accelerate) == 0);
  CHECK(static_cast<int>(Action::Brake) == 1);
  CHECK(static_cast<int>(Action::SteerLeft) == 2);
  CHECK(static_cast<int>(Action::SteerRight) == 3);
  CHECK(static_cast<int>(Action::NoChange) == 4);
  CHECK(kActionCount == 5);
}

TEST_CASE("step_dynamics update rule") {
  const SimParams p;
  VehicleState s;
  SUBCASE("rest is a fixed point") {
    const auto n = step_dynamics(s, Action::NoChange, p);
    CHECK(n.speed == 0.0);
    CHECK(n.position == s.position);
    CHECK(n.step == 1);
  }
  SUBCASE("accelerate from rest") {
    const auto n = step_dynamics(s, Action::Accelerate, p);
    CHECK(n.speed == doctest::Approx(0.18).epsilon(1e-12));
    CHECK(n.position.x == doctest::Approx(0.018).epsilon(1e-12));
  }
  SUBCASE("brake floors at zero") {
    s.speed = 0.3;
    CHECK(step_dynamics(s, Action::Brake, p).speed == 0.0);
  }
  SUBCASE("speed capped at v_max before drag") {
    s.speed = 12.0;
    CHECK(step_dynamics(s, Action::Accelerate, p).speed == doctest::Approx(11.98));
  }
  SUBCASE("steering wraps heading") {
    s.heading = std::numbers::pi;
    s.speed = 5.0;
    const auto n = step_dynamics(s, Action::SteerLeft, p);
    CHECK(n.heading > -std::numbers::pi);
    CHECK(n.heading <= std::numbers::pi);
    CHECK(n.heading == doctest::Approx(-std::numbers::pi + 0.15));
  }
  SUBCASE("steering authority scales with speed") {
    s.speed = 2.0;
    CHECK(step_dynamics(s, Action::SteerRight, p).heading == doctest::Approx(-0.075));
    s.speed = 0.0;
    CHECK(step_dynamics(s, Action::SteerRight, p).heading == 0.0);
  }
  SUBCASE("pause forces brake and expires") {
    s.speed = 5.0;
    s.paused_until = 0.2;
    auto n = step_dynamics(s, Action::Accelerate, p);
    CHECK(n.speed == doctest::Approx(5.0 - 0.4 - 0.02));
    CHECK(n.paused_until.has_value());
    n = step_dynamics(n, Action::Accelerate, p);
    CHECK_FALSE(n.paused_until.has_value());
    const double v = n.speed;
    n = step_dynamics(n, Action::Accelerate, p);
    CHECK(n.speed > v);
  }
}

TEST_CASE("dynamics invariants under random actions") {
  const SimParams p;
  Rng rng(5);
  VehicleState s;
  for (int i = 0; i < 5000; ++i) {
    const auto n = step_dynamics(s, static_cast<Action>(rng.below(5)), p);
    CHECK(n.speed >= 0.0);
    CHECK(n.speed <= p.v_max);
    CHECK(geo::distance(n.position, s.position) <= p.v_max * p.dt + 1e-12);
    CHECK(n.heading > -std::numbers::pi);
    CHECK(n.heading <= std::numbers::pi);
    s = n;
  }
}

TEST_CASE("SimParams validation") {
  SimParams p;
  CHECK_NOTHROW(p.validate());
  p.dt = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.dt = 1.5;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.max_steps = 0;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("render_observation") {
  const geo::Track t = straight(200, 8, 40);
  VehicleState s;
  s.position = {50, 0};
  FrameHistory history;
  const Observation obs = render_observation(t, s, history);
  REQUIRE(obs.frames == 3);
  REQUIRE(obs.height == 24);
  REQUIRE(obs.width == 24);
  REQUIRE(obs.data.size() == 3u * 24 * 24);

  SUBCASE("first frame pads history with zeros") {
    for (int f = 0; f < 2; ++f) {
      for (float v : obs.frame(f)) CHECK(v == 0.0f);
    }
  }
  SUBCASE("binary values and symmetry about the heading axis") {
    int on = 0;
    for (int r = 0; r < 24; ++r) {
      for (int c = 0; c < 24; ++c) {
        const float v = obs.at(2, r, c);
        CHECK((v == 0.0f || v == 1.0f));
        on += v == 1.0f;
        // Column c sits (c-12) m right of the vehicle; 24-c mirrors it.
        if (c >= 1) CHECK(v == obs.at(2, r, 24 - c));
      }
    }
    // Cells within 4 m laterally: columns 8..16 in every row.
    CHECK(on == 24 * 9);
    CHECK(obs.at(2, 18, 12) == 1.0f);
  }
  SUBCASE("matches is_on_track cell by cell") {
    s.heading = 0.7;
    s.position = {20, 1.5};
    FrameHistory h2;
    const auto o2 = render_observation(t, s, h2);
    for (int r = 0; r < 24; ++r) {
      for (int c = 0; c < 24; ++c) {
        const bool expect = t.is_on_track(cell_center(s, r, c, {}), 0.0);
        CHECK((o2.at(2, r, c) == 1.0f) == expect);
      }
    }
  }
  SUBCASE("frames shift through the history") {
    VehicleState s2 = s;
    s2.position = {52, 0};
    const auto o2 = render_observation(t, s2, history);
    for (int i = 0; i < 24 * 24; ++i) {
      CHECK(o2.frame(1)[i] == obs.frame(2)[i]);
      CHECK(o2.frame(0)[i] == 0.0f);
    }
  }
  SUBCASE("far off track renders nothing") {
    VehicleState far;
    far.position = {50, 500};
    FrameHistory h;
    for (float v : render_observation(t, far, h).frame(2)) CHECK(v == 0.0f);
  }
}

TEST_CASE("render matches on a curved track") {
  const geo::Track t = *geo::builtin_track("rapid-7");
  for (int i = 0; i < 20; ++i) {
    VehicleState s;
    const double sa = t.length() * i / 20.0;
    s.position = t.point_at(sa) + Vec2{0.3 * i - 3, 0.1 * i};
    s.heading = normalize_heading(t.heading_at(sa) + 0.05 * i);
    const auto frame = render_frame(t, s, {});
    for (int r = 0; r < 24; ++r) {
      for (int c = 0; c < 24; ++c) {
        CHECK((frame[r * 24 + c] == 1.0f) == t.is_on_track(cell_center(s, r, c, {}), 0.0));
      }
    }
  }
}

TEST_CASE("compute_reward arithmetic") {
  const geo::Track t = straight(100, 5, 20);
  const SimParams p;
  TileSet visited(20);
  visited.insert(0);
  geo::Projection proj = t.project({2, 0});
  CHECK(compute_reward(t, visited, proj, std::nullopt, p).reward == -0.1);

  proj = t.project({7, 0});
  const auto r = compute_reward(t, visited, proj, std::nullopt, p);
  CHECK(r.reward == 49.9);
  CHECK(r.newly_visited == std::vector<int>{1});

  proj = t.project({2, 5});
  CHECK(compute_reward(t, visited, proj, Outcome::OffTrack, p).reward == -100.1);
  CHECK(compute_reward(t, visited, t.project({2, 0}), Outcome::Completed, p).reward ==
        doctest::Approx(99.9));
}

TEST_CASE("check_termination boundaries") {
  const SimParams p;
  TileSet v(20);
  for (int i = 0; i < 10; ++i) v.insert(i);
  CHECK(check_termination(v, true, 1000, p) == Outcome::Timeout);
  CHECK(check_termination(v, true, 999, p) == std::nullopt);
  for (int i = 10; i < 19; ++i) v.insert(i);
  CHECK(v.size() == 19);
  CHECK(check_termination(v, true, 5, p) == Outcome::Completed);
  CHECK(check_termination(v, false, 1000, p) == Outcome::OffTrack);
  CHECK(check_termination(v, true, 1000, p) == Outcome::Completed);

  // lateral exactly width/2 + margin keeps the car on track.
  const geo::Track t = straight(100, 5, 20);
  Environment env(t);
  env.reset();
  const auto proj = t.project({50, 3.5});
  CHECK(std::abs(proj.lateral) <= t.width() / 2 + p.off_track_margin);
}

TEST_CASE("check_waypoints") {
  geo::TrackSpec spec;
  spec.id = "w";
  spec.centerline = {{0, 0}, {100, 0}};
  spec.width = 5.0;
  spec.tile_count = 20;
  spec.waypoints = {{"b", geo::WaypointKind::Pickup, {50, 0}, 3.0},
                    {"a", geo::WaypointKind::Pickup, {52, 0}, 3.0}};
  const geo::Track t = geo::build_track(spec);
  CHECK(check_waypoints(t, {50, 0}, {}) == std::vector<std::string>{"b", "a"});
  CHECK(check_waypoints(t, {50, 0}, {"b"}) == std::vector<std::string>{"a"});
  CHECK(check_waypoints(t, {54.5, 0}, {}) == std::vector<std::string>{"a"});
  CHECK(check_waypoints(t, {20, 0}, {}).empty());
}

TEST_CASE("standing still times out with the closed-form reward") {
  const geo::Track t = *geo::builtin_track("oval");
  FixedPolicy still(Action::NoChange);
  const auto run = run_episode(still, t, 1, RunMode::Test);
  CHECK(run.episode.outcome == Outcome::Timeout);
  CHECK(run.episode.steps.size() == 1000);
  CHECK(run.episode.total_reward == doctest::Approx(-0.1 * 1000).epsilon(1e-9));
}

TEST_CASE("episodes are deterministic and self-consistent") {
  const geo::Track t = *geo::builtin_track("rapid-1");
  UniformPolicy uniform;
  const auto a = run_episode(uniform, t, 42, RunMode::Train);
  const auto b = run_episode(uniform, t, 42, RunMode::Train);
  CHECK(episode_to_jsonl(a.episode) == episode_to_jsonl(b.episode));
  const auto c = run_episode(uniform, t, 43, RunMode::Train);
  CHECK(episode_to_jsonl(a.episode) != episode_to_jsonl(c.episode));

  for (const auto& run : {a, c}) {
    const Episode& ep = run.episode;
    double sum = 0.0, tile_sum = 0.0;
    int prev_t = -1;
    for (const auto& s : ep.steps) {
      sum += s.reward;
      tile_sum += s.new_tiles.size() * (1000.0 / t.tile_count());
      CHECK(s.t > prev_t);
      prev_t = s.t;
      CHECK(s.state.speed >= 0.0);
    }
    CHECK(std::abs(sum - ep.total_reward) <= 1e-6);
    CHECK(tile_sum <= 1000.0 + 100.0);
    CHECK(ep.endpoint == ep.steps.back().state.position);
  }
}

TEST_CASE("centerline driver completes every builtin track") {
  for (const geo::Track& t : geo::builtin_tracks()) {
    CAPTURE(t.id());
    // 1000 steps at 0.1 s: long tracks need more than the default cruise.
    CenterlineDriver driver(t, t.length() > 300 ? 7.0 : 3.5);
    const auto run = run_episode(driver, t, 0, RunMode::Test);
    CHECK(run.episode.outcome == Outcome::Completed);
  }
}

TEST_CASE("programmed pause forces at least 20 brake steps") {
  const geo::Track t = geo::bus_route_track();
  const auto parsed = dsl::parse("at \"stop1\" { pauseDriving(2.0); }");
  REQUIRE(parsed.ok());
  CenterlineDriver driver(t);
  const auto run = run_episode(driver, t, 0, RunMode::Programmed, &parsed.program);
  const auto& steps = run.episode.steps;
  std::size_t trigger = steps.size();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (const auto& e : steps[i].events) {
      if (e == "stop1") trigger = i;
    }
  }
  REQUIRE(trigger < steps.size());
  int brakes = 0;
  for (std::size_t i = trigger + 1; i < steps.size() && steps[i].action == Action::Brake; ++i) {
    CHECK(steps[i].reward == 0.0);
    ++brakes;
  }
  CHECK(brakes >= 20);
}

TEST_CASE("programmed mode rejects programs that fail checks") {
  const geo::Track t = geo::bus_route_track();
  const auto parsed = dsl::parse("at \"nowhere\" { beepHorn(); }");
  REQUIRE(parsed.ok());
  UniformPolicy uniform;
  try {
    run_episode(uniform, t, 0, RunMode::Programmed, &parsed.program);
    FAIL("expected ProgramError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProgramError);
  }
  CHECK_THROWS_AS(run_episode(uniform, t, 0, RunMode::Programmed, nullptr), Error);
}

TEST_CASE("episode jsonl round trip") {
  const geo::Track t = *geo::builtin_track("rapid-3");
  UniformPolicy uniform;
  auto run = run_episode(uniform, t, 9, RunMode::Train);
  run.episode.id = "m:rapid-3:1";
  const std::string text = episode_to_jsonl(run.episode);
  const Episode back = episode_from_jsonl(text);
  CHECK(episode_to_jsonl(back) == text);
  const auto header = nlohmann::json::parse(text.substr(0, text.find('\n')));
  for (const char* key : {"id", "trackId", "seed", "outcome", "totalReward", "endpoint"}) {
    CHECK(header.contains(key));
  }
  CHECK_THROWS_AS(episode_from_jsonl("{not json"), Error);
  CHECK_THROWS_AS(episode_from_jsonl(""), Error);
}
