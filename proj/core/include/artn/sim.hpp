#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "artn/categorical.hpp"
#include "artn/dsl/ast.hpp"
#include "artn/dsl/diagnostic.hpp"
#include "artn/dsl/interpreter.hpp"
#include "artn/geometry.hpp"

namespace artn::sim {

// Serialized as the integers 0..4 in declaration order.
enum class Action : std::uint8_t { Accelerate = 0, Brake = 1, SteerLeft = 2, SteerRight = 3, NoChange = 4 };
inline constexpr int kActionCount = 5;
static_assert(kActionCount == nn::kNumActions);

std::string_view to_string(Action a) noexcept;

struct SimParams {
  double dt = 0.1;
  double accel = 2.0;
  double brake_decel = 4.0;
  double drag = 0.2;
  double v_max = 12.0;
  double turn_rate = 1.5;
  // Steering authority ramps as min(1, speed / turn_full_speed).
  double turn_full_speed = 4.0;
  double off_track_margin = 1.0;
  int max_steps = 1000;
  double tile_reward_total = 1000.0;
  double step_penalty = 0.1;
  double off_track_penalty = 100.0;
  double completion_bonus = 100.0;
  double completion_fraction = 0.95;

  // Throws DegenerateInput when a constant is out of range.
  void validate() const;
};

struct VehicleState {
  geo::Vec2 position;
  double heading = 0.0;  // (-pi, pi]
  double speed = 0.0;
  int step = 0;          // dynamics steps applied so far; sim time = step * dt
  std::optional<double> paused_until;
};

double normalize_heading(double heading) noexcept;
bool is_paused(const VehicleState& state, const SimParams& params) noexcept;

/// One kinematic update. A paused vehicle has its action forced to Brake;
/// the pause clears once sim time reaches `paused_until`.
VehicleState step_dynamics(const VehicleState& state, Action action, const SimParams& params);

VehicleState initial_state(const geo::Track& track);

struct ObservationConfig {
  int frames = 3;
  int height = 24;
  int width = 24;
  double cell = 1.0;   // meters per cell
  int agent_row = 18;  // row 0 is farthest ahead
  int agent_col = 12;
};

struct Observation {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;  // [frame][row][col], oldest frame first

  std::span<const float> frame(int f) const {
    const auto n = static_cast<std::size_t>(height * width);
    return std::span<const float>(data).subspan(static_cast<std::size_t>(f) * n, n);
  }
  float at(int f, int r, int c) const {
    return data[static_cast<std::size_t>((f * height + r) * width + c)];
  }
};

// World position of a raster cell center for a vehicle in `state`.
geo::Vec2 cell_center(const VehicleState& state, int row, int col, const ObservationConfig& cfg);

// Egocentric binary raster: 1 where the cell center is on the track.
std::vector<float> render_frame(const geo::Track& track, const VehicleState& state,
                                const ObservationConfig& cfg);

class FrameHistory {
 public:
  explicit FrameHistory(ObservationConfig cfg = {});

  // Back to all-zero history (episode start).
  void reset();
  const ObservationConfig& config() const { return cfg_; }

 private:
  friend Observation render_observation(const geo::Track&, const VehicleState&, FrameHistory&);
  ObservationConfig cfg_;
  std::vector<std::vector<float>> frames_;  // previous frames, oldest first
};

/// Renders the current frame, stacks it after the previous frames held in
/// `history`, and pushes it into the history.
Observation render_observation(const geo::Track& track, const VehicleState& state,
                               FrameHistory& history);

class TileSet {
 public:
  explicit TileSet(int tile_count = 0) : flags_(static_cast<std::size_t>(tile_count), 0) {}
  bool contains(int tile) const { return flags_.at(static_cast<std::size_t>(tile)) != 0; }
  bool insert(int tile);
  int size() const { return count_; }
  int capacity() const { return static_cast<int>(flags_.size()); }

 private:
  std::vector<char> flags_;
  int count_ = 0;
};

enum class Outcome { Completed, OffTrack, Timeout };

std::string_view to_string(Outcome o) noexcept;
Outcome outcome_from_string(std::string_view text);

struct RewardResult {
  double reward = 0.0;
  std::vector<int> newly_visited;
};

/// Progress reward for one step: (total/K) per newly visited tile, minus the
/// step penalty, minus the off-track penalty or plus the completion bonus
/// when `done` says the episode ends that way.
RewardResult compute_reward(const geo::Track& track, const TileSet& prev_visited,
                            const geo::Projection& projection, std::optional<Outcome> done,
                            const SimParams& params);

/// Priority off_track > completed > timeout. `on_track` is the result of the
/// off-track test (|lateral| <= width/2 + off_track_margin).
std::optional<Outcome> check_termination(const TileSet& visited, bool on_track, int steps_taken,
                                         const SimParams& params);

/// Waypoints whose disk contains `position` and that have not fired yet, in
/// track declaration order.
std::vector<std::string> check_waypoints(const geo::Track& track, geo::Vec2 position,
                                         const std::set<std::string>& already_triggered);

struct StepRecord {
  int t = 0;
  VehicleState state;  // after the step
  Action action = Action::NoChange;
  double reward = 0.0;
  std::vector<int> new_tiles;
  std::vector<std::string> events;
};

struct Episode {
  std::string id;
  std::string track_id;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  double total_reward = 0.0;
  Outcome outcome = Outcome::Timeout;
  geo::Vec2 endpoint;

  int tiles_visited() const;
};

/// Step-wise environment used by both run_episode and the PPO trainer.
class Environment {
 public:
  Environment(const geo::Track& track, SimParams params = {}, ObservationConfig obs = {});

  const Observation& reset();
  const StepRecord& step(Action action);

  bool done() const { return outcome_.has_value(); }
  std::optional<Outcome> outcome() const { return outcome_; }
  const Observation& observation() const { return obs_; }
  const VehicleState& state() const { return state_; }
  const TileSet& visited() const { return visited_; }
  const std::vector<StepRecord>& steps() const { return steps_; }
  const geo::Track& track() const { return track_; }
  const SimParams& params() const { return params_; }

  // Pause for `seconds` of sim time starting with the next step.
  void request_pause(double seconds);
  void resume();

  Episode take_episode(std::string id, std::uint64_t seed);

 private:
  const geo::Track& track_;
  SimParams params_;
  FrameHistory history_;
  VehicleState state_;
  Observation obs_;
  TileSet visited_;
  std::set<std::string> triggered_;
  std::vector<StepRecord> steps_;
  double total_reward_ = 0.0;
  std::optional<Outcome> outcome_;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual nn::Logits logits(const Observation& obs, const VehicleState& state) = 0;
};

// Every action equally likely.
class UniformPolicy final : public Policy {
 public:
  nn::Logits logits(const Observation&, const VehicleState&) override { return {}; }
};

// Pure-pursuit follower of the track centerline at a fixed cruise speed.
// Scripted stand-in for a trained model in end-to-end fixtures.
class CenterlineDriver final : public Policy {
 public:
  explicit CenterlineDriver(const geo::Track& track, double cruise_speed = 3.5,
                            double lookahead = 4.0)
      : track_(track), cruise_(cruise_speed), lookahead_(lookahead) {}
  nn::Logits logits(const Observation& obs, const VehicleState& state) override;

 private:
  const geo::Track& track_;
  double cruise_;
  double lookahead_;
};

enum class RunMode { Train, Test, Programmed };

struct EpisodeRun {
  Episode episode;
  dsl::EffectLog effects;
  dsl::VehicleEffects final_effects;
  std::vector<dsl::Diagnostic> faults;
};

/// Runs one episode to termination. Train mode samples actions from the
/// policy distribution with an RNG seeded by `seed`; test and programmed
/// modes act greedily. Programmed mode dispatches onStart before step 0,
/// onStep and then waypoint handlers after each step, and onEnd after
/// termination. Throws ProgramError when the program is missing or fails
/// static checks against the track.
EpisodeRun run_episode(Policy& policy, const geo::Track& track, std::uint64_t seed, RunMode mode,
                       const dsl::Program* program = nullptr, const SimParams& params = {},
                       const ObservationConfig& obs = {});

}  // namespace artn::sim
