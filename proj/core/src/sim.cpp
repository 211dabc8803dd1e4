#include "artn/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "artn/dsl/checker.hpp"
#include "artn/error.hpp"
#include "artn/rng.hpp"

namespace artn::sim {

namespace {
constexpr double kTimeEps = 1e-9;
}

std::string_view to_string(Action a) noexcept {
  switch (a) {
    case Action::Accelerate: return "accelerate";
    case Action::Brake: return "brake";
    case Action::SteerLeft: return "left";
    case Action::SteerRight: return "right";
    case Action::NoChange: return "no_change";
  }
  return "no_change";
}

void SimParams::validate() const {
  const double positives[] = {dt,        accel,          brake_decel,      drag,
                              v_max,     turn_rate,      turn_full_speed,  off_track_margin,
                              tile_reward_total, step_penalty, off_track_penalty, completion_bonus,
                              completion_fraction};
  for (double v : positives) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::DegenerateInput, "simulation constants must be positive");
    }
  }
  if (dt > 1.0) throw Error(ErrorCode::DegenerateInput, "dt must lie in (0, 1]");
  if (max_steps <= 0) throw Error(ErrorCode::DegenerateInput, "max_steps must be positive");
  if (completion_fraction > 1.0) {
    throw Error(ErrorCode::DegenerateInput, "completion_fraction must lie in (0, 1]");
  }
}

double normalize_heading(double heading) noexcept {
  double h = std::remainder(heading, 2.0 * std::numbers::pi);
  if (h <= -std::numbers::pi) h += 2.0 * std::numbers::pi;
  return h;
}

bool is_paused(const VehicleState& state, const SimParams& params) noexcept {
  return state.paused_until && state.step * params.dt < *state.paused_until - kTimeEps;
}

VehicleState step_dynamics(const VehicleState& state, Action action, const SimParams& params) {
  VehicleState next = state;
  if (is_paused(state, params)) action = Action::Brake;
  const double steer = params.turn_rate * std::min(1.0, state.speed / params.turn_full_speed) *
                       params.dt;
  switch (action) {
    case Action::Accelerate:
      next.speed = std::min(params.v_max, next.speed + params.accel * params.dt);
      break;
    case Action::Brake:
      next.speed = std::max(0.0, next.speed - params.brake_decel * params.dt);
      break;
    case Action::SteerLeft: next.heading += steer; break;
    case Action::SteerRight: next.heading -= steer; break;
    case Action::NoChange: break;
  }
  next.speed = std::max(0.0, next.speed - params.drag * params.dt);
  next.heading = normalize_heading(next.heading);
  next.position = next.position +
                  (next.speed * params.dt) * geo::Vec2{std::cos(next.heading), std::sin(next.heading)};
  next.step = state.step + 1;
  if (next.paused_until && next.step * params.dt >= *next.paused_until - kTimeEps) {
    next.paused_until.reset();
  }
  return next;
}

VehicleState initial_state(const geo::Track& track) {
  VehicleState s;
  s.position = track.centerline().front();
  s.heading = normalize_heading(track.heading_at(0.0));
  return s;
}

geo::Vec2 cell_center(const VehicleState& state, int row, int col, const ObservationConfig& cfg) {
  const geo::Vec2 fwd{std::cos(state.heading), std::sin(state.heading)};
  const geo::Vec2 right{fwd.y, -fwd.x};
  return state.position + ((cfg.agent_row - row) * cfg.cell) * fwd +
         ((col - cfg.agent_col) * cfg.cell) * right;
}

std::vector<float> render_frame(const geo::Track& track, const VehicleState& state,
                                const ObservationConfig& cfg) {
  std::vector<float> frame(static_cast<std::size_t>(cfg.height * cfg.width), 0.0f);
  const double half = track.width() / 2.0;
  const double reach_rows = std::max(cfg.agent_row, cfg.height - 1 - cfg.agent_row);
  const double reach_cols = std::max(cfg.agent_col, cfg.width - 1 - cfg.agent_col);
  const double view = std::hypot(reach_rows, reach_cols) * cfg.cell + half + cfg.cell;

  const geo::Vec2 fwd{std::cos(state.heading), std::sin(state.heading)};
  const geo::Vec2 right{fwd.y, -fwd.x};
  const double pad = half / cfg.cell + 1.0;
  for (std::uint32_t seg : track.segments_near(state.position, view)) {
    const geo::Vec2 a = track.segment_begin(seg) - state.position;
    const geo::Vec2 b = track.segment_end(seg) - state.position;
    const double ra = cfg.agent_row - geo::dot(a, fwd) / cfg.cell;
    const double rb = cfg.agent_row - geo::dot(b, fwd) / cfg.cell;
    const double ca = cfg.agent_col + geo::dot(a, right) / cfg.cell;
    const double cb = cfg.agent_col + geo::dot(b, right) / cfg.cell;
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min(ra, rb) - pad)));
    const int r1 = std::min(cfg.height - 1, static_cast<int>(std::ceil(std::max(ra, rb) + pad)));
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min(ca, cb) - pad)));
    const int c1 = std::min(cfg.width - 1, static_cast<int>(std::ceil(std::max(ca, cb) + pad)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        float& cell = frame[static_cast<std::size_t>(r * cfg.width + c)];
        if (cell != 0.0f) continue;
        const geo::Vec2 p = cell_center(state, r, c, cfg);
        if (std::sqrt(track.segment_distance_sq(seg, p)) <= half) cell = 1.0f;
      }
    }
  }
  return frame;
}

FrameHistory::FrameHistory(ObservationConfig cfg) : cfg_(cfg) { reset(); }

void FrameHistory::reset() {
  frames_.assign(static_cast<std::size_t>(std::max(0, cfg_.frames - 1)),
                 std::vector<float>(static_cast<std::size_t>(cfg_.height * cfg_.width), 0.0f));
}

Observation render_observation(const geo::Track& track, const VehicleState& state,
                               FrameHistory& history) {
  const ObservationConfig& cfg = history.cfg_;
  std::vector<float> current = render_frame(track, state, cfg);
  Observation obs;
  obs.frames = cfg.frames;
  obs.height = cfg.height;
  obs.width = cfg.width;
  obs.data.reserve(static_cast<std::size_t>(cfg.frames * cfg.height * cfg.width));
  for (const auto& f : history.frames_) obs.data.insert(obs.data.end(), f.begin(), f.end());
  obs.data.insert(obs.data.end(), current.begin(), current.end());
  if (!history.frames_.empty()) {
    std::rotate(history.frames_.begin(), history.frames_.begin() + 1, history.frames_.end());
    history.frames_.back() = std::move(current);
  }
  return obs;
}

bool TileSet::insert(int tile) {
  char& f = flags_.at(static_cast<std::size_t>(tile));
  if (f) return false;
  f = 1;
  ++count_;
  return true;
}

std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::Completed: return "completed";
    case Outcome::OffTrack: return "off_track";
    case Outcome::Timeout: return "timeout";
  }
  return "timeout";
}

Outcome outcome_from_string(std::string_view text) {
  if (text == "completed") return Outcome::Completed;
  if (text == "off_track") return Outcome::OffTrack;
  if (text == "timeout") return Outcome::Timeout;
  throw Error(ErrorCode::CorruptRecord, "unknown outcome '" + std::string(text) + "'");
}

RewardResult compute_reward(const geo::Track& track, const TileSet& prev_visited,
                            const geo::Projection& projection, std::optional<Outcome> done,
                            const SimParams& params) {
  RewardResult r;
  if (!prev_visited.contains(projection.tile_index)) {
    r.newly_visited.push_back(projection.tile_index);
    r.reward += params.tile_reward_total / track.tile_count();
  }
  r.reward -= params.step_penalty;
  if (done == Outcome::OffTrack) r.reward -= params.off_track_penalty;
  if (done == Outcome::Completed) r.reward += params.completion_bonus;
  return r;
}

std::optional<Outcome> check_termination(const TileSet& visited, bool on_track, int steps_taken,
                                         const SimParams& params) {
  if (!on_track) return Outcome::OffTrack;
  if (visited.size() >= params.completion_fraction * visited.capacity() - 1e-9) {
    return Outcome::Completed;
  }
  if (steps_taken >= params.max_steps) return Outcome::Timeout;
  return std::nullopt;
}

std::vector<std::string> check_waypoints(const geo::Track& track, geo::Vec2 position,
                                         const std::set<std::string>& already_triggered) {
  std::vector<std::string> out;
  for (const geo::Waypoint& wp : track.waypoints()) {
    if (already_triggered.count(wp.name)) continue;
    if (geo::distance(position, wp.position) <= wp.radius) out.push_back(wp.name);
  }
  return out;
}

int Episode::tiles_visited() const {
  std::set<int> tiles;
  for (const auto& s : steps) tiles.insert(s.new_tiles.begin(), s.new_tiles.end());
  return static_cast<int>(tiles.size());
}

Environment::Environment(const geo::Track& track, SimParams params, ObservationConfig obs)
    : track_(track), params_(params), history_(obs), visited_(track.tile_count()) {
  params_.validate();
}

const Observation& Environment::reset() {
  state_ = initial_state(track_);
  history_.reset();
  visited_ = TileSet(track_.tile_count());
  // The start tile counts as visited; standing still earns nothing.
  visited_.insert(track_.project(state_.position).tile_index);
  triggered_.clear();
  steps_.clear();
  total_reward_ = 0.0;
  outcome_.reset();
  obs_ = render_observation(track_, state_, history_);
  return obs_;
}

const StepRecord& Environment::step(Action action) {
  if (outcome_) throw std::logic_error("step() on a finished episode");
  const bool paused = is_paused(state_, params_);
  const Action applied = paused ? Action::Brake : action;
  state_ = step_dynamics(state_, applied, params_);

  const geo::Projection proj = track_.project(state_.position);
  const bool on_track = std::abs(proj.lateral) <= track_.width() / 2.0 + params_.off_track_margin;
  TileSet next = visited_;
  next.insert(proj.tile_index);
  const std::optional<Outcome> done = check_termination(next, on_track, state_.step, params_);
  RewardResult rr = compute_reward(track_, visited_, proj, done, params_);
  visited_ = std::move(next);

  StepRecord rec;
  rec.t = state_.step - 1;
  rec.state = state_;
  rec.action = applied;
  rec.reward = paused ? 0.0 : rr.reward;
  rec.new_tiles = std::move(rr.newly_visited);
  rec.events = check_waypoints(track_, state_.position, triggered_);
  triggered_.insert(rec.events.begin(), rec.events.end());

  total_reward_ += rec.reward;
  outcome_ = done;
  steps_.push_back(std::move(rec));
  if (!outcome_) obs_ = render_observation(track_, state_, history_);
  return steps_.back();
}

void Environment::request_pause(double seconds) {
  if (seconds > 0.0) {
    state_.paused_until = state_.step * params_.dt + seconds;
  } else {
    state_.paused_until.reset();
  }
}

void Environment::resume() { state_.paused_until.reset(); }

Episode Environment::take_episode(std::string id, std::uint64_t seed) {
  Episode ep;
  ep.id = std::move(id);
  ep.track_id = track_.id();
  ep.seed = seed;
  ep.endpoint = steps_.empty() ? state_.position : steps_.back().state.position;
  ep.steps = std::move(steps_);
  steps_.clear();
  ep.total_reward = total_reward_;
  ep.outcome = outcome_.value_or(Outcome::Timeout);
  return ep;
}

nn::Logits CenterlineDriver::logits(const Observation&, const VehicleState& state) {
  const geo::Projection proj = track_.project(state.position);
  const geo::Vec2 target = track_.point_at(proj.s + lookahead_);
  const geo::Vec2 to = target - state.position;
  const double err = normalize_heading(std::atan2(to.y, to.x) - state.heading);
  Action a = Action::NoChange;
  if (std::abs(err) > 0.06 && state.speed > 0.3) {
    a = err > 0.0 ? Action::SteerLeft : Action::SteerRight;
  } else if (state.speed < cruise_ - 0.15) {
    a = Action::Accelerate;
  } else if (state.speed > cruise_ + 0.6) {
    a = Action::Brake;
  }
  nn::Logits out{};
  out[static_cast<std::size_t>(a)] = 10.0f;
  return out;
}

EpisodeRun run_episode(Policy& policy, const geo::Track& track, std::uint64_t seed, RunMode mode,
                       const dsl::Program* program, const SimParams& params,
                       const ObservationConfig& obs) {
  const bool scripted = mode == RunMode::Programmed;
  if (scripted) {
    if (!program) throw Error(ErrorCode::ProgramError, "programmed mode needs a program");
    const auto diags = dsl::check(*program, track);
    if (dsl::has_errors(diags)) throw Error(ErrorCode::ProgramError, dsl::format(diags));
  }

  EpisodeRun run;
  Environment env(track, params, obs);
  env.reset();
  Rng rng(seed);

  auto dispatch = [&](const dsl::EventRef& event, int t) {
    dsl::DispatchResult r = dsl::dispatch_event(*program, event, t, run.final_effects, run.effects);
    run.faults.insert(run.faults.end(), r.faults.begin(), r.faults.end());
    if (r.pause) {
      if (r.pause->kind == dsl::PauseRequest::Kind::Pause) {
        env.request_pause(r.pause->seconds);
      } else {
        env.resume();
      }
    }
  };

  if (scripted) dispatch(dsl::EventRef::start(), 0);
  int last_t = 0;
  while (!env.done()) {
    const nn::Logits logits = policy.logits(env.observation(), env.state());
    for (float l : logits) {
      if (!std::isfinite(l)) throw Error(ErrorCode::NonFiniteLoss, "policy produced non-finite logits");
    }
    const int action =
        mode == RunMode::Train ? nn::sample_action(logits, rng).action : nn::greedy_action(logits);
    const StepRecord& rec = env.step(static_cast<Action>(action));
    last_t = rec.t;
    if (scripted) {
      const std::vector<std::string> events = rec.events;
      dispatch(dsl::EventRef::step(), last_t);
      for (const auto& name : events) dispatch(dsl::EventRef::at(name), last_t);
    }
  }
  if (scripted) dispatch(dsl::EventRef::end(), last_t);
  run.episode = env.take_episode("", seed);
  return run;
}

}  // namespace artn::sim
