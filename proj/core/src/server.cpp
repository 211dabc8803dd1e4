#include "artn/server.hpp"

#include <algorithm>

#include "artn/dsl/checker.hpp"
#include "artn/dsl/parser.hpp"
#include "artn/episode_io.hpp"
#include "artn/objective.hpp"
#include "artn/tracks.hpp"

namespace artn::server {

using nlohmann::json;

namespace {

// A rejected request. Diagnostics are embedded for ValidationFailed.
struct ApiError {
  ErrorCode code;
  std::string message;
  json diagnostics = nullptr;
};

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownId:
    case ErrorCode::UnknownModel:
    case ErrorCode::UnknownTrack: return 404;
    case ErrorCode::ModelBusy: return 409;
    case ErrorCode::ValidationFailed: return 422;
    case ErrorCode::BadRequest:
    case ErrorCode::VersionMismatch: return 400;
    default: return 500;
  }
}

json error_body(const ApiError& e) {
  json err = {{"code", std::string(to_string(e.code))}, {"message", e.message}};
  if (!e.diagnostics.is_null()) err["diagnostics"] = e.diagnostics;
  return {{"v", kProtocolVersion}, {"error", std::move(err)}};
}

json ok(json body) {
  body["v"] = kProtocolVersion;
  return body;
}

const json& field(const json& req, const char* name) {
  const auto it = req.find(name);
  if (it == req.end()) throw ApiError{ErrorCode::BadRequest, std::string("missing field '") + name + "'"};
  return *it;
}

std::string string_field(const json& req, const char* name) {
  const json& v = field(req, name);
  if (!v.is_string()) throw ApiError{ErrorCode::BadRequest, std::string("field '") + name + "' must be a string"};
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const json& req, const char* name) {
  if (!req.contains(name) || req[name].is_null()) return std::nullopt;
  return string_field(req, name);
}

std::int64_t int_field(const json& req, const char* name, std::optional<std::int64_t> fallback = std::nullopt) {
  if (!req.contains(name) || req[name].is_null()) {
    if (fallback) return *fallback;
    throw ApiError{ErrorCode::BadRequest, std::string("missing field '") + name + "'"};
  }
  const json& v = req[name];
  if (!v.is_number_integer()) throw ApiError{ErrorCode::BadRequest, std::string("field '") + name + "' must be an integer"};
  return v.get<std::int64_t>();
}

json diagnostic_for(const Error& e) {
  return json::array({{{"code", std::string(to_string(e.code()))}, {"message", e.detail()}}});
}

json track_summary(const geo::Track& t) {
  return {{"id", t.id()},
          {"name", t.name()},
          {"closed", t.closed()},
          {"width", t.width()},
          {"length", t.length()},
          {"tileCount", t.tile_count()},
          {"waypoints", t.waypoints().size()}};
}

json episode_event(const std::string& job_id, std::int64_t index, const store::EpisodeSummary& s) {
  return {{"v", kProtocolVersion},
          {"event", "episode_completed"},
          {"jobId", job_id},
          {"index", index},
          {"episodeId", s.id},
          {"totalReward", s.total_reward},
          {"outcome", std::string(sim::to_string(s.outcome))},
          {"steps", s.steps}};
}

}  // namespace

std::string_view to_string(JobState s) noexcept {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Cancelled: return "cancelled";
    case JobState::Failed: return "failed";
  }
  return "failed";
}

JobState job_state_from_string(std::string_view text) {
  for (JobState s : {JobState::Queued, JobState::Running, JobState::Done, JobState::Cancelled, JobState::Failed}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::CorruptRecord, "unknown job state '" + std::string(text) + "'");
}

bool is_terminal(JobState s) noexcept { return s == JobState::Done || s == JobState::Cancelled || s == JobState::Failed; }

const std::vector<std::string>& TrainingService::endpoints() {
  static const std::vector<std::string> names = {
      "create_model", "list_models",      "get_model",        "create_track",    "list_tracks",
      "get_track",    "start_training",   "cancel_training",  "run_test",        "get_overlay",
      "get_reward_curve", "get_episode",  "subscribe_events"};
  return names;
}

TrainingService::TrainingService(store::Store& store, ServiceConfig cfg) : store_(store), cfg_(std::move(cfg)) {
  load_jobs();
}

TrainingService::~TrainingService() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    for (auto& [id, job] : jobs_) {
      job->cancel = true;
      if (job->worker.joinable()) threads.push_back(std::move(job->worker));
    }
  }
  for (auto& t : threads) t.join();
}

void TrainingService::load_jobs() {
  for (const json& rec : store_.list_jobs()) {
    try {
      auto job = std::make_unique<Job>();
      job->id = rec.at("jobId").get<std::string>();
      job->model_id = rec.at("modelId").get<std::string>();
      job->track_id = rec.at("trackId").get<std::string>();
      job->episodes = rec.at("episodes").get<int>();
      job->seed = rec.at("seed").get<std::uint64_t>();
      job->state = job_state_from_string(rec.at("state").get<std::string>());
      job->completed = rec.value("completed", 0);
      job->first_ordinal = rec.value("firstOrdinal", std::int64_t{0});
      job->created_at = rec.value("createdAt", std::string());
      job->error = rec.value("error", json(nullptr));
      if (job->id.rfind("job-", 0) == 0) {
        try {
          next_job_ = std::max<std::int64_t>(next_job_, std::stoll(job->id.substr(4)) + 1);
        } catch (const std::exception&) {
        }
      }

      // Rebuild the event log from the stored episodes.
      std::vector<store::EpisodeSummary> mine;
      if (job->first_ordinal > 0 && store_.has_model(job->model_id) && store_.has_track(job->track_id)) {
        for (const auto& s : store_.list_episodes(job->model_id, job->track_id)) {
          if (s.ordinal >= job->first_ordinal && static_cast<int>(mine.size()) < job->episodes) mine.push_back(s);
        }
      }
      if (!is_terminal(job->state)) {
        job->completed = static_cast<int>(mine.size());
        job->state = JobState::Failed;
        job->error = {{"code", "Io"}, {"message", "server stopped while the job was in flight"}};
        persist(*job);
      }
      mine.resize(std::min<std::size_t>(mine.size(), static_cast<std::size_t>(job->completed)));
      job->events.push_back({{"v", kProtocolVersion},
                             {"event", "job_started"},
                             {"jobId", job->id},
                             {"modelId", job->model_id},
                             {"trackId", job->track_id},
                             {"episodes", job->episodes}});
      for (std::size_t i = 0; i < mine.size(); ++i) job->events.push_back(episode_event(job->id, i + 1, mine[i]));
      json end = {{"v", kProtocolVersion}, {"jobId", job->id}, {"completed", job->completed}};
      end["event"] = job->state == JobState::Done        ? "job_done"
                     : job->state == JobState::Cancelled ? "job_cancelled"
                                                         : "job_failed";
      if (job->state == JobState::Failed) end["error"] = job->error;
      job->events.push_back(std::move(end));
      jobs_[job->id] = std::move(job);
    } catch (const std::exception&) {
      // A job record we cannot read has nothing to replay.
    }
  }
}

json TrainingService::job_json(const Job& job) const {
  return {{"jobId", job.id},
          {"modelId", job.model_id},
          {"trackId", job.track_id},
          {"episodes", job.episodes},
          {"seed", job.seed},
          {"state", std::string(to_string(job.state))},
          {"completed", job.completed},
          {"firstOrdinal", job.first_ordinal},
          {"createdAt", job.created_at},
          {"error", job.error}};
}

void TrainingService::persist(const Job& job) { store_.put_job(job.id, job_json(job)); }

void TrainingService::publish(Job& job, json event) {
  std::lock_guard lock(mu_);
  job.events.push_back(std::move(event));
  changed_.notify_all();
}

void TrainingService::finish(Job& job, JobState state, json error) {
  json end = {{"v", kProtocolVersion}, {"jobId", job.id}};
  {
    std::lock_guard lock(mu_);
    job.state = state;
    job.error = std::move(error);
    end["completed"] = job.completed;
  }
  end["event"] = state == JobState::Done ? "job_done" : state == JobState::Cancelled ? "job_cancelled" : "job_failed";
  if (state == JobState::Failed) end["error"] = job.error;
  try {
    persist(job);
  } catch (const std::exception&) {
    // The in-memory table stays authoritative for this process.
  }
  publish(job, std::move(end));
}

void TrainingService::run_job(Job& job) {
  {
    std::lock_guard lock(mu_);
    job.state = JobState::Running;
  }
  try {
    persist(job);
    publish(job, {{"v", kProtocolVersion},
                  {"event", "job_started"},
                  {"jobId", job.id},
                  {"modelId", job.model_id},
                  {"trackId", job.track_id},
                  {"episodes", job.episodes}});
    ppo::Model model = store_.load_model(job.model_id);
    const auto track = store_.track(job.track_id);
    ppo::TrainOptions opts = cfg_.train;
    opts.seed = job.seed;
    opts.cancel = &job.cancel;
    bool cancelled = false;
    try {
      ppo::train(model, *track, job.episodes, opts, [&](std::int64_t index, sim::Episode&& ep) {
        const std::string id = store_.put_episode(job.model_id, std::move(ep));
        const auto summary = store_.episode_summary(id);
        {
          std::lock_guard lock(mu_);
          if (job.first_ordinal == 0) job.first_ordinal = summary->ordinal;
          job.completed = static_cast<int>(index);
        }
        if (index == 1) persist(job);
        publish(job, episode_event(job.id, index, *summary));
        if (cfg_.after_episode) cfg_.after_episode(job.id, index);
      });
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Cancelled) throw;
      cancelled = true;
    }
    store_.save_model(model);
    bool stopping = false;
    {
      std::lock_guard lock(mu_);
      stopping = stopping_;
    }
    if (!cancelled) {
      finish(job, JobState::Done, nullptr);
    } else if (stopping) {
      finish(job, JobState::Failed, {{"code", "Cancelled"}, {"message", "server stopped"}});
    } else {
      finish(job, JobState::Cancelled, nullptr);
    }
  } catch (const Error& e) {
    finish(job, JobState::Failed, {{"code", std::string(to_string(e.code()))}, {"message", e.detail()}});
  } catch (const std::exception& e) {
    finish(job, JobState::Failed, {{"code", "Io"}, {"message", e.what()}});
  }
}

TrainingService::Job& TrainingService::require_job(const std::string& id) {
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw ApiError{ErrorCode::UnknownId, "no job '" + id + "'"};
  return *it->second;
}

EventBatch TrainingService::wait_events(const std::string& job_id, std::size_t from,
                                        std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(ErrorCode::UnknownId, "no job '" + job_id + "'");
  Job& job = *it->second;
  const auto terminal_seen = [&] {
    return !job.events.empty() && job.events.back()["event"] != "job_started" &&
           job.events.back()["event"] != "episode_completed";
  };
  changed_.wait_for(lock, timeout, [&] { return job.events.size() > from || terminal_seen(); });
  EventBatch batch;
  for (std::size_t i = from; i < job.events.size(); ++i) batch.events.push_back(job.events[i]);
  batch.closed = terminal_seen();
  return batch;
}

void TrainingService::wait_idle() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, job] : jobs_) {
      if (job->worker.joinable()) threads.push_back(std::move(job->worker));
    }
  }
  for (auto& t : threads) t.join();
}

Response TrainingService::handle(std::string_view endpoint, const json& request) {
  try {
    if (!request.is_object()) throw ApiError{ErrorCode::BadRequest, "request must be a JSON object"};
    const auto v = request.find("v");
    if (v == request.end() || !v->is_number_integer() || v->get<int>() != kProtocolVersion) {
      throw ApiError{ErrorCode::VersionMismatch, "request must carry \"v\":1"};
    }
    json body;
    if (endpoint == "create_model") body = create_model(request);
    else if (endpoint == "list_models") body = list_models(request);
    else if (endpoint == "get_model") body = get_model(request);
    else if (endpoint == "create_track") body = create_track(request);
    else if (endpoint == "list_tracks") body = list_tracks(request);
    else if (endpoint == "get_track") body = get_track(request);
    else if (endpoint == "start_training") body = start_training(request);
    else if (endpoint == "cancel_training") body = cancel_training(request);
    else if (endpoint == "run_test") body = run_test(request);
    else if (endpoint == "get_overlay") body = get_overlay(request);
    else if (endpoint == "get_reward_curve") body = get_reward_curve(request);
    else if (endpoint == "get_episode") body = get_episode(request);
    else if (endpoint == "subscribe_events") body = subscribe_events(request);
    else throw ApiError{ErrorCode::UnknownId, "no endpoint '" + std::string(endpoint) + "'"};
    return {200, ok(std::move(body))};
  } catch (const ApiError& e) {
    return {status_for(e.code), error_body(e)};
  } catch (const Error& e) {
    return {status_for(e.code()), error_body({e.code(), e.detail()})};
  } catch (const std::exception& e) {
    return {500, error_body({ErrorCode::Io, e.what()})};
  }
}

json TrainingService::create_model(const json& req) {
  const std::string name = string_field(req, "name");
  if (name.empty()) throw ApiError{ErrorCode::ValidationFailed, "model name must not be empty", json::array()};
  const auto seed = int_field(req, "seed", 0);
  return {{"model", nn::to_json(store_.create_model(name, static_cast<std::uint64_t>(seed)))}};
}

json TrainingService::list_models(const json&) {
  json models = json::array();
  for (const auto& m : store_.list_models()) models.push_back(nn::to_json(m));
  return {{"models", std::move(models)}};
}

json TrainingService::get_model(const json& req) {
  const std::string id = string_field(req, "modelId");
  if (!store_.has_model(id)) throw ApiError{ErrorCode::UnknownId, "no model '" + id + "'"};
  json model = nn::to_json(store_.model_meta(id));
  json active = nullptr;
  {
    std::lock_guard lock(mu_);
    for (const auto& [jid, job] : jobs_) {
      if (job->model_id == id && !is_terminal(job->state)) active = jid;
    }
  }
  return {{"model", std::move(model)}, {"activeJob", std::move(active)}};
}

json TrainingService::create_track(const json& req) {
  const json& spec = field(req, "track");
  if (spec.is_object() && spec.contains("id") && spec["id"].is_string() &&
      geo::builtin_track(spec["id"].get<std::string>())) {
    throw ApiError{ErrorCode::ValidationFailed, "track id is reserved for a builtin track",
                   json::array({{{"code", "InvalidTrack"}, {"message", "track id is reserved for a builtin track"}}})};
  }
  try {
    const geo::Track track = geo::track_from_json(spec);
    store_.put_track(track);
    return {{"track", geo::track_to_json(track)}};
  } catch (const Error& e) {
    throw ApiError{ErrorCode::ValidationFailed, "track failed validation", diagnostic_for(e)};
  } catch (const json::exception& e) {
    throw ApiError{ErrorCode::ValidationFailed, "track failed validation",
                   json::array({{{"code", "InvalidTrack"}, {"message", e.what()}}})};
  }
}

json TrainingService::list_tracks(const json&) {
  json tracks = json::array();
  for (const auto& id : store_.track_ids()) tracks.push_back(track_summary(*store_.track(id)));
  return {{"tracks", std::move(tracks)}};
}

json TrainingService::get_track(const json& req) {
  const std::string id = string_field(req, "trackId");
  if (!store_.has_track(id)) throw ApiError{ErrorCode::UnknownId, "no track '" + id + "'"};
  return {{"track", geo::track_to_json(*store_.track(id))}};
}

json TrainingService::start_training(const json& req) {
  const std::string model_id = string_field(req, "modelId");
  const std::string track_id = string_field(req, "trackId");
  const auto episodes = int_field(req, "episodes");
  if (!store_.has_model(model_id)) throw ApiError{ErrorCode::UnknownId, "no model '" + model_id + "'"};
  if (!store_.has_track(track_id)) throw ApiError{ErrorCode::UnknownId, "no track '" + track_id + "'"};
  if (episodes < 1 || episodes > cfg_.max_episodes) {
    throw ApiError{ErrorCode::ValidationFailed, "episodes must be between 1 and " + std::to_string(cfg_.max_episodes),
                   json::array()};
  }
  std::lock_guard lock(mu_);
  for (const auto& [jid, job] : jobs_) {
    if (job->model_id == model_id && !is_terminal(job->state)) {
      throw ApiError{ErrorCode::ModelBusy, "model '" + model_id + "' is already training in " + jid};
    }
  }
  auto job = std::make_unique<Job>();
  const std::int64_t n = next_job_++;
  job->id = "job-" + std::to_string(n);
  job->model_id = model_id;
  job->track_id = track_id;
  job->episodes = static_cast<int>(episodes);
  job->seed = static_cast<std::uint64_t>(int_field(req, "seed", n));
  job->created_at = store_.now();
  persist(*job);
  Job& ref = *job;
  jobs_[ref.id] = std::move(job);
  ref.worker = std::thread([this, &ref] { run_job(ref); });
  return {{"job", job_json(ref)}};
}

json TrainingService::cancel_training(const json& req) {
  const std::string id = string_field(req, "jobId");
  std::lock_guard lock(mu_);
  Job& job = require_job(id);
  if (!is_terminal(job.state)) job.cancel = true;
  return {{"job", job_json(job)}};
}

json TrainingService::run_test(const json& req) {
  const std::string model_id = string_field(req, "modelId");
  const std::string track_id = string_field(req, "trackId");
  const auto seed = static_cast<std::uint64_t>(int_field(req, "seed", 0));
  const std::string driver = optional_string(req, "driver").value_or("policy");
  if (driver != "policy" && driver != "centerline") {
    throw ApiError{ErrorCode::BadRequest, "driver must be \"policy\" or \"centerline\""};
  }
  if (!store_.has_model(model_id)) throw ApiError{ErrorCode::UnknownId, "no model '" + model_id + "'"};
  if (!store_.has_track(track_id)) throw ApiError{ErrorCode::UnknownId, "no track '" + track_id + "'"};
  const auto track = store_.track(track_id);

  std::optional<dsl::Objective> objective;
  if (req.contains("objective") && !req["objective"].is_null()) {
    try {
      objective = dsl::objective_from_json(req["objective"]);
    } catch (const std::exception& e) {
      throw ApiError{ErrorCode::ValidationFailed, "objective failed validation",
                     json::array({{{"code", "InvalidObjective"}, {"message", e.what()}}})};
    }
  }

  std::optional<dsl::Program> program;
  std::vector<dsl::Diagnostic> diagnostics;
  if (const auto source = optional_string(req, "programSource")) {
    auto parsed = dsl::parse(*source);
    diagnostics = parsed.diagnostics;
    if (parsed.ok()) {
      const auto checked = dsl::check(parsed.program, *track);
      diagnostics.insert(diagnostics.end(), checked.begin(), checked.end());
    }
    if (dsl::has_errors(diagnostics)) {
      throw ApiError{ErrorCode::ValidationFailed, "program has errors", dsl::to_json(diagnostics)};
    }
    program = std::move(parsed.program);
  }

  const ppo::Model model = store_.load_model(model_id);
  nn::NetPolicy net_policy(model.net);
  sim::CenterlineDriver centerline(*track);
  sim::Policy& policy = driver == "centerline" ? static_cast<sim::Policy&>(centerline) : net_policy;
  const auto mode = program ? sim::RunMode::Programmed : sim::RunMode::Test;
  auto run = sim::run_episode(policy, *track, seed, mode, program ? &*program : nullptr, cfg_.train.sim,
                              cfg_.train.obs);

  std::optional<dsl::ObjectiveReport> report;
  if (objective) report = dsl::evaluate_objective(*track, run.episode, run.effects, *objective);
  const std::string id = store_.put_episode(model_id, run.episode, program ? &run.effects : nullptr);

  json out = {{"episode", store::to_json(*store_.episode_summary(id))},
              {"endpoint", {run.episode.endpoint.x, run.episode.endpoint.y}},
              {"tilesVisited", run.episode.tiles_visited()},
              {"diagnostics", dsl::to_json(diagnostics)},
              {"faults", dsl::to_json(run.faults)}};
  if (report) out["objective"] = dsl::to_json(*report);
  return out;
}

json TrainingService::get_overlay(const json& req) {
  const std::string model_id = string_field(req, "modelId");
  const std::string track_id = string_field(req, "trackId");
  if (!store_.has_model(model_id)) throw ApiError{ErrorCode::UnknownId, "no model '" + model_id + "'"};
  if (!store_.has_track(track_id)) throw ApiError{ErrorCode::UnknownId, "no track '" + track_id + "'"};
  return {{"overlay", store::to_json(store_.overlay(model_id, track_id, optional_string(req, "episodeId")))}};
}

json TrainingService::get_reward_curve(const json& req) {
  const std::string model_id = string_field(req, "modelId");
  const std::string track_id = string_field(req, "trackId");
  if (!store_.has_model(model_id)) throw ApiError{ErrorCode::UnknownId, "no model '" + model_id + "'"};
  if (!store_.has_track(track_id)) throw ApiError{ErrorCode::UnknownId, "no track '" + track_id + "'"};
  json curve = json::array();
  for (const auto& [ordinal, reward] : store_.reward_curve(model_id, track_id)) {
    curve.push_back({{"ordinal", ordinal}, {"totalReward", reward}});
  }
  return {{"modelId", model_id}, {"trackId", track_id}, {"curve", std::move(curve)}};
}

json TrainingService::get_episode(const json& req) {
  const std::string id = string_field(req, "episodeId");
  const sim::Episode ep = store_.get_episode(id);
  json steps = json::array();
  for (const auto& s : ep.steps) steps.push_back(sim::step_json(s));
  json effects = json::array();
  for (const auto& e : store_.get_effects(id)) effects.push_back(dsl::to_json(e));
  return {{"episode", sim::episode_header_json(ep)}, {"steps", std::move(steps)}, {"effects", std::move(effects)}};
}

json TrainingService::subscribe_events(const json& req) {
  const std::string id = string_field(req, "jobId");
  {
    std::lock_guard lock(mu_);
    require_job(id);
  }
  auto batch = wait_events(id, 0, std::chrono::milliseconds(0));
  return {{"jobId", id}, {"events", std::move(batch.events)}, {"closed", batch.closed}};
}

}  // namespace artn::server
