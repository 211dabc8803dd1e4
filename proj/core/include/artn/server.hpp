#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "artn/ppo.hpp"
#include "artn/store.hpp"

namespace artn::server {

inline constexpr int kProtocolVersion = 1;

enum class JobState { Queued, Running, Done, Cancelled, Failed };

std::string_view to_string(JobState s) noexcept;
JobState job_state_from_string(std::string_view text);
bool is_terminal(JobState s) noexcept;

struct ServiceConfig {
  ppo::TrainOptions train;  // seed and cancel are set per job
  int max_episodes = 100000;
  /// Runs on the worker thread after each episode_completed event is
  /// published, with the job id and the 1-based episode index in the job.
  /// Tests use it to cancel at a fixed point.
  std::function<void(const std::string& job_id, std::int64_t index)> after_episode;
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

struct EventBatch {
  std::vector<nlohmann::json> events;
  bool closed = false;  // the terminal event is among the events seen so far
};

/// Transport-independent training service. Requests and responses are JSON
/// objects carrying "v":1; handle() never throws. Training runs on one
/// background thread per job, at most one live job per model.
class TrainingService {
 public:
  /// Loads the job table from the store. Jobs that were queued or running
  /// when the previous process stopped are marked failed.
  explicit TrainingService(store::Store& store, ServiceConfig cfg = {});
  /// Stops running jobs (they end as failed) and joins their threads.
  ~TrainingService();

  TrainingService(const TrainingService&) = delete;
  TrainingService& operator=(const TrainingService&) = delete;

  Response handle(std::string_view endpoint, const nlohmann::json& request);

  static const std::vector<std::string>& endpoints();

  /// Events of `job_id` from position `from` on. Blocks up to `timeout` when
  /// nothing new is available and the stream is still open. Throws UnknownId.
  EventBatch wait_events(const std::string& job_id, std::size_t from,
                         std::chrono::milliseconds timeout);

  /// Blocks until no job is queued or running.
  void wait_idle();

 private:
  struct Job {
    std::string id;
    std::string model_id;
    std::string track_id;
    int episodes = 0;
    std::uint64_t seed = 0;
    JobState state = JobState::Queued;
    int completed = 0;
    std::int64_t first_ordinal = 0;  // store ordinal of the job's first episode
    std::string created_at;
    nlohmann::json error;  // null unless failed
    std::vector<nlohmann::json> events;
    std::atomic<bool> cancel{false};
    std::thread worker;
  };

  nlohmann::json job_json(const Job& job) const;
  void persist(const Job& job);
  void publish(Job& job, nlohmann::json event);
  void finish(Job& job, JobState state, nlohmann::json error);
  void run_job(Job& job);
  void load_jobs();
  Job& require_job(const std::string& id);

  nlohmann::json create_model(const nlohmann::json& req);
  nlohmann::json list_models(const nlohmann::json& req);
  nlohmann::json get_model(const nlohmann::json& req);
  nlohmann::json create_track(const nlohmann::json& req);
  nlohmann::json list_tracks(const nlohmann::json& req);
  nlohmann::json get_track(const nlohmann::json& req);
  nlohmann::json start_training(const nlohmann::json& req);
  nlohmann::json cancel_training(const nlohmann::json& req);
  nlohmann::json run_test(const nlohmann::json& req);
  nlohmann::json get_overlay(const nlohmann::json& req);
  nlohmann::json get_reward_curve(const nlohmann::json& req);
  nlohmann::json get_episode(const nlohmann::json& req);
  nlohmann::json subscribe_events(const nlohmann::json& req);

  store::Store& store_;
  ServiceConfig cfg_;
  std::mutex mu_;
  std::condition_variable changed_;
  std::map<std::string, std::unique_ptr<Job>> jobs_;
  std::int64_t next_job_ = 1;
  bool stopping_ = false;
};

}  // namespace artn::server
