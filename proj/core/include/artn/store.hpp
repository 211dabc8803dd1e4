#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "artn/dsl/interpreter.hpp"
#include "artn/error.hpp"
#include "artn/geometry.hpp"
#include "artn/model.hpp"
#include "artn/ppo.hpp"
#include "artn/sim.hpp"

namespace artn::store {

// Ids used in paths: non-empty [A-Za-z0-9_-]+.
bool is_valid_id(std::string_view id);

struct EpisodeRef {
  std::string model_id;
  std::string track_id;
  std::int64_t ordinal = 0;
};

// "<model>:<track>:<n>"
std::string format_episode_id(const EpisodeRef& ref);
// Throws UnknownId when the text is not a well-formed episode id.
EpisodeRef parse_episode_id(std::string_view id);

struct EpisodeSummary {
  std::string id;
  std::int64_t ordinal = 0;
  double total_reward = 0.0;
  sim::Outcome outcome = sim::Outcome::Timeout;
  int steps = 0;
};

nlohmann::json to_json(const EpisodeSummary& s);

struct StoreWarning {
  ErrorCode code = ErrorCode::CorruptRecord;
  std::string path;
  std::string message;
};

struct OverlayEpisode {
  std::string id;
  std::int64_t ordinal = 0;
  double total_reward = 0.0;
  sim::Outcome outcome = sim::Outcome::Timeout;
  geo::Vec2 endpoint;
  std::vector<geo::Vec2> path;
};

struct Overlay {
  std::string model_id;
  std::string track_id;
  std::vector<OverlayEpisode> episodes;  // training order
};

nlohmann::json to_json(const Overlay& overlay);

inline constexpr std::size_t kOverlayMaxPoints = 500;

/// Uniform-stride decimation to at most `max_points`, always keeping the
/// first and last point.
std::vector<geo::Vec2> decimate(const std::vector<geo::Vec2>& pts, std::size_t max_points = kOverlayMaxPoints);

using Clock = std::function<std::string()>;
// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string system_clock_iso8601();

/// File-backed store:
///   tracks/<id>.json
///   models/<id>/weights.bin, models/<id>/meta.json
///   models/<id>/episodes/<track>/<n>.jsonl (+ <n>.effects.jsonl)
///   jobs/<job>.json
/// Every write goes to a temporary file that is renamed into place. All
/// methods are safe to call from several threads.
class Store {
 public:
  /// Opens (creating if needed) a store rooted at `root`, installs missing
  /// builtin tracks and indexes everything on disk. Unreadable records are
  /// skipped and reported through warnings().
  explicit Store(std::filesystem::path root, Clock clock = system_clock_iso8601);

  const std::filesystem::path& root() const { return root_; }
  std::vector<StoreWarning> warnings() const;

  // Tracks.
  std::vector<std::string> track_ids() const;
  bool has_track(std::string_view id) const;
  // Throws UnknownTrack.
  std::shared_ptr<const geo::Track> track(std::string_view id) const;
  // Replaces any track with the same id.
  void put_track(const geo::Track& track);

  // Models.
  /// New model with freshly initialized weights; ids are "model-1",
  /// "model-2", ... in creation order. `init_seed` seeds the weights.
  nn::ModelMeta create_model(const std::string& name, std::uint64_t init_seed = 0);
  std::vector<nn::ModelMeta> list_models() const;
  bool has_model(std::string_view id) const;
  // Throws UnknownModel.
  nn::ModelMeta model_meta(std::string_view id) const;
  ppo::Model load_model(std::string_view id) const;
  void save_model(const ppo::Model& model);

  // Episodes.
  /// Assigns the next ordinal for (model, track), writes the episode (and
  /// the effect log when given) and returns the episode id.
  std::string put_episode(const std::string& model_id, sim::Episode episode,
                          const dsl::EffectLog* effects = nullptr);
  // Throws UnknownId or CorruptRecord.
  sim::Episode get_episode(std::string_view id) const;
  dsl::EffectLog get_effects(std::string_view id) const;
  std::optional<EpisodeSummary> episode_summary(std::string_view id) const;
  std::vector<EpisodeSummary> list_episodes(std::string_view model_id, std::string_view track_id) const;
  Overlay overlay(std::string_view model_id, std::string_view track_id,
                  const std::optional<std::string>& episode_filter = std::nullopt) const;
  std::vector<std::pair<std::int64_t, double>> reward_curve(std::string_view model_id,
                                                            std::string_view track_id) const;

  // Job records (opaque JSON owned by the training service).
  void put_job(const std::string& job_id, const nlohmann::json& record);
  std::vector<nlohmann::json> list_jobs() const;

  /// Test hook run after a temporary file is written and before it is
  /// renamed into place. Throwing from it simulates a crash at that point.
  void set_commit_hook(std::function<void(const std::filesystem::path& tmp,
                                          const std::filesystem::path& final_path)> hook);

  std::string now() const { return clock_(); }

 private:
  void scan();
  void scan_episodes(const std::string& model_id);
  void atomic_write(const std::filesystem::path& path, const std::string& bytes) const;
  std::filesystem::path model_dir(std::string_view id) const;
  std::filesystem::path episode_path(const EpisodeRef& ref, bool effects) const;
  void require_model(std::string_view id) const;
  void require_track(std::string_view id) const;

  std::filesystem::path root_;
  Clock clock_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const geo::Track>, std::less<>> tracks_;
  std::map<std::string, nn::ModelMeta, std::less<>> models_;
  std::map<std::pair<std::string, std::string>, std::vector<EpisodeSummary>> episodes_;
  std::map<std::pair<std::string, std::string>, std::int64_t> next_ordinal_;
  std::int64_t next_model_ = 1;
  std::vector<StoreWarning> warnings_;
  std::function<void(const std::filesystem::path&, const std::filesystem::path&)> commit_hook_;
};

}  // namespace artn::store
