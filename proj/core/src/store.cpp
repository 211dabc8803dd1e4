#include "artn/store.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>

#include "artn/episode_io.hpp"
#include "artn/tracks.hpp"

namespace fs = std::filesystem;

namespace artn::store {

namespace {

std::atomic<std::uint64_t> g_tmp_counter{0};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_temp_name(const fs::path& p) { return p.filename().string().find(".tmp") != std::string::npos; }

std::optional<std::int64_t> parse_ordinal(std::string_view text) {
  std::int64_t n = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc() || ptr != text.data() + text.size() || n <= 0) return std::nullopt;
  return n;
}

// Checks the internal consistency a truncated or edited file would break.
void validate_episode(const sim::Episode& ep) {
  double sum = 0.0;
  for (const auto& s : ep.steps) sum += s.reward;
  if (std::abs(sum - ep.total_reward) > 1e-6) {
    throw Error(ErrorCode::CorruptRecord, "step rewards do not add up to totalReward");
  }
  if (!ep.steps.empty() && !(ep.steps.back().state.position == ep.endpoint)) {
    throw Error(ErrorCode::CorruptRecord, "endpoint differs from the last step position");
  }
}

nlohmann::json point_json(geo::Vec2 p) { return nlohmann::json::array({p.x, p.y}); }

}  // namespace

bool is_valid_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

std::string format_episode_id(const EpisodeRef& ref) {
  return ref.model_id + ":" + ref.track_id + ":" + std::to_string(ref.ordinal);
}

EpisodeRef parse_episode_id(std::string_view id) {
  const auto a = id.find(':');
  const auto b = a == std::string_view::npos ? a : id.find(':', a + 1);
  if (b == std::string_view::npos || id.find(':', b + 1) != std::string_view::npos) {
    throw Error(ErrorCode::UnknownId, "malformed episode id '" + std::string(id) + "'");
  }
  EpisodeRef ref{std::string(id.substr(0, a)), std::string(id.substr(a + 1, b - a - 1)), 0};
  const auto n = parse_ordinal(id.substr(b + 1));
  if (!is_valid_id(ref.model_id) || !is_valid_id(ref.track_id) || !n) {
    throw Error(ErrorCode::UnknownId, "malformed episode id '" + std::string(id) + "'");
  }
  ref.ordinal = *n;
  return ref;
}

nlohmann::json to_json(const EpisodeSummary& s) {
  return {{"id", s.id},
          {"ordinal", s.ordinal},
          {"totalReward", s.total_reward},
          {"outcome", std::string(sim::to_string(s.outcome))},
          {"steps", s.steps}};
}

nlohmann::json to_json(const Overlay& overlay) {
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& e : overlay.episodes) {
    nlohmann::json path = nlohmann::json::array();
    for (geo::Vec2 p : e.path) path.push_back(point_json(p));
    eps.push_back({{"id", e.id},
                   {"ordinal", e.ordinal},
                   {"totalReward", e.total_reward},
                   {"outcome", std::string(sim::to_string(e.outcome))},
                   {"endpoint", point_json(e.endpoint)},
                   {"path", std::move(path)}});
  }
  return {{"modelId", overlay.model_id}, {"trackId", overlay.track_id}, {"episodes", std::move(eps)}};
}

std::vector<geo::Vec2> decimate(const std::vector<geo::Vec2>& pts, std::size_t max_points) {
  if (pts.size() <= max_points || max_points < 2) return pts;
  const std::size_t last = pts.size() - 1;
  const std::size_t stride = (last + (max_points - 1) - 1) / (max_points - 1);
  std::vector<geo::Vec2> out;
  for (std::size_t i = 0; i < last; i += stride) out.push_back(pts[i]);
  out.push_back(pts[last]);
  return out;
}

std::string system_clock_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Store::Store(fs::path root, Clock clock) : root_(std::move(root)), clock_(std::move(clock)) {
  for (const char* sub : {"tracks", "models", "jobs"}) fs::create_directories(root_ / sub);
  scan();
  for (const geo::Track& t : geo::builtin_tracks()) {
    if (!tracks_.count(t.id())) put_track(t);
  }
}

std::vector<StoreWarning> Store::warnings() const {
  std::shared_lock lock(mu_);
  return warnings_;
}

void Store::scan() {
  for (const auto& entry : fs::directory_iterator(root_ / "tracks")) {
    const fs::path& p = entry.path();
    if (is_temp_name(p)) {
      fs::remove(p);
      continue;
    }
    if (p.extension() != ".json") continue;
    try {
      auto t = std::make_shared<const geo::Track>(geo::track_from_json(nlohmann::json::parse(read_file(p))));
      tracks_[t->id()] = std::move(t);
    } catch (const std::exception& e) {
      warnings_.push_back({ErrorCode::CorruptRecord, p.string(), e.what()});
    }
  }
  for (const auto& entry : fs::directory_iterator(root_ / "models")) {
    if (!entry.is_directory()) continue;
    const std::string id = entry.path().filename().string();
    if (!is_valid_id(id)) continue;
    if (id.rfind("model-", 0) == 0) {
      if (const auto n = parse_ordinal(std::string_view(id).substr(6))) next_model_ = std::max(next_model_, *n + 1);
    }
    for (const auto& f : fs::directory_iterator(entry.path())) {
      if (is_temp_name(f.path())) fs::remove(f.path());
    }
    const fs::path meta_path = entry.path() / "meta.json";
    try {
      nn::ModelMeta meta = nn::model_meta_from_json(nlohmann::json::parse(read_file(meta_path)));
      if (meta.model_id != id) throw Error(ErrorCode::CorruptRecord, "modelId does not match its directory");
      models_[id] = std::move(meta);
    } catch (const std::exception& e) {
      warnings_.push_back({ErrorCode::CorruptRecord, meta_path.string(), e.what()});
      continue;
    }
    scan_episodes(id);
  }
}

void Store::scan_episodes(const std::string& model_id) {
  const fs::path dir = model_dir(model_id) / "episodes";
  if (!fs::exists(dir)) return;
  for (const auto& tdir : fs::directory_iterator(dir)) {
    if (!tdir.is_directory()) continue;
    const std::string track_id = tdir.path().filename().string();
    if (!is_valid_id(track_id)) continue;
    const auto key = std::make_pair(model_id, track_id);
    std::vector<std::pair<std::int64_t, fs::path>> files;
    for (const auto& f : fs::directory_iterator(tdir.path())) {
      const fs::path& p = f.path();
      if (is_temp_name(p)) {
        fs::remove(p);
        continue;
      }
      const std::string name = p.filename().string();
      if (p.extension() != ".jsonl" || name.find(".effects.") != std::string::npos) continue;
      if (const auto n = parse_ordinal(p.stem().string())) files.emplace_back(*n, p);
    }
    std::sort(files.begin(), files.end());
    auto& list = episodes_[key];
    for (const auto& [n, p] : files) {
      next_ordinal_[key] = std::max(next_ordinal_[key], n + 1);
      try {
        std::ifstream in(p);
        sim::Episode ep = sim::read_episode_jsonl(in);
        validate_episode(ep);
        const std::string id = format_episode_id({model_id, track_id, n});
        if (ep.id != id) throw Error(ErrorCode::CorruptRecord, "episode id does not match its path");
        list.push_back({id, n, ep.total_reward, ep.outcome, static_cast<int>(ep.steps.size())});
      } catch (const std::exception& e) {
        warnings_.push_back({ErrorCode::CorruptRecord, p.string(), e.what()});
      }
    }
  }
}

void Store::atomic_write(const fs::path& path, const std::string& bytes) const {
  const fs::path tmp = path.string() + ".tmp" + std::to_string(g_tmp_counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
  }
  if (commit_hook_) commit_hook_(tmp, path);
  fs::rename(tmp, path);
}

fs::path Store::model_dir(std::string_view id) const { return root_ / "models" / std::string(id); }

fs::path Store::episode_path(const EpisodeRef& ref, bool effects) const {
  return model_dir(ref.model_id) / "episodes" / ref.track_id /
         (std::to_string(ref.ordinal) + (effects ? ".effects.jsonl" : ".jsonl"));
}

void Store::require_model(std::string_view id) const {
  if (!models_.count(id)) throw Error(ErrorCode::UnknownModel, "no model '" + std::string(id) + "'");
}

void Store::require_track(std::string_view id) const {
  if (!tracks_.count(id)) throw Error(ErrorCode::UnknownTrack, "no track '" + std::string(id) + "'");
}

std::vector<std::string> Store::track_ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, t] : tracks_) out.push_back(id);
  return out;
}

bool Store::has_track(std::string_view id) const {
  std::shared_lock lock(mu_);
  return tracks_.count(id) > 0;
}

std::shared_ptr<const geo::Track> Store::track(std::string_view id) const {
  std::shared_lock lock(mu_);
  require_track(id);
  return tracks_.find(id)->second;
}

void Store::put_track(const geo::Track& track) {
  if (!is_valid_id(track.id())) throw Error(ErrorCode::InvalidTrack, "invalid track id '" + track.id() + "'");
  std::unique_lock lock(mu_);
  atomic_write(root_ / "tracks" / (track.id() + ".json"), geo::track_to_json(track).dump(2) + "\n");
  tracks_[track.id()] = std::make_shared<const geo::Track>(track);
}

nn::ModelMeta Store::create_model(const std::string& name, std::uint64_t init_seed) {
  ppo::Model model{{}, nn::PolicyNet()};
  Rng rng(init_seed);
  model.net.init(rng);
  {
    std::unique_lock lock(mu_);
    model.meta = {"model-" + std::to_string(next_model_++), name, 0, clock_()};
    fs::create_directories(model_dir(model.meta.model_id) / "episodes");
  }
  save_model(model);
  return model.meta;
}

std::vector<nn::ModelMeta> Store::list_models() const {
  std::shared_lock lock(mu_);
  std::vector<nn::ModelMeta> out;
  for (const auto& [id, m] : models_) out.push_back(m);
  // Creation order for the generated ids.
  std::stable_sort(out.begin(), out.end(), [](const nn::ModelMeta& a, const nn::ModelMeta& b) {
    return a.model_id.size() != b.model_id.size() ? a.model_id.size() < b.model_id.size() : a.model_id < b.model_id;
  });
  return out;
}

bool Store::has_model(std::string_view id) const {
  std::shared_lock lock(mu_);
  return models_.count(id) > 0;
}

nn::ModelMeta Store::model_meta(std::string_view id) const {
  std::shared_lock lock(mu_);
  require_model(id);
  return models_.find(id)->second;
}

ppo::Model Store::load_model(std::string_view id) const {
  std::shared_lock lock(mu_);
  require_model(id);
  return {models_.find(id)->second, nn::load_weights(model_dir(id) / "weights.bin")};
}

void Store::save_model(const ppo::Model& model) {
  if (!is_valid_id(model.meta.model_id)) throw Error(ErrorCode::UnknownModel, "invalid model id");
  const auto bytes = nn::serialize_weights(model.net);
  std::unique_lock lock(mu_);
  fs::create_directories(model_dir(model.meta.model_id));
  atomic_write(model_dir(model.meta.model_id) / "weights.bin", std::string(bytes.begin(), bytes.end()));
  atomic_write(model_dir(model.meta.model_id) / "meta.json", nn::to_json(model.meta).dump(2) + "\n");
  models_[model.meta.model_id] = model.meta;
}

std::string Store::put_episode(const std::string& model_id, sim::Episode episode, const dsl::EffectLog* effects) {
  std::unique_lock lock(mu_);
  require_model(model_id);
  require_track(episode.track_id);
  const auto key = std::make_pair(model_id, episode.track_id);
  auto& next = next_ordinal_[key];
  if (next == 0) next = 1;
  const EpisodeRef ref{model_id, episode.track_id, next};
  episode.id = format_episode_id(ref);
  fs::create_directories(episode_path(ref, false).parent_path());
  if (effects) {
    std::ostringstream fx;
    sim::write_effects_jsonl(fx, *effects);
    atomic_write(episode_path(ref, true), fx.str());
  }
  // The episode file is the commit point: effects without it are ignored.
  atomic_write(episode_path(ref, false), sim::episode_to_jsonl(episode));
  ++next;
  episodes_[key].push_back({episode.id, ref.ordinal, episode.total_reward, episode.outcome,
                            static_cast<int>(episode.steps.size())});
  return episode.id;
}

sim::Episode Store::get_episode(std::string_view id) const {
  const EpisodeRef ref = parse_episode_id(id);
  if (!episode_summary(id)) throw Error(ErrorCode::UnknownId, "no episode '" + std::string(id) + "'");
  std::ifstream in(episode_path(ref, false));
  if (!in) throw Error(ErrorCode::UnknownId, "no episode '" + std::string(id) + "'");
  sim::Episode ep = sim::read_episode_jsonl(in);
  validate_episode(ep);
  return ep;
}

dsl::EffectLog Store::get_effects(std::string_view id) const {
  const EpisodeRef ref = parse_episode_id(id);
  if (!episode_summary(id)) throw Error(ErrorCode::UnknownId, "no episode '" + std::string(id) + "'");
  std::ifstream in(episode_path(ref, true));
  if (!in) return {};
  return sim::read_effects_jsonl(in);
}

std::optional<EpisodeSummary> Store::episode_summary(std::string_view id) const {
  EpisodeRef ref;
  try {
    ref = parse_episode_id(id);
  } catch (const Error&) {
    return std::nullopt;
  }
  std::shared_lock lock(mu_);
  const auto it = episodes_.find({ref.model_id, ref.track_id});
  if (it == episodes_.end()) return std::nullopt;
  for (const auto& s : it->second) {
    if (s.ordinal == ref.ordinal) return s;
  }
  return std::nullopt;
}

std::vector<EpisodeSummary> Store::list_episodes(std::string_view model_id, std::string_view track_id) const {
  std::shared_lock lock(mu_);
  require_model(model_id);
  require_track(track_id);
  const auto it = episodes_.find({std::string(model_id), std::string(track_id)});
  return it == episodes_.end() ? std::vector<EpisodeSummary>{} : it->second;
}

Overlay Store::overlay(std::string_view model_id, std::string_view track_id,
                       const std::optional<std::string>& episode_filter) const {
  Overlay out{std::string(model_id), std::string(track_id), {}};
  for (const EpisodeSummary& s : list_episodes(model_id, track_id)) {
    if (episode_filter && s.id != *episode_filter) continue;
    const sim::Episode ep = get_episode(s.id);
    std::vector<geo::Vec2> path;
    path.reserve(ep.steps.size());
    for (const auto& st : ep.steps) path.push_back(st.state.position);
    out.episodes.push_back({s.id, s.ordinal, ep.total_reward, ep.outcome, ep.endpoint, decimate(path)});
  }
  if (episode_filter && out.episodes.empty()) {
    throw Error(ErrorCode::UnknownId, "no episode '" + *episode_filter + "' for this model and track");
  }
  return out;
}

std::vector<std::pair<std::int64_t, double>> Store::reward_curve(std::string_view model_id,
                                                                 std::string_view track_id) const {
  std::vector<std::pair<std::int64_t, double>> out;
  std::shared_lock lock(mu_);
  const auto it = episodes_.find({std::string(model_id), std::string(track_id)});
  if (it == episodes_.end()) return out;
  for (const auto& s : it->second) out.emplace_back(s.ordinal, s.total_reward);
  return out;
}

void Store::put_job(const std::string& job_id, const nlohmann::json& record) {
  if (!is_valid_id(job_id)) throw Error(ErrorCode::UnknownId, "invalid job id");
  std::unique_lock lock(mu_);
  atomic_write(root_ / "jobs" / (job_id + ".json"), record.dump() + "\n");
}

std::vector<nlohmann::json> Store::list_jobs() const {
  std::shared_lock lock(mu_);
  std::vector<nlohmann::json> out;
  for (const auto& entry : fs::directory_iterator(root_ / "jobs")) {
    const fs::path& p = entry.path();
    if (is_temp_name(p) || p.extension() != ".json") continue;
    try {
      out.push_back(nlohmann::json::parse(read_file(p)));
    } catch (const std::exception&) {
      // Unreadable job records are dropped; their episodes live elsewhere.
    }
  }
  return out;
}

void Store::set_commit_hook(std::function<void(const fs::path&, const fs::path&)> hook) {
  std::unique_lock lock(mu_);
  commit_hook_ = std::move(hook);
}

}  // namespace artn::store
