#include "commands.hpp"

#include <pthread.h>

#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "artn/bench.hpp"
#include "artn/dsl/checker.hpp"
#include "artn/dsl/parser.hpp"
#include "artn/objective.hpp"
#include "artn/server.hpp"
#include "artn/store.hpp"
#include "artn/tracks.hpp"
#include "artn_tools/http_transport.hpp"

namespace fs = std::filesystem;

namespace artn::cli {

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ValidationFailed, path + ": " + e.what());
  }
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::unique_ptr<store::Store> open_store(const std::string& dir) {
  auto s = std::make_unique<store::Store>(dir);
  for (const auto& w : s->warnings()) {
    std::cerr << "warning: " << to_string(w.code) << ": " << w.path << ": " << w.message << '\n';
  }
  return s;
}

void print_report(const dsl::ObjectiveReport& report) {
  int passed = 0;
  for (const auto& r : report.results) {
    passed += r.pass ? 1 : 0;
    std::cout << (r.pass ? "PASS  " : "FAIL  ") << r.label;
    if (!r.detail.empty()) std::cout << "  " << r.detail;
    std::cout << '\n';
  }
  std::cout << "objective " << report.objective << ": " << (report.pass ? "PASS" : "FAIL") << " (" << passed << '/'
            << report.results.size() << ")\n";
}

}  // namespace

int run_serve(const ServeArgs& a) {
  const http::ListenAddress addr = http::parse_listen(a.listen);

  // Route SIGINT/SIGTERM to a waiting thread instead of a handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const auto owner = open_store(a.store);
  store::Store& store = *owner;
  server::TrainingService service(store);
  http::HttpServer http(service);
  const int port = http.bind(addr);
  std::cout << "listening on http://" << addr.host << ':' << port << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    http.stop();
  });
  http.serve();
  // serve() also returns on its own errors; wake the waiter either way.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

int run_train(const TrainArgs& a) {
  const auto owner = open_store(a.store);
  store::Store& store = *owner;
  const auto track = store.track(a.track);
  ppo::Model model = store.load_model(a.model);

  ppo::TrainOptions opts;
  opts.seed = a.seed;
  const auto summary = ppo::train(model, *track, a.episodes, opts, [&](std::int64_t n, sim::Episode&& ep) {
    const double reward = ep.total_reward;
    const auto outcome = ep.outcome;
    const auto steps = ep.steps.size();
    const std::string id = store.put_episode(a.model, std::move(ep));
    std::cout << "episode " << n << " reward " << fixed6(reward) << " outcome " << sim::to_string(outcome)
              << " steps " << steps << " id " << id << '\n';
  });
  store.save_model(model);

  const fs::path csv = a.csv.empty() ? store.root() / "models" / a.model / ("train-" + a.track + ".csv") : fs::path(a.csv);
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  std::ofstream out(csv);
  ppo::write_summary_csv(out, summary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + csv.string());
  std::cout << "trained " << model.meta.model_id << " to " << model.meta.trained_episodes << " episodes; wrote "
            << csv.string() << '\n';
  return 0;
}

int run_test(const TestArgs& a) {
  std::optional<dsl::Objective> objective;
  if (!a.objective.empty()) objective = dsl::objective_from_json(read_json(a.objective));
  std::optional<std::string> source;
  if (!a.program.empty()) source = read_text(a.program);

  const auto owner = open_store(a.store);
  store::Store& store = *owner;
  const auto track = store.track(a.track);
  const ppo::Model model = store.load_model(a.model);

  std::optional<dsl::Program> program;
  if (source) {
    auto parsed = dsl::parse(*source);
    auto diags = parsed.diagnostics;
    if (parsed.ok()) {
      const auto checked = dsl::check(parsed.program, *track);
      diags.insert(diags.end(), checked.begin(), checked.end());
    }
    for (const auto& d : diags) std::cerr << a.program << ':' << dsl::format(d) << '\n';
    if (dsl::has_errors(diags)) return 1;
    program = std::move(parsed.program);
  }

  nn::NetPolicy net_policy(model.net);
  sim::CenterlineDriver centerline(*track);
  sim::Policy& policy = a.driver == "centerline" ? static_cast<sim::Policy&>(centerline) : net_policy;
  const auto run = sim::run_episode(policy, *track, a.seed, program ? sim::RunMode::Programmed : sim::RunMode::Test,
                                    program ? &*program : nullptr);
  for (const auto& f : run.faults) std::cerr << "runtime: " << dsl::format(f) << '\n';
  const std::string id = store.put_episode(a.model, run.episode, program ? &run.effects : nullptr);

  std::cout << "episode " << id << '\n'
            << "outcome " << sim::to_string(run.episode.outcome) << '\n'
            << "total_reward " << fixed6(run.episode.total_reward) << '\n'
            << "steps " << run.episode.steps.size() << '\n'
            << "tiles " << run.episode.tiles_visited() << '/' << track->tile_count() << '\n';
  if (!objective) return 0;
  const auto report = dsl::evaluate_objective(*track, run.episode, run.effects, *objective);
  print_report(report);
  return report.pass ? 0 : 1;
}

int run_eval_objective(const EvalObjectiveArgs& a) {
  const dsl::Objective objective = dsl::objective_from_json(read_json(a.objective));
  const auto owner = open_store(a.store);
  store::Store& store = *owner;
  const sim::Episode ep = store.get_episode(a.episode);
  const auto track = store.track(ep.track_id);
  const auto report = dsl::evaluate_objective(*track, ep, store.get_effects(a.episode), objective);
  print_report(report);
  return report.pass ? 0 : 1;
}

int run_bench(const BenchArgs& a) {
  const auto track = geo::builtin_track(a.track);
  if (!track) throw Error(ErrorCode::UnknownTrack, "no builtin track '" + a.track + "'");

  bench::BenchConfig cfg;
  cfg.episodes = a.episodes;
  cfg.seeds = a.seeds;
  cfg.first_seed = a.first_seed;
  cfg.pretrain_episodes = a.pretrain_episodes;
  cfg.threads = a.threads;
  cfg.required_passes = static_cast<int>(std::ceil(0.7 * a.seeds));
  cfg.final_window = std::min(cfg.final_window, a.episodes);

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  const auto report = bench::run_bench(*track, cfg, [&](const bench::SeedResult& r) {
    std::ofstream curve(out_dir / ("curve_seed" + std::to_string(r.seed) + ".csv"));
    ppo::write_summary_csv(curve, r.summary);
    std::cout << "seed " << r.seed << " baseline " << fixed6(r.baseline_mean) << " final " << fixed6(r.final_mean)
              << " eval " << fixed6(r.eval_reward) << " tiles " << fixed6(r.eval_tile_fraction) << ' '
              << (r.pass ? "PASS" : "FAIL") << std::endl;
  });

  std::ofstream summary(out_dir / "bench_summary.csv");
  summary << "seed,baseline_mean,reward_target,final_mean,eval_reward,eval_outcome,eval_tile_fraction,reward_ok,"
             "tiles_ok,pass,seconds\n";
  for (const auto& r : report.seeds) {
    summary << r.seed << ',' << fixed6(r.baseline_mean) << ',' << fixed6(bench::reward_target(r.baseline_mean))
            << ',' << fixed6(r.final_mean) << ',' << fixed6(r.eval_reward) << ',' << sim::to_string(r.eval_outcome)
            << ',' << fixed6(r.eval_tile_fraction) << ',' << r.reward_ok << ',' << r.tiles_ok << ',' << r.pass << ','
            << fixed6(r.seconds) << '\n';
  }
  std::ofstream(out_dir / "bench_report.json") << bench::to_json(report).dump(2) << '\n';
  std::cout << "passed " << report.passed << '/' << report.seeds.size() << " seeds (need " << cfg.required_passes
            << "): " << (report.pass ? "PASS" : "FAIL") << '\n';
  return report.pass ? 0 : 1;
}

int run_tracks(const TracksArgs& a) {
  std::vector<geo::Track> tracks;
  if (a.builtin) {
    tracks = geo::builtin_rapid_tracks();
  } else {
    const auto owner = open_store(a.store);
    store::Store& store = *owner;
    for (const auto& id : store.track_ids()) tracks.push_back(*store.track(id));
  }
  if (!a.export_dir.empty()) fs::create_directories(a.export_dir);
  for (const auto& t : tracks) {
    std::cout << t.id() << '\t' << t.name() << '\t' << (t.closed() ? "closed" : "open") << '\t'
              << fixed6(t.length()).substr(0, fixed6(t.length()).size() - 4) << "m\t" << t.tile_count() << " tiles\n";
    if (!a.export_dir.empty()) {
      std::ofstream(fs::path(a.export_dir) / (t.id() + ".json")) << geo::track_to_json(t).dump(2) << '\n';
    }
  }
  return 0;
}

int run_create_model(const CreateModelArgs& a) {
  const auto owner = open_store(a.store);
  store::Store& store = *owner;
  std::cout << store.create_model(a.name, a.seed).model_id << '\n';
  return 0;
}

}  // namespace artn::cli
