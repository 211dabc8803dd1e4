// Acceptance suite: one line per criterion, exit status 0 iff all pass.
//
//   artn_acceptance [--only KEY]... [--list]

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/dsl_golden.hpp"
#include "../support/oracles.hpp"
#include "../support/protocol_runner.hpp"
#include "artn/dsl/parser.hpp"
#include "artn/objective.hpp"
#include "artn/ppo.hpp"
#include "artn/sim.hpp"
#include "artn/tracks.hpp"

namespace fs = std::filesystem;
using namespace artn;

namespace {

const fs::path kData = ARTN_TEST_DATA_DIR;
const std::string kCli = ARTN_CLI_PATH;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string key;
  std::string title;
  std::function<Outcome()> run;
};

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

// Runs a shell command, capturing stdout.
CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

struct ScratchDir {
  fs::path path;
  ScratchDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("artn-accept-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome gae_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20240601);
  double worst = 0.0;
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
    const double gamma = rng.uniform(), lambda = rng.uniform();
    const auto got = ppo::compute_gae(r, v, d, boot, gamma, lambda);
    const auto want = oracle::gae_bruteforce(r, v, db, boot, gamma, lambda);
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max({worst, std::abs(got.advantages[i] - want.advantages[i]),
                        std::abs(got.returns[i] - want.returns[i])});
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-9 && secs < 1.0,
          "100 instances, max abs error " + fmt("%.2e", worst) + ", " + fmt("%.3f", secs) + "s"};
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int checked = 0, skipped = 0;
  for (std::uint64_t seed = 1; seed <= 24; ++seed) {
    const auto r = oracle::gradient_check(seed, 1e-4);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    skipped += r.skipped;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-4 && secs < 120.0 && checked > 0,
          "24 minibatches, " + std::to_string(checked) + " params checked, " + std::to_string(skipped) +
              " at kinks, max rel error " + fmt("%.2e", worst) + ", " + fmt("%.1f", secs) + "s"};
}

Outcome determinism() {
  ScratchDir dir;
  const fs::path base = dir.path / "base";
  auto r = run_command(kCli + " create-model --store " + quote(base) + " --name fixture --seed 3");
  if (r.exit_code != 0) return {false, "create-model failed"};
  r = run_command(kCli + " train --store " + quote(base) + " --model model-1 --track oval --episodes 2 --seed 5 --csv " +
                  quote(dir.path / "base.csv"));
  if (r.exit_code != 0) return {false, "fixture training failed"};

  std::vector<std::string> outputs, episodes;
  for (const char* copy : {"a", "b"}) {
    fs::copy(base, dir.path / copy, fs::copy_options::recursive);
    r = run_command(kCli + " test --store " + quote(dir.path / copy) + " --model model-1 --track oval --seed 7");
    if (r.exit_code != 0) return {false, std::string("test failed in copy ") + copy};
    outputs.push_back(r.out);
    episodes.push_back(testing::read_text_file(dir.path / copy / "models/model-1/episodes/oval/3.jsonl"));
  }
  const bool same = outputs[0] == outputs[1] && episodes[0] == episodes[1] && !episodes[0].empty();
  const auto reward_line = outputs[0].find("total_reward");
  return {same, std::string(same ? "byte-identical" : "DIFFERENT") + " episode JSON-lines (" +
                    std::to_string(episodes[0].size()) + " bytes), " +
                    (reward_line == std::string::npos ? "" : outputs[0].substr(reward_line, outputs[0].find('\n', reward_line) - reward_line))};
}

Outcome learning_bench() {
  ScratchDir dir;
  const auto r = run_command(kCli + " bench --track oval --episodes 300 --seeds 10 --out " + quote(dir.path));
  std::istringstream lines(r.out);
  std::string last;
  for (std::string line; std::getline(lines, line);) {
    std::cerr << "  bench: " << line << '\n';
    if (!line.empty()) last = line;
  }
  return {r.exit_code == 0, last};
}

Outcome bus_route() {
  const geo::Track track = geo::bus_route_track();
  const std::string solution = testing::read_text_file(kData / "bus_route_solution.wps");
  const auto run_with = [&](const std::string& source) {
    const auto parsed = dsl::parse(source);
    sim::CenterlineDriver driver(track);
    const auto run = sim::run_episode(driver, track, 0, sim::RunMode::Programmed, &parsed.program);
    return dsl::evaluate_objective(track, run.episode, run.effects, dsl::bus_route_objective());
  };
  const auto full = run_with(solution);
  const auto empty = run_with("");
  std::string trimmed = solution;
  trimmed.replace(trimmed.find("unloadAllPassengers()"), std::string("unloadAllPassengers()").size(), "");
  const auto partial = run_with(trimmed);
  std::vector<std::string> partial_failed;
  for (const auto& r : partial.results) {
    if (!r.pass) partial_failed.push_back(r.label);
  }

  // The same fixture end to end through the CLI.
  ScratchDir dir;
  const std::string store = quote(dir.path / "store");
  run_command(kCli + " create-model --store " + store + " --name bus");
  const auto t = run_command(kCli + " test --store " + store + " --model model-1 --track bus-route --seed 0 --driver centerline --program " +
                             quote(kData / "bus_route_solution.wps"));
  const auto ev = run_command(kCli + " eval-objective --store " + store + " --episode model-1:bus-route:1 --objective " +
                              quote(kData / "bus_route_objective.json"));

  const bool pass = full.pass && empty.failures() >= 5 &&
                    partial_failed == std::vector<std::string>{"unload_all@school"} && t.exit_code == 0 &&
                    ev.exit_code == 0;
  return {pass, "solution " + std::to_string(full.results.size() - full.failures()) + "/" +
                    std::to_string(full.results.size()) + " pass, empty fails " + std::to_string(empty.failures()) +
                    ", minus unload fails [" + (partial_failed.empty() ? "" : partial_failed[0]) +
                    (partial_failed.size() > 1 ? ", ..." : "") + "], CLI eval-objective exit " +
                    std::to_string(ev.exit_code)};
}

Outcome parser_goldens() {
  const auto files = testing::corpus_files(kData / "dsl");
  int matched = 0, stable = 0, parsed_ok = 0;
  std::set<std::string> codes;
  for (const auto& f : files) {
    const std::string source = testing::read_text_file(f);
    const std::string report = testing::dsl_golden_report(source);
    auto golden_path = f;
    golden_path.replace_extension(".golden");
    if (report == testing::read_text_file(golden_path)) ++matched;
    const auto parsed = dsl::parse(source);
    if (parsed.ok()) {
      ++parsed_ok;
      if (testing::print_round_trips(parsed.program)) ++stable;
    }
    std::istringstream lines(report);
    for (std::string line; std::getline(lines, line);) {
      for (const char* sev : {": error ", ": warning "}) {
        const auto at = line.find(sev);
        if (at != std::string::npos) codes.insert(line.substr(at + std::string(sev).size(), 4));
      }
    }
  }
  const std::set<std::string> all = {"E001", "E002", "E003", "E004", "E005", "E006", "E007", "E008", "E101",
                                     "E102", "E103", "E104", "E105", "W201", "R001", "R002", "R003"};
  std::size_t covered = 0;
  for (const auto& c : all) covered += codes.count(c);
  const int n = static_cast<int>(files.size());
  return {n >= 20 && matched == n && stable == parsed_ok && covered == all.size(),
          std::to_string(matched) + "/" + std::to_string(n) + " goldens match, " + std::to_string(stable) + "/" +
              std::to_string(parsed_ok) + " print-stable, " + std::to_string(covered) + "/" +
              std::to_string(all.size()) + " codes covered"};
}

Outcome protocol_contract() {
  const auto files = testing::scenario_files(kData / "protocol");
  int ok = 0;
  std::set<std::string> endpoints, features;
  std::string first_failure;
  for (const auto& f : files) {
    std::ifstream in(f);
    nlohmann::json scenario = nlohmann::json::parse(in);
    for (const auto& step : scenario["steps"]) {
      if (step.contains("call")) endpoints.insert(step["call"].get<std::string>());
      const auto& body = step.value("response", nlohmann::json::object());
      if (body.contains("error")) features.insert(body["error"]["code"].get<std::string>());
      if (step.contains("expect")) {
        for (const auto& e : step["expect"]) features.insert(e["event"].get<std::string>());
      }
      if (step.value("call", "") == "subscribe_events" && body.value("closed", false)) features.insert("backlog");
    }
    const nlohmann::json original = scenario;
    const auto result = testing::run_scenario(scenario, false);
    if (result.ok()) {
      ++ok;
    } else if (first_failure.empty()) {
      first_failure = f.filename().string() + ": " + result.failures.front();
    }
  }
  std::size_t covered = 0;
  for (const auto& e : server::TrainingService::endpoints()) covered += endpoints.count(e);
  bool has_features = true;
  for (const char* feat : {"ModelBusy", "ValidationFailed", "UnknownId", "job_cancelled", "job_done", "backlog"}) {
    has_features = has_features && features.count(feat) == 1;
  }
  const int n = static_cast<int>(files.size());
  std::string detail = std::to_string(ok) + "/" + std::to_string(n) + " scenarios replay, " +
                       std::to_string(covered) + "/" + std::to_string(server::TrainingService::endpoints().size()) +
                       " endpoints recorded";
  if (!has_features) detail += ", missing required cases";
  if (!first_failure.empty()) detail += "; " + first_failure;
  return {ok == n && n > 0 && covered == server::TrainingService::endpoints().size() && has_features, detail};
}

Outcome reward_vector() {
  geo::TrackSpec spec;
  spec.id = "straight";
  spec.centerline = {{0, 0}, {100, 0}};
  spec.width = 5;
  spec.tile_count = 20;
  const geo::Track track = geo::build_track(spec);
  const sim::SimParams params;
  sim::TileSet visited(20);
  visited.insert(0);

  const double idle = sim::compute_reward(track, visited, track.project({2, 0}), std::nullopt, params).reward;
  const auto one = sim::compute_reward(track, visited, track.project({7, 0}), std::nullopt, params);
  // Off the ribbon, still in tile 0.
  const auto off_proj = track.project({2, 5});
  const bool on = track.is_on_track({2, 5}, params.off_track_margin);
  const auto done = sim::check_termination(visited, on, 1, params);
  const double off = sim::compute_reward(track, visited, off_proj, done, params).reward;

  const bool pass = idle == -0.1 && one.reward == 1000.0 / 20 - 0.1 && one.reward == 49.9 &&
                    one.newly_visited == std::vector<int>{1} && done == sim::Outcome::OffTrack && off == -100.1;
  return {pass, "no new tile " + fmt("%g", idle) + ", one new tile on K=20 " + fmt("%g", one.reward) +
                    ", off-track " + fmt("%g", off) + (done == sim::Outcome::OffTrack ? " (terminal)" : " (NOT terminal)")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"gae", "GAE recursion vs brute-force oracle", gae_oracle},
      {"gradcheck", "PPO loss gradient vs central differences", gradient_check},
      {"determinism", "CLI test --seed 7 twice gives identical episodes", determinism},
      {"bench", "Learning bench on the oval, 300 episodes x 10 seeds", learning_bench},
      {"busroute", "Bus-route objective end to end", bus_route},
      {"parser", "Callback-script parser golden suite", parser_goldens},
      {"protocol", "Training-server protocol contract", protocol_contract},
      {"reward", "Reward function unit vector", reward_vector},
  };

  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--list") {
      for (const auto& c : criteria) std::cout << c.key << '\t' << c.title << '\n';
      return 0;
    }
    if (arg == "--only" && i + 1 < argc) {
      only.insert(argv[++i]);
    } else {
      std::cerr << "usage: artn_acceptance [--list] [--only KEY]...\n";
      return 2;
    }
  }

  bool all = true;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.key)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS  " : "FAIL  ") << c.title << "  [" << o.detail << "]" << std::endl;
  }
  return all ? 0 : 1;
}
