#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace artn::cli {

struct ServeArgs {
  std::string store;
  std::string listen = "127.0.0.1:8080";
};

struct TrainArgs {
  std::string store;
  std::string model;
  std::string track;
  int episodes = 0;
  std::uint64_t seed = 0;
  std::string csv;  // empty: <store>/models/<model>/train-<track>.csv
};

struct TestArgs {
  std::string store;
  std::string model;
  std::string track;
  std::uint64_t seed = 0;
  std::string program;
  std::string driver = "policy";
  std::string objective;
};

struct EvalObjectiveArgs {
  std::string store;
  std::string episode;
  std::string objective;
};

struct BenchArgs {
  std::string track = "oval";
  int episodes = 300;
  int seeds = 10;
  std::uint64_t first_seed = 1;
  int pretrain_episodes = 0;
  int threads = 1;
  std::string out = "bench-out";
};

struct TracksArgs {
  bool builtin = false;
  std::string store;
  std::string export_dir;
};

struct CreateModelArgs {
  std::string store;
  std::string name;
  std::uint64_t seed = 0;
};

// Each returns the process exit code; module errors propagate as artn::Error.
int run_serve(const ServeArgs& a);
int run_train(const TrainArgs& a);
int run_test(const TestArgs& a);
int run_eval_objective(const EvalObjectiveArgs& a);
int run_bench(const BenchArgs& a);
int run_tracks(const TracksArgs& a);
int run_create_model(const CreateModelArgs& a);

}  // namespace artn::cli
