#include <CLI11.hpp>

#include <iostream>

#include "artn/error.hpp"
#include "commands.hpp"

using namespace artn::cli;

int main(int argc, char** argv) {
  CLI::App app{"Train, test and serve track-driving policies."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "artn 0.1.0");

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run the training server");
  s->add_option("--store", serve.store, "Store directory")->required();
  s->add_option("--listen", serve.listen, "Bind address HOST:PORT")->capture_default_str();

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train a stored model with PPO");
  tr->add_option("--store", train.store, "Store directory")->required();
  tr->add_option("--model", train.model, "Model id")->required();
  tr->add_option("--track", train.track, "Track id")->required();
  tr->add_option("--episodes", train.episodes, "Episodes to train")->required()->check(CLI::PositiveNumber);
  tr->add_option("--seed", train.seed, "Training seed")->capture_default_str();
  tr->add_option("--csv", train.csv, "Per-episode CSV (default: <store>/models/<model>/train-<track>.csv)");

  TestArgs test;
  auto* te = app.add_subcommand("test", "Run one greedy episode and store it");
  te->add_option("--store", test.store, "Store directory")->required();
  te->add_option("--model", test.model, "Model id")->required();
  te->add_option("--track", test.track, "Track id")->required();
  te->add_option("--seed", test.seed, "Episode seed")->required();
  te->add_option("--program", test.program, "Callback script (.wps)")->check(CLI::ExistingFile);
  te->add_option("--driver", test.driver, "Who steers")
      ->check(CLI::IsMember({"policy", "centerline"}))
      ->capture_default_str();
  te->add_option("--objective", test.objective, "Objective JSON to grade the episode against")
      ->check(CLI::ExistingFile);

  EvalObjectiveArgs eval;
  auto* ev = app.add_subcommand("eval-objective", "Grade a stored episode against an objective");
  ev->add_option("--store", eval.store, "Store directory")->required();
  ev->add_option("--episode", eval.episode, "Episode id MODEL:TRACK:N")->required();
  ev->add_option("--objective", eval.objective, "Objective JSON")->required()->check(CLI::ExistingFile);

  BenchArgs bench;
  auto* be = app.add_subcommand("bench", "Learning-curve benchmark with a fresh model per seed");
  be->add_option("--track", bench.track, "Builtin track id")->capture_default_str();
  be->add_option("--episodes", bench.episodes, "Training episodes per seed")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  be->add_option("--seeds", bench.seeds, "Number of seeds")->check(CLI::PositiveNumber)->capture_default_str();
  be->add_option("--first-seed", bench.first_seed, "First seed")->capture_default_str();
  be->add_option("--pretrain-episodes", bench.pretrain_episodes, "Episodes on rapid-7 before each run")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  be->add_option("--threads", bench.threads, "Seeds run in parallel")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  be->add_option("--out", bench.out, "Output directory for CSVs")->capture_default_str();

  TracksArgs tracks;
  auto* tk = app.add_subcommand("tracks", "List tracks");
  tk->add_flag("--builtin", tracks.builtin, "The seven rapid training tracks");
  tk->add_option("--store", tracks.store, "List the tracks of a store instead");
  tk->add_option("--export", tracks.export_dir, "Also write each track as <id>.json here");

  CreateModelArgs create;
  auto* cm = app.add_subcommand("create-model", "Create a model with fresh weights");
  cm->add_option("--store", create.store, "Store directory")->required();
  cm->add_option("--name", create.name, "Display name")->required();
  cm->add_option("--seed", create.seed, "Weight initialization seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s) return run_serve(serve);
    if (*tr) return run_train(train);
    if (*te) return run_test(test);
    if (*ev) return run_eval_objective(eval);
    if (*be) return run_bench(bench);
    if (*tk) {
      if (tracks.builtin == !tracks.store.empty()) {
        std::cerr << "tracks: give exactly one of --builtin or --store\n";
        return 2;
      }
      return run_tracks(tracks);
    }
    if (*cm) return run_create_model(create);
  } catch (const artn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
