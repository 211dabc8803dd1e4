#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "artn/dsl/parser.hpp"
#include "artn/policy_net.hpp"
#include "artn/sim.hpp"
#include "artn/tracks.hpp"

namespace {

using namespace artn;

void BM_PolicyForward(benchmark::State& state) {
  nn::PolicyNet net;
  Rng rng(1);
  net.init(rng);
  std::vector<float> input(static_cast<std::size_t>(net.config().input_size()), 0.5f);
  nn::Activations<float> act;
  for (auto _ : state) {
    net.forward(input, act);
    benchmark::DoNotOptimize(act.out.value);
  }
}
BENCHMARK(BM_PolicyForward);

void BM_EnvironmentStep(benchmark::State& state) {
  const geo::Track track = geo::oval_track();
  sim::Environment env(track);
  env.reset();
  int i = 0;
  for (auto _ : state) {
    if (env.done()) env.reset();
    env.step(static_cast<sim::Action>(i++ % 2 == 0 ? 0 : 4));
  }
}
BENCHMARK(BM_EnvironmentStep);

void BM_Projection(benchmark::State& state) {
  const geo::Track track = geo::builtin_track("rapid-7").value();
  Rng rng(3);
  std::vector<geo::Vec2> pts(1024);
  for (auto& p : pts) p = {rng.uniform() * 200 - 100, rng.uniform() * 200 - 100};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(track.project(pts[i++ % pts.size()]));
  }
}
BENCHMARK(BM_Projection);

void BM_ParseProgram(benchmark::State& state) {
  std::ifstream in(std::string(ARTN_BENCH_DATA_DIR) + "/bus_route_solution.wps");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string source = ss.str();
  for (auto _ : state) {
    benchmark::DoNotOptimize(dsl::parse(source));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * source.size()));
}
BENCHMARK(BM_ParseProgram);

}  // namespace

BENCHMARK_MAIN();
