// Parallel kernels against their serial references.

#include <random>

#include <benchmark/benchmark.h>

#include "rmnav/expert.hpp"
#include "rmnav/policy.hpp"
#include "rmnav/runner.hpp"
#include "rmnav/uncertainty.hpp"

using namespace rmnav;

namespace {

std::vector<MemberProbs> randomBatch(int n, int k) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e(1.0);
  std::vector<MemberProbs> batch(static_cast<std::size_t>(n), MemberProbs(static_cast<std::size_t>(k)));
  for (auto& rows : batch)
    for (auto& r : rows) {
      double s = 0.0;
      for (double& v : r) s += v = e(rng);
      for (double& v : r) v /= s;
    }
  return batch;
}

const DemonstrationSet& demos() {
  static const DemonstrationSet d = [] {
    DemoParams p;
    p.L = 10;
    return generateDemos(200, p, 1);
  }();
  return d;
}

TrainHyper hyper() {
  TrainHyper h;
  h.epochs = 3;
  return h;
}

const EnsemblePolicy& policy() {
  static const EnsemblePolicy p = trainEnsemble(demos(), 10, 2, hyper());
  return p;
}

template <auto Fn>
void BM_Decompose(benchmark::State& state) {
  const auto batch = randomBatch(static_cast<int>(state.range(0)), 10);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_Train(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Fn(demos(), static_cast<int>(state.range(0)), 2, hyper()));
}

template <auto Fn>
void BM_Predict(benchmark::State& state) {
  const auto& obs = demos().trajectories.front().observations.front();
  const auto& p = policy();
  std::mt19937_64 rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(p, obs, rng));
}

template <auto Fn>
void BM_Suite(benchmark::State& state) {
  SuiteSpec spec;
  for (const char* name : {"open_room", "deceptive_corridor", "sealed_deceptive"})
    spec.scenarios.push_back(Grid::build(loadScenario(std::string(RMNAV_SCENARIO_DIR) + "/" + name + ".txt")));
  spec.methods = {Method::ReMove, Method::ReMoveNoFeedback, Method::PerceivedPlannerBaseline};
  spec.trials = static_cast<int>(state.range(0));
  spec.seed = 11;
  spec.feedbackFactory = [] { return std::make_unique<ScriptedOracleFeedback>(); };
  const auto& p = policy();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(spec, p));
}

MemberProbs predictParallel(const EnsemblePolicy& p, std::span<const double> obs, std::mt19937_64& rng) {
  return predictMembers(p, obs, rng);
}

}  // namespace

BENCHMARK(BM_Decompose<decomposeBatch>)->Arg(100000);
BENCHMARK(BM_Decompose<decomposeBatchSerial>)->Arg(100000);
BENCHMARK(BM_Train<trainEnsemble>)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Train<trainEnsembleSerial>)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Predict<predictParallel>);
BENCHMARK(BM_Predict<predictMembersSerial>);
BENCHMARK(BM_Suite<runSuite>)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Suite<runSuiteSerial>)->Arg(10)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
