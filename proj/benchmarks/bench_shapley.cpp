#include <benchmark/benchmark.h>

#include "vqashap/shapley.hpp"
#include "vqashap/synthetic.hpp"

using namespace vqashap;

namespace {

// One interaction-model tuple with `frames` + 4 + 3*2 features.
Fixture tuple_with(std::size_t frames) {
  FixtureOptions opt;
  opt.num_tuples = 1;
  opt.num_frames = frames;
  opt.num_question = 4;
  opt.num_choices = 3;
  opt.words_per_choice = 2;
  opt.kind = SyntheticKind::kInteraction;
  opt.seed = 1;
  return make_fixture(opt);
}

void BM_ExactShapley(benchmark::State& state) {
  const auto fx = tuple_with(static_cast<std::size_t>(state.range(0)));
  const auto& t = fx.dataset.tuples.front();
  const auto layout = build_modality_layout(t);
  SyntheticReward reward(fx.model.tuples.at(t.tuple_id));
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_shapley(reward, layout, {.max_concurrency = 1}));
  }
  state.counters["M"] = static_cast<double>(layout.size());
  state.counters["coalitions/s"] = benchmark::Counter(
      static_cast<double>(state.iterations()) * static_cast<double>(1ull << layout.size()),
      benchmark::Counter::kIsRate);
}
BENCHMARK(BM_ExactShapley)->Arg(2)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_MonteCarlo(benchmark::State& state) {
  const auto fx = tuple_with(20);
  const auto& t = fx.dataset.tuples.front();
  const auto layout = build_modality_layout(t);
  SyntheticReward reward(fx.model.tuples.at(t.tuple_id));
  EstimatorConfig cfg;
  cfg.iterations = static_cast<std::size_t>(state.range(0));
  cfg.cache_enabled = state.range(1) != 0;
  cfg.max_concurrency = 1;
  std::size_t evaluations = 0;
  for (auto _ : state) {
    const auto res = monte_carlo_shapley(reward, layout, cfg);
    evaluations = res.evaluations;
    benchmark::DoNotOptimize(res);
  }
  state.counters["evaluations"] = static_cast<double>(evaluations);
}
BENCHMARK(BM_MonteCarlo)
    ->ArgsProduct({{100, 1000, 5000}, {0, 1}})
    ->ArgNames({"iterations", "cache"})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
