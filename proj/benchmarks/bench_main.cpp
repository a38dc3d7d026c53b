#include "reasonq/corpus.hpp"
#include "reasonq/extraction.hpp"
#include "reasonq/metrics.hpp"
#include "reasonq/rng.hpp"
#include "reasonq/stats.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <string>
#include <vector>

using namespace reasonq;

namespace {

const char* kTrace =
    "Step 1: Tom starts with 1,250 apples. Step 2: He sells 300 of them, which is not half. "
    "Step 3: 1250 - 300 = 950. So the answer is 950.";

std::vector<InstanceOutcome> outcomes(std::size_t n) {
  std::vector<InstanceOutcome> out;
  SplitMix64 rng(7);
  for (std::size_t i = 0; i < n; ++i) {
    InstanceOutcome o;
    o.instance_id = "i" + std::to_string(i);
    o.correct = rng.below(4) != 0;
    for (int r = 0; r < 3; ++r) {
      std::string text = std::string(kTrace) + " (" + std::to_string(rng.below(3)) + ")";
      o.per_run_answers.push_back(extract_answer(text, TaskKind::Numeric));
      o.per_run_traces.push_back(text);
      o.per_run_tokens.push_back(static_cast<std::int64_t>(20 + rng.below(300)));
    }
    o.perturbed_correct = std::vector<bool>{rng.below(2) == 0, true, rng.below(3) == 0};
    out.push_back(std::move(o));
  }
  return out;
}

void BM_ExtractNumeric(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(extract_answer(kTrace, TaskKind::Numeric));
}
BENCHMARK(BM_ExtractNumeric);

void BM_Normalize(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(normalize(kTrace));
}
BENCHMARK(BM_Normalize);

void BM_SegmentTrace(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(segment_trace(kTrace));
}
BENCHMARK(BM_SegmentTrace);

void BM_Profile(benchmark::State& state) {
  auto data = outcomes(static_cast<std::size_t>(state.range(0)));
  BaselineScorer scorer;
  for (auto _ : state) benchmark::DoNotOptimize(profile(data, scorer, 256));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Profile)->Arg(100)->Arg(1000);

void BM_Bootstrap(benchmark::State& state) {
  std::vector<std::pair<double, double>> pairs;
  SplitMix64 rng(3);
  for (int i = 0; i < 28; ++i) {
    double x = static_cast<double>(rng.below(1000)) / 1000.0;
    pairs.emplace_back(x, 0.6 * x + static_cast<double>(rng.below(400)) / 1000.0);
  }
  BootstrapConfig cfg{static_cast<std::size_t>(state.range(0)), 42, 0.95, static_cast<unsigned>(state.range(1))};
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_ci(pairs, cfg));
}
BENCHMARK(BM_Bootstrap)->Args({10000, 1})->Args({10000, 4})->Unit(benchmark::kMillisecond);

void BM_SyntheticCorpus(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(generate_synthetic({}));
}
BENCHMARK(BM_SyntheticCorpus)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
