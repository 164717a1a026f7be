#include <benchmark/benchmark.h>

#include "maculab/evaluation.hpp"
#include "maculab/rng.hpp"

namespace {

using namespace maculab;

std::vector<ScoredCase> synthetic_cases(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<ScoredCase> cases;
  for (int i = 0; i < n; ++i) {
    ScoredCase c;
    c.patient_id = "P" + std::to_string(i / 2);  // two images per patient
    c.image_id = "i" + std::to_string(i);
    c.truth = rng.bernoulli(0.3) ? 1 : 0;
    c.score = rng.normal(c.truth ? 1.0 : 0.0, 1.0);
    cases.push_back(c);
  }
  cases[0].truth = 1;
  cases[1].truth = 0;
  return cases;
}

void BM_RocAuc(benchmark::State& state) {
  const auto cases = synthetic_cases(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(roc_and_auc(cases).auc);
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(10000);

void BM_BootstrapAuc(benchmark::State& state) {
  const auto cases = synthetic_cases(1000, 2);
  const CaseMetric metric = [](const std::vector<ScoredCase>& cs) -> std::optional<double> {
    long pos = 0, neg = 0;
    for (const auto& c : cs) (c.truth ? pos : neg)++;
    if (pos == 0 || neg == 0) return std::nullopt;
    return roc_and_auc(cs).auc;
  };
  for (auto _ : state)
    benchmark::DoNotOptimize(
        bootstrap_ci(cases, metric, static_cast<int>(state.range(0)), 3).ci_low);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BootstrapAuc)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_PermutationTest(benchmark::State& state) {
  Rng rng(5);
  const int n = 1000;
  std::vector<int> truth(n), a(n), b(n);
  for (int i = 0; i < n; ++i) {
    truth[i] = rng.bernoulli(0.3);
    a[i] = rng.bernoulli(0.85) ? truth[i] : 1 - truth[i];
    b[i] = rng.bernoulli(0.6) ? truth[i] : 1 - truth[i];
  }
  const BinaryMetric accuracy = [](const std::vector<int>& pred,
                                   const std::vector<int>& t) -> std::optional<double> {
    long ok = 0;
    for (size_t i = 0; i < pred.size(); ++i) ok += pred[i] == t[i];
    return static_cast<double>(ok) / static_cast<double>(pred.size());
  };
  for (auto _ : state)
    benchmark::DoNotOptimize(
        permutation_test(a, b, truth, accuracy, static_cast<int>(state.range(0)), 7).p_value);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PermutationTest)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
