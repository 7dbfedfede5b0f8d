#include <benchmark/benchmark.h>

#include <vector>

#include "dsm/nonlocal_filter.hpp"
#include "dsm/rng.hpp"

namespace {

using namespace dsm;

Tensor4 random_tensor(Shape4 s, Pcg32& rng) {
  Tensor4 t(s);
  for (Real& v : t.data()) v = rng.uniform(0, 1);
  return t;
}

void BM_ForwardScan(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  Pcg32 rng(1);
  const GraphPair gp = build_graphs(side, side);
  const Tensor4 guide = random_tensor({1, 4, side, side}, rng);
  const EdgeWeightField w = normalize_incoming(raw_edge_similarity(guide, 0, gp.g1), gp.g1);
  std::vector<Real> in(side * side), out(in.size());
  for (Real& v : in) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    forward_scan_into(in, out, w, gp.g1);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * side * side));
  state.SetComplexityN(static_cast<std::int64_t>(side * side));
}
BENCHMARK(BM_ForwardScan)->RangeMultiplier(2)->Range(64, 512)->Complexity(benchmark::oN);

void BM_BackwardScan(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  Pcg32 rng(2);
  const GraphPair gp = build_graphs(side, side);
  const Tensor4 guide = random_tensor({1, 4, side, side}, rng);
  const EdgeWeightField w = normalize_incoming(raw_edge_similarity(guide, 0, gp.g1), gp.g1);
  std::vector<Real> in(side * side), up(in.size());
  for (Real& v : in) v = rng.uniform(-1, 1);
  for (Real& v : up) v = rng.uniform(-1, 1);
  const auto out = forward_scan(in, w, gp.g1);
  for (auto _ : state) benchmark::DoNotOptimize(backward_scan(up, w, gp.g1, out, in));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * side * side));
  state.SetComplexityN(static_cast<std::int64_t>(side * side));
}
BENCHMARK(BM_BackwardScan)->RangeMultiplier(2)->Range(64, 512)->Complexity(benchmark::oN);

void BM_FilterCostVolume(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Pcg32 rng(3);
  const Tensor4 guide = random_tensor({1, 16, 64, 96}, rng);
  Tensor5 cost(1, 1, d, 64, 96);
  for (Real& v : cost.data()) v = rng.uniform(-1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(filter_cost_volume(cost, guide));
}
BENCHMARK(BM_FilterCostVolume)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
