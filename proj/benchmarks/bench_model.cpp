#include <benchmark/benchmark.h>

#include <numeric>

#include "dsm/dataset.hpp"
#include "dsm/ops.hpp"
#include "dsm/rng.hpp"
#include "dsm/stereo_model.hpp"

namespace {

using namespace dsm;

void BM_Conv3x3(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Pcg32 rng(4);
  Tensor4 x(4, c, 64, 96);
  for (Real& v : x.data()) v = rng.uniform(-1, 1);
  Param w("w", {c, c, 3, 3});
  for (Real& v : w.value) v = rng.uniform(-0.1, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(x, w, nullptr, {1, 1}));
}
BENCHMARK(BM_Conv3x3)->Arg(3)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Conv3x3Backward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Pcg32 rng(5);
  Tensor4 x(4, c, 64, 96), up(4, c, 64, 96);
  for (Real& v : x.data()) v = rng.uniform(-1, 1);
  for (Real& v : up.data()) v = rng.uniform(-1, 1);
  Param w("w", {c, c, 3, 3});
  for (Real& v : w.value) v = rng.uniform(-0.1, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_backward(up, x, w, nullptr, {1, 1}));
}
BENCHMARK(BM_Conv3x3Backward)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig mc;
  mc.nlf_feature_layers = static_cast<std::size_t>(state.range(0));
  mc.nlf_cost_layers = mc.nlf_feature_layers ? 1 : 0;
  StereoModel model(mc);
  DatasetSpec spec;
  spec.count = 2;
  const auto data = generate_rds(spec);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  const StereoBatch batch = make_batch(data, idx);
  for (auto _ : state) benchmark::DoNotOptimize(model.train_step(batch, {}));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_Inference(benchmark::State& state) {
  StereoModel model{ModelConfig{}};
  DatasetSpec spec;
  spec.count = 1;
  const Sample s = generate_rds_sample(spec, 0);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(s.left, s.right));
}
BENCHMARK(BM_Inference)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
