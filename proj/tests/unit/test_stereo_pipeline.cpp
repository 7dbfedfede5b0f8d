#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "dsm/checkpoint.hpp"
#include "dsm/dataset.hpp"
#include "dsm/grad_check.hpp"
#include "dsm/ops.hpp"
#include "dsm/stereo_model.hpp"
#include "dsm/training.hpp"
#include "support.hpp"

namespace dsm {
namespace {

using test::dot;
using test::max_abs_diff;
using test::random_tensor;

ModelConfig small_config() {
  ModelConfig mc;
  mc.feature_channels = 4;
  mc.feature_blocks = 2;
  mc.aggregation_channels = 3;
  mc.max_disparity = 6;
  mc.nlf_feature_layers = 1;
  mc.nlf_cost_layers = 1;
  return mc;
}

TEST(CostVolume, MatchesTripleLoop) {
  Pcg32 rng(1);
  const Tensor4 fl = random_tensor({2, 3, 2, 6}, rng), fr = random_tensor({2, 3, 2, 6}, rng);
  const CostVolume cv = build_cost_volume(fl, fr, 4);
  ASSERT_EQ(cv.volume.shape(), (Shape5{2, 6, 4, 2, 6}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t d = 0; d < 4; ++d)
      for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 6; ++x) {
          EXPECT_EQ(cv.mask[(d * 2 + y) * 6 + x], x >= d ? 1 : 0);
          for (std::size_t c = 0; c < 3; ++c) {
            EXPECT_EQ(cv.volume(n, c, d, y, x), fl(n, c, y, x));
            EXPECT_EQ(cv.volume(n, 3 + c, d, y, x), x >= d ? fr(n, c, y, x - d) : 0.0);
          }
        }
}

TEST(CostVolume, RejectsTooManyDisparities) {
  EXPECT_THROW(build_cost_volume(Tensor4(1, 2, 3, 4), Tensor4(1, 2, 3, 4), 5), std::invalid_argument);
  EXPECT_THROW(build_cost_volume(Tensor4(1, 2, 3, 4), Tensor4(1, 2, 3, 5), 2), std::invalid_argument);
}

TEST(RegressDisparity, UniformCost) {
  const Tensor4 d = regress_disparity(Tensor5(1, 1, 7, 2, 3, 0.4));
  for (Real v : d.data()) EXPECT_NEAR(v, 3.0, 1e-12);
}

TEST(RegressDisparity, OneHotLimit) {
  Tensor5 cost(1, 1, 6, 1, 1);
  cost(0, 0, 4, 0, 0) = -20;
  EXPECT_NEAR(regress_disparity(cost).data()[0], 4.0, 1e-3);
}

TEST(RegressDisparity, MatchesDirectSoftArgmin) {
  Pcg32 rng(2);
  const Tensor5 cost = test::random_tensor5({2, 1, 5, 3, 4}, rng, -3, 3);
  const Tensor4 d = regress_disparity(cost);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        Real z = 0, s = 0;
        for (std::size_t k = 0; k < 5; ++k) {
          const Real e = std::exp(-cost(n, 0, k, y, x));
          z += e;
          s += static_cast<Real>(k) * e;
        }
        EXPECT_NEAR(d(n, 0, y, x), s / z, 1e-12);
      }
}

TEST(Upsample, ScalesValuesAndRepeatsPixels) {
  Tensor4 d(1, 1, 1, 2);
  d.storage() = {1.5, 2};
  const Tensor4 u = upsample_disparity(d, 2);
  EXPECT_EQ(u.storage(), (std::vector<Real>{3, 3, 4, 4, 3, 3, 4, 4}));
}

TEST(ExtractFeatures, IdenticalViewsGiveIdenticalFeatures) {
  StereoModel m(small_config());
  Pcg32 rng(3);
  const Tensor4 img = random_tensor({1, 3, 8, 12}, rng, 0, 1);
  Tensor4 both(2, 3, 8, 12);
  std::copy(img.data().begin(), img.data().end(), both.data().begin());
  std::copy(img.data().begin(), img.data().end(), both.data().begin() + static_cast<long>(img.size()));
  const Tensor4 f = m.extract_features(both);
  const std::size_t half = f.size() / 2;
  EXPECT_TRUE(std::equal(f.data().begin(), f.data().begin() + static_cast<long>(half),
                         f.data().begin() + static_cast<long>(half)));
  EXPECT_EQ(m.extract_features(img).storage(), std::vector<Real>(f.data().begin(), f.data().begin() + static_cast<long>(half)));
}

TEST(ExtractFeatures, GainInvariantAfterFirstDnSite) {
  ModelConfig mc = small_config();
  mc.image_channels = 1;
  StereoModel m(mc);
  Pcg32 rng(4);
  const Tensor4 img = random_tensor({1, 1, 10, 12}, rng, 0, 1);
  Tensor4 scaled = img;
  for (Real& v : scaled.data()) v *= 1.7;
  ForwardState a, b;
  m.extract_features(img, a, {false, false});
  m.extract_features(scaled, b, {false, false});
  EXPECT_LT(max_abs_diff(a.norm_saved[0].x_prime.data(), b.norm_saved[0].x_prime.data()), 1e-4);
}

TEST(ExtractFeatures, FilterFreeStackIsConvNormRelu) {
  ModelConfig mc = small_config();
  mc.nlf_feature_layers = 0;
  StereoModel m(mc);
  Pcg32 rng(5);
  const Tensor4 img = random_tensor({1, 3, 6, 8}, rng, 0, 1);
  std::vector<Param*> ps = m.parameters();
  Tensor4 x = img;
  std::size_t conv = 0;
  const auto norms = m.norm_layers();
  for (std::size_t blk = 0; blk < mc.feature_blocks; ++blk) {
    x = conv2d_forward(x, *ps[conv++], nullptr, {1, 1});
    x = dn_forward(x, norms[blk]->params(), NormMode::Domain).first;
    x = relu(x);
  }
  Param* fw = nullptr;
  Param* fb = nullptr;
  for (Param* p : ps) {
    if (p->name == "features.final.weight") fw = p;
    if (p->name == "features.final.bias") fb = p;
  }
  ASSERT_TRUE(fw && fb);
  x = conv2d_forward(x, *fw, fb, {1, 1});
  EXPECT_LT(max_abs_diff(m.extract_features(img).data(), x.data()), 1e-12);
}

TEST(AggregateCost, DisparityConstantVolumeGivesEqualSlices) {
  ModelConfig mc = small_config();
  mc.aggregation_kernel = 1;
  StereoModel m(mc);
  Pcg32 rng(6);
  const Tensor4 guide = random_tensor({1, 4, 5, 7}, rng);
  const Tensor4 slice = random_tensor({1, 8, 5, 7}, rng);
  CostVolume cv{Tensor5(1, 8, 3, 5, 7), {}};
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t d = 0; d < 3; ++d)
      std::copy(slice.plane(0, c).begin(), slice.plane(0, c).end(), cv.volume.plane(0, c, d).begin());
  const Tensor5 cost = m.aggregate_cost(cv, guide);
  ASSERT_EQ(cost.shape(), (Shape5{1, 1, 3, 5, 7}));
  for (std::size_t d = 1; d < 3; ++d) EXPECT_LT(max_abs_diff(cost.plane(0, 0, d), cost.plane(0, 0, 0)), 1e-12);
}

TEST(AggregateCost, WithoutFiltersIsSliceWiseConvolution) {
  ModelConfig mc = small_config();
  mc.nlf_cost_layers = 0;
  mc.aggregation_kernel = 3;
  StereoModel m(mc);
  Pcg32 rng(7);
  const Tensor4 guide = random_tensor({1, 4, 5, 7}, rng);
  const CostVolume cv{test::random_tensor5({1, 8, 3, 5, 7}, rng), {}};
  const Tensor5 cost = m.aggregate_cost(cv, guide);
  std::map<std::string, Param*> by_name;
  for (Param* p : m.parameters()) by_name[p->name] = p;
  for (std::size_t d = 0; d < 3; ++d) {
    Tensor4 slice(1, 8, 5, 7);
    for (std::size_t c = 0; c < 8; ++c)
      std::copy(cv.volume.plane(0, c, d).begin(), cv.volume.plane(0, c, d).end(), slice.plane(0, c).begin());
    Tensor4 h = relu(conv2d_forward(slice, *by_name.at("aggregation.conv0.weight"),
                                    by_name.at("aggregation.conv0.bias"), {1, 1}));
    const Tensor4 out = conv2d_forward(h, *by_name.at("aggregation.conv1.weight"),
                                       by_name.at("aggregation.conv1.bias"), {1, 1});
    EXPECT_LT(max_abs_diff(out.data(), cost.plane(0, 0, d)), 1e-12);
  }
}

TEST(Forward, PointwisePathEqualsCostVolumePath) {
  ModelConfig mc = small_config();
  mc.aggregation_kernel = 1;
  StereoModel m(mc);
  Pcg32 rng(8);
  const Tensor4 l = random_tensor({2, 3, 6, 10}, rng, 0, 1), r = random_tensor({2, 3, 6, 10}, rng, 0, 1);
  const Tensor4 fast = m.forward(l, r);
  const Tensor4 fl = m.extract_features(l), fr = m.extract_features(r);
  const Tensor4 ref = regress_disparity(m.aggregate_cost(build_cost_volume(fl, fr, mc.max_disparity), fl));
  EXPECT_LT(max_abs_diff(fast.data(), ref.data()), 1e-12);
}

TEST(Forward, RangeAndDeterminism) {
  for (std::size_t ka : {1, 3}) {
    ModelConfig mc = small_config();
    mc.aggregation_kernel = ka;
    StereoModel m(mc);
    Pcg32 rng(9);
    const Tensor4 l = random_tensor({1, 3, 6, 10}, rng, 0, 1), r = random_tensor({1, 3, 6, 10}, rng, 0, 1);
    const Tensor4 a = m.forward(l, r), b = m.forward(l, r);
    EXPECT_EQ(a.storage(), b.storage());
    for (Real v : a.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, static_cast<Real>(mc.max_disparity - 1));
    }
  }
}

TEST(Forward, DownsampledOutputHasInputResolution) {
  ModelConfig mc = small_config();
  mc.downsample = 2;
  mc.max_disparity = 4;
  StereoModel m(mc);
  Pcg32 rng(10);
  const Tensor4 l = random_tensor({1, 3, 8, 12}, rng, 0, 1);
  const Tensor4 d = m.forward(l, l);
  EXPECT_EQ(d.shape(), (Shape4{1, 1, 8, 12}));
  for (Real v : d.data()) EXPECT_LE(v, 2.0 * 3);
  EXPECT_THROW(m.forward(random_tensor({1, 3, 7, 12}, rng), random_tensor({1, 3, 7, 12}, rng)), ShapeError);
}

class EndToEnd : public ::testing::TestWithParam<std::size_t> {};

TEST_P(EndToEnd, GradientMatchesFiniteDifferences) {
  ModelConfig mc = small_config();
  mc.aggregation_kernel = GetParam();
  mc.max_disparity = 8;
  Real worst = 0;
  std::size_t used = 0;
  for (std::uint64_t seed = 0; used < 3 && seed < 30; ++seed) {
    mc.init_seed = 50 + seed;
    StereoModel m(mc);
    Pcg32 rng(500 + seed);
    const Tensor4 l = random_tensor({2, 3, 16, 24}, rng, 0, 1), r = random_tensor({2, 3, 16, 24}, rng, 0, 1);
    const Tensor4 up = random_tensor({2, 1, 16, 24}, rng);
    ForwardState st;
    m.forward(l, r, st, {true, false});
    bool near = false;
    for (const auto* saved : {&st.filter_saved, &st.cost_filter_saved})
      for (const FilterSaved& fs : *saved)
        for (const GuideWeights& gw : fs.weights)
          for (const EdgeField* raw : {&gw.raw1, &gw.raw2})
            for (Real v : raw->data()) near = near || (v != 0 && std::abs(v - kWeightFloor) < 1e-4);
    if (near) continue;
    ++used;
    m.zero_grad();
    m.backward(up, st);
    std::vector<GradTarget> targets;
    for (Param* p : m.parameters())
      if (p->name != "aggregation.conv1.bias") targets.push_back({p->name, p->value, p->grad});
    auto f = [&] {
      ForwardState s;
      const Tensor4 d = m.forward(l, r, s, {true, false});
      return Evaluation{dot(d.data(), up.data()), s.branch_signature()};
    };
    worst = std::max(worst, grad_check(std::function<Evaluation()>(f), targets,
                                       {.step = 1e-4, .max_coords_per_target = 3, .seed = seed})
                                .max_rel_error);
  }
  EXPECT_EQ(used, 3u);
  EXPECT_LT(worst, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AggregationKernels, EndToEnd, ::testing::Values(1, 3));

StereoBatch toy_batch(std::size_t n, std::uint64_t seed) {
  DatasetSpec ds;
  ds.count = n;
  ds.height = 16;
  ds.width = 24;
  ds.max_disparity = 5;
  ds.seed = seed;
  const auto data = generate_rds(ds);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return make_batch(data, idx);
}

TEST(TrainStep, DeterministicAndZeroLearningRateIsNoOp) {
  ModelConfig mc = small_config();
  const StereoBatch b = toy_batch(2, 1);
  StereoModel m1(mc), m2(mc);
  EXPECT_EQ(m1.train_step(b, {}), m2.train_step(b, {}));
  for (std::size_t i = 0; i < m1.parameters().size(); ++i)
    EXPECT_EQ(m1.parameters()[i]->value, m2.parameters()[i]->value);

  StereoModel m3(mc);
  std::vector<std::vector<Real>> before;
  for (const Param* p : m3.parameters()) before.push_back(p->value);
  m3.train_step(b, {.learning_rate = 0});
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(m3.parameters()[i]->value, before[i]);
}

TEST(TrainStep, RejectsAllInvalidBatch) {
  StereoModel m(small_config());
  StereoBatch b = toy_batch(1, 2);
  std::fill(b.mask.begin(), b.mask.end(), 0);
  EXPECT_THROW(m.train_step(b, {}), std::invalid_argument);
}

TEST(TrainStep, LossHalvesWithinTwoHundredSteps) {
  DatasetSpec ds;
  ds.count = 8;
  ds.height = 16;
  ds.width = 24;
  ds.max_disparity = 5;
  const auto data = generate_rds(ds);
  std::vector<Real> ratios;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ModelConfig mc = small_config();
    mc.init_seed = seed;
    StereoModel m(mc);
    const auto losses = train_model(m, data, {.steps = 200, .batch_size = 2, .seed = seed});
    // Average a few steps at each end; single mini-batch losses are noisy.
    Real early = 0, late = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      early += losses[4 + i];
      late += losses[196 + i];
    }
    ratios.push_back(late / early);
  }
  std::nth_element(ratios.begin(), ratios.begin() + 2, ratios.end());
  EXPECT_LE(ratios[2], 0.5);
}

TEST(Ablation, LatticeConstructsAndTrainsOneStep) {
  const StereoBatch b = toy_batch(2, 3);
  for (NormMode mode : {NormMode::Batch, NormMode::Instance, NormMode::Domain})
    for (auto [f, c] : {std::pair<std::size_t, std::size_t>{0, 0}, {1, 1}, {2, 2}}) {
      ModelConfig mc = small_config();
      mc.norm_mode = mode;
      mc.nlf_feature_layers = f;
      mc.nlf_cost_layers = c;
      StereoModel m(mc);
      const Real loss = m.train_step(b, {});
      EXPECT_TRUE(std::isfinite(loss));
      EXPECT_EQ(m.forward(b.left, b.right).shape(), b.gt.shape());
    }
}

TEST(Checkpoint, RoundTripsParametersAndRunningStats) {
  ModelConfig mc = small_config();
  mc.norm_mode = NormMode::Batch;
  StereoModel m(mc);
  const StereoBatch b = toy_batch(2, 4);
  m.train_step(b, {});
  std::stringstream ss;
  write_checkpoint(ss, m);
  StereoModel back = read_checkpoint(ss);
  EXPECT_EQ(back.config().to_pairs(), m.config().to_pairs());
  EXPECT_EQ(back.forward(b.left, b.right).storage(), m.forward(b.left, b.right).storage());
  std::stringstream bad("DSMK2 junk");
  EXPECT_THROW(read_checkpoint(bad), std::runtime_error);
}

}  // namespace
}  // namespace dsm
