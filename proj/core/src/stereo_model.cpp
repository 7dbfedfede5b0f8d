#include "dsm/stereo_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dsm/config.hpp"
#include "dsm/ops.hpp"
#include "dsm/rng.hpp"

namespace dsm {

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("model config: ") + what);
  };
  require(image_channels == 1 || image_channels == 3, "image_channels must be 1 or 3");
  require(feature_channels >= 1 && feature_channels <= 1024, "feature_channels must be in [1, 1024]");
  require(feature_blocks >= 1 && feature_blocks <= 64, "feature_blocks must be in [1, 64]");
  require(aggregation_channels >= 1 && aggregation_channels <= 1024, "aggregation_channels must be in [1, 1024]");
  require(aggregation_kernel % 2 == 1 && aggregation_kernel <= 15, "aggregation_kernel must be odd and <= 15");
  require(max_disparity >= 1 && max_disparity <= 1024, "max_disparity must be in [1, 1024]");
  require(nlf_feature_layers <= 64 && nlf_cost_layers <= 64, "filter layer counts must be <= 64");
  require(downsample == 1 || downsample == 2, "downsample must be 1 or 2");
  require(eps > 0, "eps must be positive");
  require(momentum > 0 && momentum <= 1, "momentum must be in (0, 1]");
}

bool ModelConfig::set(const std::string& key, const std::string& value) {
  if (key == "norm_mode") norm_mode = parse_norm_mode(value);
  else if (key == "nlf_feature_layers") nlf_feature_layers = parse_size(key, value);
  else if (key == "nlf_cost_layers") nlf_cost_layers = parse_size(key, value);
  else if (key == "image_channels") image_channels = parse_size(key, value);
  else if (key == "feature_channels") feature_channels = parse_size(key, value);
  else if (key == "feature_blocks") feature_blocks = parse_size(key, value);
  else if (key == "aggregation_channels") aggregation_channels = parse_size(key, value);
  else if (key == "aggregation_kernel") aggregation_kernel = parse_size(key, value);
  else if (key == "max_disparity") max_disparity = parse_size(key, value);
  else if (key == "downsample") downsample = parse_size(key, value);
  else if (key == "eps") eps = parse_real(key, value);
  else if (key == "momentum") momentum = parse_real(key, value);
  else if (key == "init_seed") init_seed = parse_u64(key, value);
  else return false;
  return true;
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_pairs() const {
  return {
      {"norm_mode", to_string(norm_mode)},
      {"nlf_feature_layers", std::to_string(nlf_feature_layers)},
      {"nlf_cost_layers", std::to_string(nlf_cost_layers)},
      {"image_channels", std::to_string(image_channels)},
      {"feature_channels", std::to_string(feature_channels)},
      {"feature_blocks", std::to_string(feature_blocks)},
      {"aggregation_channels", std::to_string(aggregation_channels)},
      {"aggregation_kernel", std::to_string(aggregation_kernel)},
      {"max_disparity", std::to_string(max_disparity)},
      {"downsample", std::to_string(downsample)},
      {"eps", format_real(eps)},
      {"momentum", format_real(momentum)},
      {"init_seed", std::to_string(init_seed)},
  };
}

namespace {

constexpr ConvGeometry kSame3x3{1, 1};

Tensor4 concat_batch(const Tensor4& a, const Tensor4& b) {
  if (a.c() != b.c() || a.h() != b.h() || a.w() != b.w())
    throw ShapeError("left " + to_string(a.shape()) + " and right " + to_string(b.shape()) +
                     " images differ");
  Tensor4 out(a.n() + b.n(), a.c(), a.h(), a.w());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

Tensor4 batch_range(const Tensor4& t, std::size_t first, std::size_t count) {
  Tensor4 out(count, t.c(), t.h(), t.w());
  const std::size_t stride = t.c() * t.h() * t.w();
  std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(first * stride), count * stride,
              out.data().begin());
  return out;
}

void add_into(Tensor4& dst, const Tensor4& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// The left and right halves of a 1x1 kernel over [left; right] channels.
std::pair<Param, Param> split_pointwise(const Param& w, std::size_t f) {
  const std::size_t a = w.extents[0];
  std::pair<Param, Param> halves{Param("left", {a, f, 1, 1}), Param("right", {a, f, 1, 1})};
  for (std::size_t o = 0; o < a; ++o)
    for (std::size_t c = 0; c < f; ++c) {
      halves.first.value[o * f + c] = w.value[o * 2 * f + c];
      halves.second.value[o * f + c] = w.value[o * 2 * f + f + c];
    }
  return halves;
}

void init_uniform(Param& p, std::size_t fan_in, Pcg32& rng) {
  const Real bound = std::sqrt(6.0 / static_cast<Real>(fan_in));
  for (Real& v : p.value) v = rng.uniform(-bound, bound);
}

}  // namespace

StereoModel::StereoModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t F = config_.feature_channels;
  const std::size_t B = config_.feature_blocks;
  const std::size_t sites = std::max<std::size_t>(B - 1, 1);

  std::size_t norm_count = 0;
  for (std::size_t i = 0; i < B; ++i) {
    const std::size_t in_c = i == 0 ? config_.image_channels : F;
    conv_weights_.emplace_back("features.conv" + std::to_string(i) + ".weight",
                               std::vector<std::size_t>{F, in_c, 3, 3});
    stages_.push_back({StageKind::Conv, i});
    norms_.emplace_back("features.norm" + std::to_string(norm_count), config_.norm_mode, F,
                        config_.eps, config_.momentum);
    stages_.push_back({StageKind::Norm, norm_count++});
    stages_.push_back({StageKind::Relu, 0});
    for (std::size_t j = 0; j < config_.nlf_feature_layers; ++j) {
      if (j % sites != i) continue;
      stages_.push_back({StageKind::Filter, j});
      norms_.emplace_back("features.norm" + std::to_string(norm_count), config_.norm_mode, F,
                          config_.eps, config_.momentum);
      stages_.push_back({StageKind::Norm, norm_count++});
      stages_.push_back({StageKind::Relu, 0});
    }
  }
  final_weight_ = Param("features.final.weight", {F, F, 3, 3});
  final_bias_ = Param("features.final.bias", {F});
  stages_.push_back({StageKind::FinalConv, 0});

  const std::size_t A = config_.aggregation_channels;
  const std::size_t ka = config_.aggregation_kernel;
  agg_weight0_ = Param("aggregation.conv0.weight", {A, 2 * F, ka, ka});
  agg_bias0_ = Param("aggregation.conv0.bias", {A});
  agg_weight1_ = Param("aggregation.conv1.weight", {1, A, 3, 3});
  agg_bias1_ = Param("aggregation.conv1.bias", {1});
  init_parameters();
}

void StereoModel::init_parameters() {
  std::uint64_t salt = 0;
  auto init = [&](Param& p) {
    Pcg32 rng(derive_seed(config_.init_seed, salt), salt);
    ++salt;
    init_uniform(p, p.extents[1] * p.extents[2] * p.extents[3], rng);
  };
  for (Param& w : conv_weights_) init(w);
  init(final_weight_);
  init(agg_weight0_);
  init(agg_weight1_);
}

std::vector<Param*> StereoModel::parameters() {
  std::vector<Param*> out;
  for (Param& w : conv_weights_) out.push_back(&w);
  for (NormLayer& n : norms_) {
    out.push_back(&n.params().gamma);
    out.push_back(&n.params().beta);
  }
  for (Param* p : {&final_weight_, &final_bias_, &agg_weight0_, &agg_bias0_, &agg_weight1_,
                   &agg_bias1_})
    out.push_back(p);
  return out;
}

std::vector<const Param*> StereoModel::parameters() const {
  auto mut = const_cast<StereoModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::vector<NormLayer*> StereoModel::norm_layers() {
  std::vector<NormLayer*> out;
  for (NormLayer& n : norms_) out.push_back(&n);
  return out;
}

std::vector<const NormLayer*> StereoModel::norm_layers() const {
  std::vector<const NormLayer*> out;
  for (const NormLayer& n : norms_) out.push_back(&n);
  return out;
}

void StereoModel::zero_grad() {
  for (Param* p : parameters()) p->zero_grad();
}

Tensor4 StereoModel::extract_features(const Tensor4& images, ForwardState& state,
                                      const ForwardOptions& options) {
  if (images.c() != config_.image_channels)
    throw ShapeError("extract_features: images " + to_string(images.shape()) + " but model expects " +
                     std::to_string(config_.image_channels) + " channels");
  if (config_.downsample > 1 &&
      (images.h() % config_.downsample != 0 || images.w() % config_.downsample != 0))
    throw ShapeError("extract_features: image " + to_string(images.shape()) +
                     " is not divisible by the downsample factor");
  state.training = options.training;
  state.stage_inputs.clear();
  state.relu_stages.clear();
  state.norm_saved.assign(norms_.size(), {});
  state.filter_saved.assign(config_.nlf_feature_layers, {});
  Tensor4 x = images;
  for (const Stage& s : stages_) {
    state.stage_inputs.push_back(x);
    switch (s.kind) {
      case StageKind::Conv: {
        const ConvGeometry g{s.index == 0 ? config_.downsample : 1, 1};
        x = conv2d_forward(x, conv_weights_[s.index], nullptr, g);
        break;
      }
      case StageKind::Norm: {
        auto [y, saved] = norms_[s.index].forward(x, options.training, options.update_running_stats);
        state.norm_saved[s.index] = std::move(saved);
        x = std::move(y);
        break;
      }
      case StageKind::Relu:
        state.relu_stages.push_back(state.stage_inputs.size() - 1);
        x = relu(x);
        break;
      case StageKind::Filter: {
        Tensor4 guide = x;
        x = nlf_forward(x, guide, 1, state.filter_saved[s.index]);
        break;
      }
      case StageKind::FinalConv:
        x = conv2d_forward(x, final_weight_, &final_bias_, kSame3x3);
        break;
    }
  }
  state.features = x;
  return x;
}

Tensor4 StereoModel::extract_features(const Tensor4& images) {
  ForwardState state;
  return extract_features(images, state, {false, false});
}

CostVolume build_cost_volume(const Tensor4& f_left, const Tensor4& f_right, std::size_t D) {
  require_same_shape(f_left, f_right, "build_cost_volume");
  if (D == 0 || D > f_left.w())
    throw std::invalid_argument("build_cost_volume: " + std::to_string(D) +
                                " disparities do not fit a feature width of " +
                                std::to_string(f_left.w()));
  const std::size_t N = f_left.n(), C = f_left.c(), H = f_left.h(), W = f_left.w();
  CostVolume cv{Tensor5(N, 2 * C, D, H, W), std::vector<std::uint8_t>(D * H * W, 0)};
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = d; x < W; ++x) cv.mask[(d * H + y) * W + x] = 1;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t y = 0; y < H; ++y) {
          const Real* l = &f_left.data()[f_left.index(n, c, y, 0)];
          const Real* r = &f_right.data()[f_right.index(n, c, y, 0)];
          Real* lo = &cv.volume.data()[cv.volume.index(n, c, d, y, 0)];
          Real* ro = &cv.volume.data()[cv.volume.index(n, C + c, d, y, 0)];
          std::copy(l, l + W, lo);
          for (std::size_t x = d; x < W; ++x) ro[x] = r[x - d];
        }
  return cv;
}

Tensor5 StereoModel::aggregate_cost(const CostVolume& cv, const Tensor4& guide, ForwardState& state) {
  const std::size_t D = cv.volume.d();
  if (guide.n() != cv.volume.n() || guide.h() != cv.volume.h() || guide.w() != cv.volume.w())
    throw ShapeError("aggregate_cost: guide " + to_string(guide.shape()) + " vs cost volume " +
                     to_string(cv.volume.shape()));
  const std::size_t ka = config_.aggregation_kernel;
  state.agg_input = slices_as_batch(cv.volume);
  state.agg_hidden = conv2d_forward(state.agg_input, agg_weight0_, &agg_bias0_, {1, ka / 2});
  return finish_aggregation(guide, D, state);
}

Tensor4 StereoModel::pointwise_hidden(const Tensor4& f_left, const Tensor4& f_right, std::size_t D) const {
  if (D == 0 || D > f_left.w())
    throw std::invalid_argument("build_cost_volume: " + std::to_string(D) +
                                " disparities do not fit a feature width of " +
                                std::to_string(f_left.w()));
  // A 1x1 convolution of [left(x); right(x - d)] is left_part(x) + right_part(x - d).
  auto [wl, wr] = split_pointwise(agg_weight0_, config_.feature_channels);
  const Tensor4 pl = conv2d_forward(f_left, wl, &agg_bias0_, {1, 0});
  const Tensor4 pr = conv2d_forward(f_right, wr, nullptr, {1, 0});
  const std::size_t N = f_left.n(), A = pl.c(), H = pl.h(), W = pl.w();
  Tensor4 hidden(N * D, A, H, W);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t y = 0; y < H; ++y) {
          const Real* l = &pl.data()[pl.index(n, a, y, 0)];
          const Real* r = &pr.data()[pr.index(n, a, y, 0)];
          Real* o = &hidden.data()[hidden.index(n * D + d, a, y, 0)];
          std::copy(l, l + W, o);
          for (std::size_t x = d; x < W; ++x) o[x] += r[x - d];
        }
  return hidden;
}

Tensor5 StereoModel::finish_aggregation(const Tensor4& guide, std::size_t D, ForwardState& state) {
  Tensor4 x = relu(state.agg_hidden);
  state.cost_filter_saved.assign(config_.nlf_cost_layers, {});
  for (auto& saved : state.cost_filter_saved) x = nlf_forward(x, guide, D, saved);
  state.agg_filtered = std::move(x);
  state.cost = batch_as_slices(conv2d_forward(state.agg_filtered, agg_weight1_, &agg_bias1_, kSame3x3), D);
  return state.cost;
}

Tensor5 StereoModel::aggregate_cost(const CostVolume& cv, const Tensor4& guide) {
  ForwardState state;
  return aggregate_cost(cv, guide, state);
}

Tensor4 regress_disparity(const Tensor5& cost) {
  if (cost.c() != 1) throw ShapeError("regress_disparity: cost " + to_string(cost.shape()) + " must have c = 1");
  Tensor5 neg(cost.shape());
  for (std::size_t i = 0; i < cost.size(); ++i) neg.data()[i] = -cost.data()[i];
  const Tensor5 p = softmax_axis(neg);
  Tensor4 out(cost.n(), 1, cost.h(), cost.w());
  for (std::size_t n = 0; n < cost.n(); ++n)
    for (std::size_t d = 0; d < cost.d(); ++d) {
      auto plane = p.plane(n, 0, d);
      auto o = out.plane(n, 0);
      for (std::size_t i = 0; i < plane.size(); ++i) o[i] += static_cast<Real>(d) * plane[i];
    }
  return out;
}

Tensor4 upsample_disparity(const Tensor4& disparity, std::size_t factor) {
  if (factor == 1) return disparity;
  Tensor4 out(disparity.n(), disparity.c(), disparity.h() * factor, disparity.w() * factor);
  for (std::size_t n = 0; n < out.n(); ++n)
    for (std::size_t c = 0; c < out.c(); ++c)
      for (std::size_t y = 0; y < out.h(); ++y)
        for (std::size_t x = 0; x < out.w(); ++x)
          out(n, c, y, x) = static_cast<Real>(factor) * disparity(n, c, y / factor, x / factor);
  return out;
}

Tensor4 StereoModel::forward(const Tensor4& left, const Tensor4& right, ForwardState& state,
                             const ForwardOptions& options) {
  if (left.shape() != right.shape())
    throw ShapeError("forward: left " + to_string(left.shape()) + " vs right " + to_string(right.shape()));
  const std::size_t N = left.n();
  state.batch = N;
  const Tensor4 features = extract_features(concat_batch(left, right), state, options);
  const Tensor4 f_left = batch_range(features, 0, N);
  const Tensor4 f_right = batch_range(features, N, N);
  if (config_.aggregation_kernel == 1) {
    state.cost_volume = {};
    state.agg_input = Tensor4();
    state.agg_hidden = pointwise_hidden(f_left, f_right, config_.max_disparity);
    finish_aggregation(f_left, config_.max_disparity, state);
  } else {
    state.cost_volume = build_cost_volume(f_left, f_right, config_.max_disparity);
    aggregate_cost(state.cost_volume, f_left, state);
  }

  Tensor5 neg(state.cost.shape());
  for (std::size_t i = 0; i < neg.size(); ++i) neg.data()[i] = -state.cost.data()[i];
  state.probability = softmax_axis(neg);
  state.disparity_lo = Tensor4(N, 1, state.cost.h(), state.cost.w());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t d = 0; d < state.cost.d(); ++d) {
      auto p = state.probability.plane(n, 0, d);
      auto o = state.disparity_lo.plane(n, 0);
      for (std::size_t i = 0; i < p.size(); ++i) o[i] += static_cast<Real>(d) * p[i];
    }
  state.disparity = upsample_disparity(state.disparity_lo, config_.downsample);
  return state.disparity;
}

Tensor4 StereoModel::forward(const Tensor4& left, const Tensor4& right, const ForwardOptions& options) {
  ForwardState state;
  return forward(left, right, state, options);
}

Tensor4 StereoModel::backward(const Tensor4& upstream, const ForwardState& state) {
  require_same_shape(upstream, state.disparity, "StereoModel::backward");
  const std::size_t N = state.batch;
  const std::size_t f = config_.downsample;
  const std::size_t D = state.cost.d();

  // Upsampling and regression.
  Tensor4 g_lo(state.disparity_lo.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t y = 0; y < upstream.h(); ++y)
      for (std::size_t x = 0; x < upstream.w(); ++x)
        g_lo(n, 0, y / f, x / f) += static_cast<Real>(f) * upstream(n, 0, y, x);
  Tensor5 g_p(state.probability.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t d = 0; d < D; ++d) {
      auto gp = g_p.plane(n, 0, d);
      auto g = g_lo.plane(n, 0);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] = static_cast<Real>(d) * g[i];
    }
  Tensor5 g_cost = softmax_axis_backward(g_p, state.probability);
  for (Real& v : g_cost.data()) v = -v;

  // Aggregation.
  const Tensor4 f_left = batch_range(state.features, 0, N);
  Tensor4 guide_grad(f_left.shape());
  Tensor4 g = conv2d_backward(slices_as_batch(g_cost), state.agg_filtered, agg_weight1_, &agg_bias1_, kSame3x3);
  for (std::size_t k = state.cost_filter_saved.size(); k-- > 0;)
    g = nlf_backward(g, state.cost_filter_saved[k], f_left, guide_grad);
  g = relu_backward(g, state.agg_hidden);

  const std::size_t C = config_.feature_channels;
  const std::size_t H = g.h(), W = g.w();
  Tensor4 g_features(state.features.shape());
  if (config_.aggregation_kernel == 1) {
    // Gather the hidden gradient onto the left and right feature positions,
    // then run the two halves of the pointwise convolution backward.
    const std::size_t A = g.c();
    Tensor4 gl(N, A, H, W), gr(N, A, H, W);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t a = 0; a < A; ++a)
          for (std::size_t y = 0; y < H; ++y) {
            const Real* src = &g.data()[g.index(n * D + d, a, y, 0)];
            Real* l = &gl.data()[gl.index(n, a, y, 0)];
            Real* r = &gr.data()[gr.index(n, a, y, 0)];
            for (std::size_t x = 0; x < W; ++x) l[x] += src[x];
            for (std::size_t x = d; x < W; ++x) r[x - d] += src[x];
          }
    auto [wl, wr] = split_pointwise(agg_weight0_, C);
    const Tensor4 g_left = conv2d_backward(gl, f_left, wl, &agg_bias0_, {1, 0});
    const Tensor4 g_right = conv2d_backward(gr, batch_range(state.features, N, N), wr, nullptr, {1, 0});
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t c = 0; c < C; ++c) {
        agg_weight0_.grad[a * 2 * C + c] += wl.grad[a * C + c];
        agg_weight0_.grad[a * 2 * C + C + c] += wr.grad[a * C + c];
      }
    auto dst = g_features.data();
    std::copy(g_left.data().begin(), g_left.data().end(), dst.begin());
    std::copy(g_right.data().begin(), g_right.data().end(),
              dst.begin() + static_cast<std::ptrdiff_t>(g_left.size()));
  } else {
    g = conv2d_backward(g, state.agg_input, agg_weight0_, &agg_bias0_, {1, config_.aggregation_kernel / 2});
    const Tensor5 g_cv = batch_as_slices(g, D);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t d = 0; d < D; ++d)
          for (std::size_t y = 0; y < H; ++y) {
            const Real* gl = &g_cv.data()[g_cv.index(n, c, d, y, 0)];
            const Real* gr = &g_cv.data()[g_cv.index(n, C + c, d, y, 0)];
            Real* ol = &g_features.data()[g_features.index(n, c, y, 0)];
            Real* orr = &g_features.data()[g_features.index(N + n, c, y, 0)];
            for (std::size_t x = 0; x < W; ++x) ol[x] += gl[x];
            for (std::size_t x = d; x < W; ++x) orr[x - d] += gr[x];
          }
  }
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      auto dst = g_features.plane(n, c);
      auto src = guide_grad.plane(n, c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }

  // Feature extractor.
  g = std::move(g_features);
  for (std::size_t k = stages_.size(); k-- > 0;) {
    const Stage& s = stages_[k];
    const Tensor4& input = state.stage_inputs[k];
    switch (s.kind) {
      case StageKind::FinalConv:
        g = conv2d_backward(g, input, final_weight_, &final_bias_, kSame3x3);
        break;
      case StageKind::Relu:
        g = relu_backward(g, input);
        break;
      case StageKind::Norm:
        g = norms_[s.index].backward(g, state.norm_saved[s.index]);
        break;
      case StageKind::Filter: {
        Tensor4 gg(input.shape());
        Tensor4 gi = nlf_backward(g, state.filter_saved[s.index], input, gg);
        add_into(gi, gg);
        g = std::move(gi);
        break;
      }
      case StageKind::Conv: {
        const ConvGeometry geom{s.index == 0 ? config_.downsample : 1, 1};
        g = conv2d_backward(g, input, conv_weights_[s.index], nullptr, geom);
        break;
      }
    }
  }
  return g;
}

std::uint64_t ForwardState::branch_signature() const {
  std::uint64_t sig = 1469598103934665603ull;
  for (std::size_t k : relu_stages) sig = fold_sign_pattern(sig, stage_inputs[k].data());
  sig = fold_sign_pattern(sig, agg_hidden.data());
  for (const FilterSaved& s : filter_saved) sig = fold_clamp_pattern(sig, s);
  for (const FilterSaved& s : cost_filter_saved) sig = fold_clamp_pattern(sig, s);
  return sig;
}

Real StereoModel::train_step(const StereoBatch& batch, const AdamOptions& adam) {
  zero_grad();
  ForwardState state;
  const Tensor4 pred = forward(batch.left, batch.right, state, {true, true});
  const LossResult loss = smooth_l1(pred, batch.gt, batch.mask);
  backward(loss.grad, state);
  for (Param* p : parameters()) adam_step(*p, adam);
  return loss.loss;
}

}  // namespace dsm
