#include "dsm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dsm/config.hpp"
#include "dsm/rng.hpp"

namespace dsm {

void DomainShift::validate() const {
  for (Real g : gains)
    if (!(g > 0)) throw std::invalid_argument("domain shift: gains must be positive");
  if (!(gamma > 0)) throw std::invalid_argument("domain shift: gamma must be positive");
  if (!(noise_std >= 0)) throw std::invalid_argument("domain shift: noise std must be >= 0");
  if (!std::isfinite(brightness) || !std::isfinite(contrast))
    throw std::invalid_argument("domain shift: brightness and contrast must be finite");
}

bool DomainShift::is_identity() const {
  return brightness == 0 && contrast == 1 && gamma == 1 && noise_std == 0 && gains[0] == 1 &&
         gains[1] == 1 && gains[2] == 1;
}

bool DomainShift::set(const std::string& key, const std::string& value) {
  if (key == "brightness") brightness = parse_real(key, value);
  else if (key == "contrast") contrast = parse_real(key, value);
  else if (key == "gamma") gamma = parse_real(key, value);
  else if (key == "noise" || key == "noise_std") noise_std = parse_real(key, value);
  else if (key == "gains") {
    const auto g = parse_real_list(key, value);
    if (g.size() == 1) gains = {g[0], g[0], g[0]};
    else if (g.size() == 3) gains = {g[0], g[1], g[2]};
    else throw std::invalid_argument("gains: expected 1 or 3 values");
  } else return false;
  return true;
}

std::vector<std::pair<std::string, std::string>> DomainShift::to_pairs() const {
  return {{"brightness", format_real(brightness)},
          {"contrast", format_real(contrast)},
          {"gamma", format_real(gamma)},
          {"noise", format_real(noise_std)},
          {"gains", format_real(gains[0]) + "," + format_real(gains[1]) + "," + format_real(gains[2])}};
}

void DatasetSpec::validate() const {
  if (count < 1) throw std::invalid_argument("dataset: count must be >= 1");
  if (height < 1 || width < 1) throw std::invalid_argument("dataset: empty image size");
  if (channels != 1 && channels != 3) throw std::invalid_argument("dataset: channels must be 1 or 3");
  if (max_disparity >= width)
    throw std::invalid_argument("dataset: max_disparity " + std::to_string(max_disparity) +
                                " must be smaller than width " + std::to_string(width));
  if (!(shape_density >= 0)) throw std::invalid_argument("dataset: shape_density must be >= 0");
  if (background_disparity && *background_disparity > max_disparity)
    throw std::invalid_argument("dataset: background_disparity exceeds max_disparity");
}

bool DatasetSpec::set(const std::string& key, const std::string& value) {
  if (key == "count") count = parse_size(key, value);
  else if (key == "height") height = parse_size(key, value);
  else if (key == "width") width = parse_size(key, value);
  else if (key == "channels") channels = parse_size(key, value);
  else if (key == "max_disparity") max_disparity = parse_size(key, value);
  else if (key == "shape_density") shape_density = parse_real(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "background_disparity") background_disparity = parse_size(key, value);
  else return false;
  return true;
}

std::vector<std::pair<std::string, std::string>> DatasetSpec::to_pairs() const {
  std::vector<std::pair<std::string, std::string>> out{
      {"count", std::to_string(count)},
      {"height", std::to_string(height)},
      {"width", std::to_string(width)},
      {"channels", std::to_string(channels)},
      {"max_disparity", std::to_string(max_disparity)},
      {"shape_density", format_real(shape_density)},
      {"seed", std::to_string(seed)}};
  if (background_disparity) out.emplace_back("background_disparity", std::to_string(*background_disparity));
  return out;
}

namespace {

Real random_dot(Pcg32& rng) { return static_cast<Real>(rng.bounded(256)) / 255.0; }

std::size_t uniform_between(Pcg32& rng, std::size_t lo, std::size_t hi) {
  return lo + rng.bounded(static_cast<std::uint32_t>(hi - lo + 1));
}

}  // namespace

Sample generate_rds_sample(const DatasetSpec& spec, std::size_t index) {
  spec.validate();
  const std::size_t H = spec.height, W = spec.width, C = spec.channels, Dmax = spec.max_disparity;
  Pcg32 rng(derive_seed(spec.seed, index), 2 * index + 1);

  // Disparity field: background plane, then rectangles painted far to near.
  std::vector<std::size_t> disp(H * W);
  const std::size_t bg = spec.background_disparity ? *spec.background_disparity
                                                   : uniform_between(rng, 0, Dmax / 2);
  std::fill(disp.begin(), disp.end(), bg);
  const auto rects = static_cast<std::size_t>(
      std::lround(spec.shape_density * static_cast<Real>(H * W) / 4096.0));
  struct Rect {
    std::size_t y0, x0, h, w, d;
  };
  std::vector<Rect> shapes;
  for (std::size_t r = 0; r < rects && bg < Dmax; ++r) {
    Rect s;
    s.h = uniform_between(rng, std::min<std::size_t>(4, H), std::max<std::size_t>(H / 2, 1));
    s.w = uniform_between(rng, std::min<std::size_t>(4, W), std::max<std::size_t>(W / 2, 1));
    s.y0 = uniform_between(rng, 0, H - s.h);
    s.x0 = uniform_between(rng, 0, W - s.w);
    s.d = uniform_between(rng, bg + 1, Dmax);
    shapes.push_back(s);
  }
  std::stable_sort(shapes.begin(), shapes.end(), [](const Rect& a, const Rect& b) { return a.d < b.d; });
  for (const Rect& s : shapes)
    for (std::size_t y = s.y0; y < s.y0 + s.h; ++y)
      for (std::size_t x = s.x0; x < s.x0 + s.w; ++x) disp[y * W + x] = s.d;

  Sample out{Tensor4(1, C, H, W), Tensor4(1, C, H, W), Tensor4(1, 1, H, W),
             std::vector<std::uint8_t>(H * W, 0)};
  for (std::size_t c = 0; c < C; ++c)
    for (Real& v : out.left.plane(0, c)) v = random_dot(rng);

  // Forward warp into the right view; larger disparity (nearer) wins.
  std::vector<std::ptrdiff_t> owner(H * W, -1);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t d = disp[y * W + x];
      out.gt(0, 0, y, x) = static_cast<Real>(d);
      if (x < d) continue;
      const std::size_t t = y * W + (x - d);
      if (owner[t] < 0 || disp[static_cast<std::size_t>(owner[t])] < d)
        owner[t] = static_cast<std::ptrdiff_t>(y * W + x);
    }
  for (std::size_t t = 0; t < H * W; ++t) {
    if (owner[t] >= 0) {
      const auto s = static_cast<std::size_t>(owner[t]);
      out.mask[s] = 1;
      for (std::size_t c = 0; c < C; ++c) out.right.plane(0, c)[t] = out.left.plane(0, c)[s];
    } else {
      for (std::size_t c = 0; c < C; ++c) out.right.plane(0, c)[t] = random_dot(rng);
    }
  }
  return out;
}

std::vector<Sample> generate_rds(const DatasetSpec& spec) {
  spec.validate();
  std::vector<Sample> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) out.push_back(generate_rds_sample(spec, i));
  return out;
}

namespace {

void shift_view(Tensor4& img, const DomainShift& s, Pcg32& rng) {
  for (std::size_t c = 0; c < img.c(); ++c) {
    const Real gain = s.gains[std::min<std::size_t>(c, 2)];
    for (Real& x : img.plane(0, c)) {
      Real v = s.contrast == 1 ? x : s.contrast * (x - 0.5) + 0.5;
      v += s.brightness;
      v = std::max<Real>(v, 0);
      if (s.gamma != 1) v = std::pow(v, s.gamma);
      v *= gain;
      if (s.noise_std > 0) v += s.noise_std * rng.normal();
      x = std::clamp<Real>(v, 0, 1);
    }
  }
}

}  // namespace

Sample apply_shift(const Sample& sample, const DomainShift& shift, std::uint64_t seed) {
  shift.validate();
  Sample out = sample;
  Pcg32 left_rng(derive_seed(seed, 0), 101), right_rng(derive_seed(seed, 1), 103);
  shift_view(out.left, shift, left_rng);
  shift_view(out.right, shift, right_rng);
  return out;
}

std::vector<Sample> apply_shift(const std::vector<Sample>& samples, const DomainShift& shift,
                                std::uint64_t seed) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.push_back(apply_shift(samples[i], shift, derive_seed(seed, i)));
  return out;
}

StereoBatch make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: no samples selected");
  const Sample& first = samples.at(indices[0]);
  const std::size_t C = first.left.c(), H = first.left.h(), W = first.left.w();
  const std::size_t N = indices.size();
  StereoBatch b{Tensor4(N, C, H, W), Tensor4(N, C, H, W), Tensor4(N, 1, H, W), {}};
  b.mask.reserve(N * H * W);
  for (std::size_t k = 0; k < N; ++k) {
    const Sample& s = samples.at(indices[k]);
    if (s.left.shape() != first.left.shape())
      throw ShapeError("make_batch: sample " + to_string(s.left.shape()) + " vs " + to_string(first.left.shape()));
    std::copy(s.left.data().begin(), s.left.data().end(), b.left.data().begin() + static_cast<std::ptrdiff_t>(k * C * H * W));
    std::copy(s.right.data().begin(), s.right.data().end(), b.right.data().begin() + static_cast<std::ptrdiff_t>(k * C * H * W));
    std::copy(s.gt.data().begin(), s.gt.data().end(), b.gt.data().begin() + static_cast<std::ptrdiff_t>(k * H * W));
    b.mask.insert(b.mask.end(), s.mask.begin(), s.mask.end());
  }
  return b;
}

}  // namespace dsm
