#include "dsm/norm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace dsm {

std::string to_string(NormMode mode) {
  switch (mode) {
    case NormMode::Batch: return "BN";
    case NormMode::Instance: return "IN";
    case NormMode::Domain: return "DN";
  }
  return "?";
}

NormMode parse_norm_mode(const std::string& text) {
  std::string t;
  for (char ch : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (t == "bn" || t == "batch") return NormMode::Batch;
  if (t == "in" || t == "instance") return NormMode::Instance;
  if (t == "dn" || t == "domain") return NormMode::Domain;
  throw std::invalid_argument("unknown normalization mode '" + text + "' (expected BN, IN or DN)");
}

DnParams::DnParams(const std::string& prefix, std::size_t channels, Real eps_)
    : gamma(prefix + ".gamma", {channels}, 1.0), beta(prefix + ".beta", {channels}, 0.0), eps(eps_) {
  if (!(eps_ > 0)) throw std::invalid_argument("DnParams: eps must be positive");
}

ChannelStats instance_stats(const Tensor4& x, Real eps) {
  if (x.h() * x.w() == 0) throw ShapeError("instance_stats: empty spatial extent " + to_string(x.shape()));
  ChannelStats s{x.n(), x.c(), std::vector<Real>(x.n() * x.c()), std::vector<Real>(x.n() * x.c())};
  const auto m = static_cast<Real>(x.h() * x.w());
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t c = 0; c < x.c(); ++c) {
      auto p = x.plane(n, c);
      Real sum = 0;
      for (Real v : p) sum += v;
      const Real mu = sum / m;
      Real sq = 0;
      for (Real v : p) sq += (v - mu) * (v - mu);
      s.mu[n * x.c() + c] = mu;
      s.sigma[n * x.c() + c] = std::sqrt(sq / m + eps);
    }
  return s;
}

ChannelStats batch_stats(const Tensor4& x, Real eps) {
  if (x.n() * x.h() * x.w() == 0) throw ShapeError("batch_stats: empty tensor " + to_string(x.shape()));
  ChannelStats s{1, x.c(), std::vector<Real>(x.c()), std::vector<Real>(x.c())};
  const auto m = static_cast<Real>(x.n() * x.h() * x.w());
  for (std::size_t c = 0; c < x.c(); ++c) {
    Real sum = 0;
    for (std::size_t n = 0; n < x.n(); ++n)
      for (Real v : x.plane(n, c)) sum += v;
    const Real mu = sum / m;
    Real sq = 0;
    for (std::size_t n = 0; n < x.n(); ++n)
      for (Real v : x.plane(n, c)) sq += (v - mu) * (v - mu);
    s.mu[c] = mu;
    s.sigma[c] = std::sqrt(sq / m + eps);
  }
  return s;
}

Tensor4 normalize_spatial(const Tensor4& x, const ChannelStats& stats) {
  if (stats.channels != x.c() || (stats.rows != 1 && stats.rows != x.n()))
    throw ShapeError("normalize_spatial: statistics for " + std::to_string(stats.rows) + "x" +
                     std::to_string(stats.channels) + " do not fit " + to_string(x.shape()));
  Tensor4 out(x.shape());
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t c = 0; c < x.c(); ++c) {
      const std::size_t k = stats.row_for(n) * stats.channels + c;
      const Real mu = stats.mu[k];
      const Real inv = 1 / stats.sigma[k];
      auto src = x.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - mu) * inv;
    }
  return out;
}

ChannelL2Result normalize_channel_l2(const Tensor4& x_hat, Real eps) {
  ChannelL2Result r{Tensor4(x_hat.shape()), std::vector<Real>(x_hat.n() * x_hat.h() * x_hat.w())};
  const std::size_t plane = x_hat.h() * x_hat.w();
  std::vector<Real> sq(plane);
  for (std::size_t n = 0; n < x_hat.n(); ++n) {
    std::fill(sq.begin(), sq.end(), eps);
    for (std::size_t c = 0; c < x_hat.c(); ++c) {
      auto p = x_hat.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) sq[i] += p[i] * p[i];
    }
    Real* norms = &r.norms[n * plane];
    for (std::size_t i = 0; i < plane; ++i) norms[i] = std::sqrt(sq[i]);
    for (std::size_t c = 0; c < x_hat.c(); ++c) {
      auto p = x_hat.plane(n, c);
      auto o = r.x_prime.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) o[i] = p[i] / norms[i];
    }
  }
  return r;
}

Tensor4 scale_shift(const Tensor4& x, std::span<const Real> gamma, std::span<const Real> beta) {
  if (gamma.size() != x.c() || beta.size() != x.c())
    throw ShapeError("scale_shift: gamma/beta lengths " + std::to_string(gamma.size()) + "/" +
                     std::to_string(beta.size()) + " do not match " + to_string(x.shape()));
  Tensor4 out(x.shape());
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t c = 0; c < x.c(); ++c) {
      auto src = x.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = gamma[c] * src[i] + beta[c];
    }
  return out;
}

std::pair<Tensor4, DnSaved> normalize_forward(const Tensor4& x, const DnParams& params,
                                              NormStatistics statistics, bool channel_l2,
                                              const RunningStats* running) {
  if (params.channels() != x.c())
    throw ShapeError("normalize: " + std::to_string(params.channels()) +
                     " scale/shift channels for input " + to_string(x.shape()));
  DnSaved saved;
  saved.statistics = statistics;
  saved.channel_l2 = channel_l2;
  switch (statistics) {
    case NormStatistics::PerSample: saved.stats = instance_stats(x, params.eps); break;
    case NormStatistics::PerBatch: saved.stats = batch_stats(x, params.eps); break;
    case NormStatistics::Running: {
      if (!running || running->mean.size() != x.c())
        throw std::invalid_argument("normalize: running statistics unavailable");
      saved.stats = ChannelStats{1, x.c(), running->mean, std::vector<Real>(x.c())};
      for (std::size_t c = 0; c < x.c(); ++c)
        saved.stats.sigma[c] = std::sqrt(running->var[c] + params.eps);
      break;
    }
  }
  saved.x_hat = normalize_spatial(x, saved.stats);
  if (channel_l2) {
    auto l2 = normalize_channel_l2(saved.x_hat, params.eps);
    saved.x_prime = std::move(l2.x_prime);
    saved.pixel_norms = std::move(l2.norms);
  } else {
    saved.x_prime = saved.x_hat;
  }
  Tensor4 y = scale_shift(saved.x_prime, params.gamma.value, params.beta.value);
  return {std::move(y), std::move(saved)};
}

NormGrads dn_backward(const Tensor4& upstream, const DnSaved& saved, const DnParams& params) {
  require_same_shape(upstream, saved.x_prime, "dn_backward");
  const std::size_t N = upstream.n(), C = upstream.c(), plane = upstream.h() * upstream.w();
  NormGrads g{Tensor4(upstream.shape()), std::vector<Real>(C, 0), std::vector<Real>(C, 0)};

  // scale_shift
  Tensor4 g_prime(upstream.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      auto up = upstream.plane(n, c);
      auto xp = saved.x_prime.plane(n, c);
      auto dst = g_prime.plane(n, c);
      Real sg = 0, sb = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        sg += up[i] * xp[i];
        sb += up[i];
        dst[i] = params.gamma.value[c] * up[i];
      }
      g.gamma[c] += sg;
      g.beta[c] += sb;
    }

  // channel L2: d x_hat = (g' - x' * <g', x'>) / r
  Tensor4 g_hat;
  if (saved.channel_l2) {
    g_hat = Tensor4(upstream.shape());
    std::vector<Real> dot(plane);
    for (std::size_t n = 0; n < N; ++n) {
      std::fill(dot.begin(), dot.end(), 0);
      for (std::size_t c = 0; c < C; ++c) {
        auto gp = g_prime.plane(n, c);
        auto xp = saved.x_prime.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) dot[i] += gp[i] * xp[i];
      }
      const Real* norms = &saved.pixel_norms[n * plane];
      for (std::size_t c = 0; c < C; ++c) {
        auto gp = g_prime.plane(n, c);
        auto xp = saved.x_prime.plane(n, c);
        auto dst = g_hat.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = (gp[i] - xp[i] * dot[i]) / norms[i];
      }
    }
  } else {
    g_hat = std::move(g_prime);
  }

  // spatial standardization
  const ChannelStats& s = saved.stats;
  if (saved.statistics == NormStatistics::Running) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const Real inv = 1 / s.sigma[c];
        auto src = g_hat.plane(n, c);
        auto dst = g.input.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * inv;
      }
    return g;
  }

  // dx = (g - mean(g) - x_hat * mean(g * x_hat)) / sigma over each statistics group.
  auto group_backward = [&](const std::vector<std::size_t>& samples, std::size_t c, Real sigma) {
    Real sum_g = 0, sum_gx = 0;
    for (std::size_t n : samples) {
      auto gh = g_hat.plane(n, c);
      auto xh = saved.x_hat.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_g += gh[i];
        sum_gx += gh[i] * xh[i];
      }
    }
    const Real m = static_cast<Real>(samples.size() * plane);
    const Real mean_g = sum_g / m, mean_gx = sum_gx / m;
    for (std::size_t n : samples) {
      auto gh = g_hat.plane(n, c);
      auto xh = saved.x_hat.plane(n, c);
      auto dst = g.input.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) dst[i] = (gh[i] - mean_g - xh[i] * mean_gx) / sigma;
    }
  };
  if (saved.statistics == NormStatistics::PerBatch) {
    std::vector<std::size_t> all(N);
    for (std::size_t n = 0; n < N; ++n) all[n] = n;
    for (std::size_t c = 0; c < C; ++c) group_backward(all, c, s.sigma[c]);
  } else {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) group_backward({n}, c, s.sigma[n * C + c]);
  }
  return g;
}

NormLayer::NormLayer(std::string name, NormMode mode, std::size_t channels, Real eps,
                     Real momentum)
    : mode_(mode), params_(name, channels, eps) {
  if (mode == NormMode::Batch)
    running_ = RunningStats{std::vector<Real>(channels, 0), std::vector<Real>(channels, 1), momentum};
}

std::pair<Tensor4, DnSaved> NormLayer::forward(const Tensor4& x, bool training,
                                               bool update_running) {
  switch (mode_) {
    case NormMode::Instance:
      return normalize_forward(x, params_, NormStatistics::PerSample, false);
    case NormMode::Domain:
      return normalize_forward(x, params_, NormStatistics::PerSample, true);
    case NormMode::Batch: break;
  }
  if (!training) return normalize_forward(x, params_, NormStatistics::Running, false, &*running_);
  auto result = normalize_forward(x, params_, NormStatistics::PerBatch, false);
  if (update_running) {
    const ChannelStats& s = result.second.stats;
    const Real mom = running_->momentum;
    for (std::size_t c = 0; c < x.c(); ++c) {
      const Real var = s.sigma[c] * s.sigma[c] - params_.eps;
      running_->mean[c] = (1 - mom) * running_->mean[c] + mom * s.mu[c];
      running_->var[c] = (1 - mom) * running_->var[c] + mom * std::max<Real>(var, 0);
    }
  }
  return result;
}

Tensor4 NormLayer::backward(const Tensor4& upstream, const DnSaved& saved) {
  NormGrads g = dn_backward(upstream, saved, params_);
  for (std::size_t c = 0; c < g.gamma.size(); ++c) {
    params_.gamma.grad[c] += g.gamma[c];
    params_.beta.grad[c] += g.beta[c];
  }
  return std::move(g.input);
}

std::pair<Tensor4, DnSaved> dn_forward(const Tensor4& x, const DnParams& params, NormMode mode) {
  switch (mode) {
    case NormMode::Batch: return normalize_forward(x, params, NormStatistics::PerBatch, false);
    case NormMode::Instance: return normalize_forward(x, params, NormStatistics::PerSample, false);
    case NormMode::Domain: break;
  }
  return normalize_forward(x, params, NormStatistics::PerSample, true);
}

std::size_t Histogram::bin_of(Real value) const {
  if (!(value >= lo)) return 0;
  const auto b = static_cast<std::size_t>((value - lo) / bin_width());
  return std::min(b, counts.size() - 1);
}

std::size_t Histogram::total() const {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

Histogram norm_histogram(const Tensor4& features, std::size_t bins, Real lo, Real hi) {
  if (bins < 2) throw std::invalid_argument("norm_histogram: need at least 2 bins");
  if (!(hi > lo)) throw std::invalid_argument("norm_histogram: empty range");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  const std::size_t plane = features.h() * features.w();
  std::vector<Real> sq(plane);
  for (std::size_t n = 0; n < features.n(); ++n) {
    std::fill(sq.begin(), sq.end(), 0);
    for (std::size_t c = 0; c < features.c(); ++c) {
      auto p = features.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) sq[i] += p[i] * p[i];
    }
    for (Real s : sq) ++h.counts[h.bin_of(std::sqrt(s))];
  }
  return h;
}

void write_histogram(std::ostream& os, const Histogram& h) {
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    os << h.bin_center(i) << '\t' << h.counts[i] << '\n';
}

}  // namespace dsm
