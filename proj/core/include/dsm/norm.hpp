#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsm/tensor.hpp"

namespace dsm {

enum class NormMode { Batch, Instance, Domain };

std::string to_string(NormMode mode);
/// Accepts BN/IN/DN and batch/instance/domain, case-insensitive.
NormMode parse_norm_mode(const std::string& text);

/// Per-channel scale and shift applied after normalization.
struct DnParams {
  DnParams() = default;
  DnParams(const std::string& prefix, std::size_t channels, Real eps = 1e-5);

  std::size_t channels() const { return gamma.size(); }

  Param gamma;
  Param beta;
  Real eps = 1e-5;
};

/// Channel means and standard deviations, one row per sample (instance
/// statistics) or a single row shared by the batch (batch statistics).
struct ChannelStats {
  std::size_t rows = 0;
  std::size_t channels = 0;
  std::vector<Real> mu;
  std::vector<Real> sigma;

  std::size_t row_for(std::size_t sample) const { return rows == 1 ? 0 : sample; }
};

/// Per-sample per-channel spatial mean and sqrt(population variance + eps).
ChannelStats instance_stats(const Tensor4& x, Real eps);
/// Per-channel statistics pooled over the batch and both spatial axes.
ChannelStats batch_stats(const Tensor4& x, Real eps);

/// (x - mu) / sigma with the statistics broadcast over the spatial axes.
Tensor4 normalize_spatial(const Tensor4& x, const ChannelStats& stats);

struct ChannelL2Result {
  Tensor4 x_prime;
  std::vector<Real> norms;  // n*h*w entries, sqrt(sum_c x^2 + eps)
};

/// Divides every pixel's channel vector by sqrt(|v|^2 + eps).
ChannelL2Result normalize_channel_l2(const Tensor4& x_hat, Real eps);

/// gamma_c * x + beta_c.
Tensor4 scale_shift(const Tensor4& x, std::span<const Real> gamma, std::span<const Real> beta);

enum class NormStatistics { PerSample, PerBatch, Running };

/// Everything the backward pass needs from one normalization forward.
struct DnSaved {
  NormStatistics statistics = NormStatistics::PerSample;
  bool channel_l2 = true;
  ChannelStats stats;
  std::vector<Real> pixel_norms;
  Tensor4 x_hat;
  Tensor4 x_prime;  // input to scale_shift
};

/// Running buffers for the batch-norm variant.
struct RunningStats {
  std::vector<Real> mean;
  std::vector<Real> var;
  Real momentum = 0.1;
};

/// Composable normalization: spatial standardization with the chosen
/// statistics, optional per-pixel channel L2 step, then scale and shift.
std::pair<Tensor4, DnSaved> normalize_forward(const Tensor4& x, const DnParams& params,
                                              NormStatistics statistics, bool channel_l2,
                                              const RunningStats* running = nullptr);

struct NormGrads {
  Tensor4 input;
  std::vector<Real> gamma;
  std::vector<Real> beta;
};

NormGrads dn_backward(const Tensor4& upstream, const DnSaved& saved, const DnParams& params);

/// A normalization site in a network: mode, parameters and (for BN) running
/// statistics.
class NormLayer {
 public:
  NormLayer() = default;
  NormLayer(std::string name, NormMode mode, std::size_t channels, Real eps = 1e-5,
            Real momentum = 0.1);

  NormMode mode() const { return mode_; }
  DnParams& params() { return params_; }
  const DnParams& params() const { return params_; }
  RunningStats* running() { return running_ ? &*running_ : nullptr; }
  const RunningStats* running() const { return running_ ? &*running_ : nullptr; }

  /// Training uses batch statistics for BN and updates the running buffers
  /// when `update_running` is set; inference uses the running buffers.
  std::pair<Tensor4, DnSaved> forward(const Tensor4& x, bool training, bool update_running);
  /// Returns the input gradient, accumulating gamma/beta gradients.
  Tensor4 backward(const Tensor4& upstream, const DnSaved& saved);

 private:
  NormMode mode_ = NormMode::Domain;
  DnParams params_;
  std::optional<RunningStats> running_;
};

/// DN/IN/BN forward in the given mode with default training semantics.
std::pair<Tensor4, DnSaved> dn_forward(const Tensor4& x, const DnParams& params, NormMode mode);

struct Histogram {
  Real lo = 0;
  Real hi = 0;
  std::vector<std::size_t> counts;

  Real bin_width() const { return (hi - lo) / static_cast<Real>(counts.size()); }
  Real bin_center(std::size_t i) const { return lo + (static_cast<Real>(i) + 0.5) * bin_width(); }
  std::size_t bin_of(Real value) const;
  std::size_t total() const;
};

/// Histogram of per-pixel channel-vector L2 norms; values outside [lo, hi)
/// land in the first or last bin so the total is always n*h*w.
Histogram norm_histogram(const Tensor4& features, std::size_t bins, Real lo = 0, Real hi = 2);

/// Two whitespace-separated columns: bin_center count.
void write_histogram(std::ostream& os, const Histogram& h);

}  // namespace dsm
