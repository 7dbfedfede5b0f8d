#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsm/stereo_model.hpp"
#include "dsm/tensor.hpp"

namespace dsm {

/// Photometric change applied at test time:
///   v = clamp(gain_c * max(contrast*(x - 0.5) + 0.5 + brightness, 0)^gamma + noise, 0, 1)
struct DomainShift {
  Real brightness = 0;
  Real contrast = 1;
  Real gamma = 1;
  Real noise_std = 0;
  std::array<Real, 3> gains{1, 1, 1};

  void validate() const;
  bool is_identity() const;
  /// Accepts brightness, contrast, gamma, noise (or noise_std), gains ("r,g,b"
  /// or a single value). Returns false for unknown keys.
  bool set(const std::string& key, const std::string& value);
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
};

struct DatasetSpec {
  std::size_t count = 64;
  std::size_t height = 64;
  std::size_t width = 96;
  std::size_t channels = 3;
  std::size_t max_disparity = 15;
  /// Foreground rectangles per 4096 pixels.
  Real shape_density = 3;
  std::uint64_t seed = 1;
  /// Fixes the background plane's disparity; random when unset.
  std::optional<std::size_t> background_disparity;

  void validate() const;
  bool set(const std::string& key, const std::string& value);
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
};

struct Sample {
  Tensor4 left, right;  // (1, C, H, W), values in [0, 1]
  Tensor4 gt;           // (1, 1, H, W), pixels
  std::vector<std::uint8_t> mask;  // H*W, 1 = visible in both views
};

/// Random-dot stereograms: a background plane plus nearer rectangles, each
/// with an integer disparity. The right view is the left view forward-warped
/// with a z-buffer; disoccluded holes get fresh dots. Pixels occluded in the
/// right view or shifted out of frame are masked.
std::vector<Sample> generate_rds(const DatasetSpec& spec);
Sample generate_rds_sample(const DatasetSpec& spec, std::size_t index);

/// Applies the same shift parameters to both views, with independent noise
/// realizations per view drawn from `seed`. Ground truth and mask are copied.
Sample apply_shift(const Sample& sample, const DomainShift& shift, std::uint64_t seed);
std::vector<Sample> apply_shift(const std::vector<Sample>& samples, const DomainShift& shift,
                                std::uint64_t seed);

/// Stacks the given samples into one training batch.
StereoBatch make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices);

}  // namespace dsm
