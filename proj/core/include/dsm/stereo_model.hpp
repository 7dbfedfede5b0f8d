#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dsm/nonlocal_filter.hpp"
#include "dsm/norm.hpp"
#include "dsm/optim.hpp"
#include "dsm/tensor.hpp"

namespace dsm {

struct ModelConfig {
  NormMode norm_mode = NormMode::Domain;
  std::size_t nlf_feature_layers = 2;
  std::size_t nlf_cost_layers = 1;
  std::size_t image_channels = 3;
  std::size_t feature_channels = 16;
  std::size_t feature_blocks = 3;
  std::size_t aggregation_channels = 4;
  std::size_t aggregation_kernel = 1;
  std::size_t max_disparity = 16;  // candidates at working resolution
  std::size_t downsample = 1;      // 1 or 2
  Real eps = 1e-5;
  Real momentum = 0.1;
  std::uint64_t init_seed = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// Sets one field from its textual form. Returns false for unknown keys;
  /// throws std::invalid_argument for malformed values.
  bool set(const std::string& key, const std::string& value);
  /// Every field as key/value text, in a fixed order.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
};

/// Concatenation cost volume with its validity mask. mask[(d*h + y)*w + x] is
/// 0 where x - d < 0.
struct CostVolume {
  Tensor5 volume;
  std::vector<std::uint8_t> mask;
};

/// Everything the backward pass reads.
struct ForwardState {
  std::size_t batch = 0;
  bool training = false;

  // Feature extractor, run on [left; right] stacked into one 2N batch.
  std::vector<Tensor4> stage_inputs;
  std::vector<std::size_t> relu_stages;  // indices into stage_inputs
  std::vector<DnSaved> norm_saved;
  std::vector<FilterSaved> filter_saved;
  Tensor4 features;  // (2N, F, h, w); also the guidance

  // Left empty when the first aggregation kernel is 1x1: that convolution is
  // then applied to each feature map before pairing, without a cost volume.
  CostVolume cost_volume;

  // Aggregation on the (N*D)-batch view of the cost volume.
  Tensor4 agg_input;
  Tensor4 agg_hidden;  // first conv output, pre-ReLU
  std::vector<FilterSaved> cost_filter_saved;
  Tensor4 agg_filtered;
  Tensor5 cost;  // (N, 1, D, h, w)

  Tensor5 probability;   // softmax(-cost) over d
  Tensor4 disparity_lo;  // working resolution
  Tensor4 disparity;     // full resolution, pixels

  /// Signature of every ReLU mask and clamp gate taken in this pass.
  std::uint64_t branch_signature() const;
};

struct ForwardOptions {
  bool training = true;
  bool update_running_stats = false;
};

struct StereoBatch {
  Tensor4 left, right;  // (N, C, H, W)
  Tensor4 gt;           // (N, 1, H, W)
  std::vector<std::uint8_t> mask;
};

class StereoModel {
 public:
  explicit StereoModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  /// Every trainable parameter, in a fixed order.
  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;
  std::vector<NormLayer*> norm_layers();
  std::vector<const NormLayer*> norm_layers() const;

  void zero_grad();

  /// Shared-weight extractor. Returns the final feature map, which is also
  /// the guidance for cost filtering.
  Tensor4 extract_features(const Tensor4& images, ForwardState& state,
                           const ForwardOptions& options);
  Tensor4 extract_features(const Tensor4& images);

  /// Per-slice convolutions and cost filters over the N*D view of a cost
  /// volume, guided by the left features. Returns the (N, 1, D, h, w) cost.
  Tensor5 aggregate_cost(const CostVolume& cv, const Tensor4& guide, ForwardState& state);
  Tensor5 aggregate_cost(const CostVolume& cv, const Tensor4& guide);

  /// Full forward pass. Returns the disparity map at input resolution.
  Tensor4 forward(const Tensor4& left, const Tensor4& right, ForwardState& state,
                  const ForwardOptions& options);
  Tensor4 forward(const Tensor4& left, const Tensor4& right, const ForwardOptions& options = {false, false});

  /// Accumulates parameter gradients for dL/d(disparity) = `upstream`.
  /// Returns dL/d(left) and dL/d(right) stacked as a 2N batch.
  Tensor4 backward(const Tensor4& upstream, const ForwardState& state);

  /// forward -> smooth-L1 on valid pixels -> backward -> Adam. Returns the
  /// loss before the update.
  Real train_step(const StereoBatch& batch, const AdamOptions& adam);

 private:
  enum class StageKind { Conv, Norm, Relu, Filter, FinalConv };
  struct Stage {
    StageKind kind;
    std::size_t index;  // into convs_/norms_/filter counter
  };

  void init_parameters();
  Tensor4 pointwise_hidden(const Tensor4& f_left, const Tensor4& f_right, std::size_t d) const;
  Tensor5 finish_aggregation(const Tensor4& guide, std::size_t d, ForwardState& state);

  ModelConfig config_;
  std::vector<Stage> stages_;
  std::vector<Param> conv_weights_;
  Param final_weight_, final_bias_;
  std::vector<NormLayer> norms_;
  Param agg_weight0_, agg_bias0_, agg_weight1_, agg_bias1_;
};

/// Concatenates left features with right features shifted by each candidate
/// disparity. Throws when D exceeds the feature width.
CostVolume build_cost_volume(const Tensor4& f_left, const Tensor4& f_right, std::size_t d);

/// Expected disparity under softmax(-cost) along d. cost is (N, 1, D, h, w).
Tensor4 regress_disparity(const Tensor5& cost);

/// Nearest-neighbour upsampling by `factor` with values scaled by `factor`.
Tensor4 upsample_disparity(const Tensor4& disparity, std::size_t factor);

}  // namespace dsm
