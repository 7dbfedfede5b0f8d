#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/stereo_model.hpp"

namespace dsm {

struct Metrics {
  Real rate1 = 0;  // % of valid pixels with |error| > 1
  Real rate2 = 0;
  Real rate3 = 0;
  Real epe = 0;    // mean |error|
  std::size_t valid = 0;

  /// % of valid pixels with |error| > t.
  Real rate(int t) const { return t == 1 ? rate1 : t == 2 ? rate2 : rate3; }
};

/// Pools error counts over any number of prediction / ground-truth pairs.
class MetricsAccumulator {
 public:
  void add(const Tensor4& pred, const Tensor4& gt, std::span<const std::uint8_t> mask);
  /// Throws std::invalid_argument when no valid pixel was seen.
  Metrics result() const;

 private:
  std::size_t valid_ = 0;
  std::size_t over_[3] = {0, 0, 0};
  Real abs_sum_ = 0;
};

Metrics compute_metrics(const Tensor4& pred, const Tensor4& gt, std::span<const std::uint8_t> mask);

/// Inference over the dataset in batches; pooled metrics over valid pixels.
Metrics evaluate(StereoModel& model, const std::vector<Sample>& dataset, std::size_t batch_size = 4);

/// Per-sample disparity predictions, in dataset order.
std::vector<Tensor4> predict(StereoModel& model, const std::vector<Sample>& dataset,
                             std::size_t batch_size = 4);

}  // namespace dsm
