#include "dsm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dsm {

void MetricsAccumulator::add(const Tensor4& pred, const Tensor4& gt, std::span<const std::uint8_t> mask) {
  require_same_shape(pred, gt, "metrics");
  if (mask.size() != pred.size())
    throw ShapeError("metrics: mask has " + std::to_string(mask.size()) + " entries for " +
                     to_string(pred.shape()));
  auto p = pred.data();
  auto g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask[i]) continue;
    const Real e = std::abs(p[i] - g[i]);
    ++valid_;
    abs_sum_ += e;
    for (int t = 0; t < 3; ++t)
      if (e > static_cast<Real>(t + 1)) ++over_[t];
  }
}

Metrics MetricsAccumulator::result() const {
  if (valid_ == 0) throw std::invalid_argument("metrics: no valid pixels");
  const Real n = static_cast<Real>(valid_);
  return {100 * static_cast<Real>(over_[0]) / n, 100 * static_cast<Real>(over_[1]) / n,
          100 * static_cast<Real>(over_[2]) / n, abs_sum_ / n, valid_};
}

Metrics compute_metrics(const Tensor4& pred, const Tensor4& gt, std::span<const std::uint8_t> mask) {
  MetricsAccumulator acc;
  acc.add(pred, gt, mask);
  return acc.result();
}

std::vector<Tensor4> predict(StereoModel& model, const std::vector<Sample>& dataset, std::size_t batch_size) {
  if (dataset.empty()) throw std::invalid_argument("predict: empty dataset");
  batch_size = std::max<std::size_t>(batch_size, 1);
  std::vector<Tensor4> out;
  out.reserve(dataset.size());
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, dataset.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const StereoBatch b = make_batch(dataset, idx);
    const Tensor4 pred = model.forward(b.left, b.right, {false, false});
    const std::size_t plane = pred.h() * pred.w();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Tensor4 one(1, 1, pred.h(), pred.w());
      std::copy_n(pred.data().begin() + static_cast<std::ptrdiff_t>(k * plane), plane, one.data().begin());
      out.push_back(std::move(one));
    }
  }
  return out;
}

Metrics evaluate(StereoModel& model, const std::vector<Sample>& dataset, std::size_t batch_size) {
  const auto preds = predict(model, dataset, batch_size);
  MetricsAccumulator acc;
  for (std::size_t i = 0; i < dataset.size(); ++i) acc.add(preds[i], dataset[i].gt, dataset[i].mask);
  return acc.result();
}

}  // namespace dsm
