#include "dsm/special_cases.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsm {

SgaWeights::SgaWeights(std::size_t h_, std::size_t w_) : h(h_), w(w_) {
  for (auto& m : maps) m.assign(h * w, 0);
}

namespace {

struct Step {
  int dy, dx;
};

Step step_of(SgaDirection r) {
  switch (r) {
    case SgaDirection::LeftToRight: return {0, 1};
    case SgaDirection::RightToLeft: return {0, -1};
    case SgaDirection::TopToBottom: return {1, 0};
    case SgaDirection::BottomToTop: return {-1, 0};
  }
  return {0, 1};
}

}  // namespace

std::vector<Real> sga_recurrence(std::span<const Real> cost, std::size_t D, std::size_t h,
                                 std::size_t w, const SgaWeights& weights, SgaDirection direction) {
  if (cost.size() != D * h * w)
    throw ShapeError("sga_recurrence: " + std::to_string(cost.size()) + " cost values for " +
                     std::to_string(D) + "x" + std::to_string(h) + "x" + std::to_string(w));
  if (weights.h != h || weights.w != w)
    throw ShapeError("sga_recurrence: weights are " + std::to_string(weights.h) + "x" +
                     std::to_string(weights.w) + ", cost planes " + std::to_string(h) + "x" +
                     std::to_string(w));
  const Step r = step_of(direction);
  const std::size_t plane = h * w;

  auto has_prev = [&](std::size_t y, std::size_t x) {
    const auto py = static_cast<std::ptrdiff_t>(y) - r.dy;
    const auto px = static_cast<std::ptrdiff_t>(x) - r.dx;
    return py >= 0 && px >= 0 && py < static_cast<std::ptrdiff_t>(h) &&
           px < static_cast<std::ptrdiff_t>(w);
  };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      Real sum = 0;
      for (std::size_t t = 0; t < 5; ++t) {
        const Real v = weights.at(t, y, x);
        if (!(v >= 0)) throw std::invalid_argument("sga_recurrence: negative weight");
        sum += v;
      }
      if (!(std::abs(sum - 1) <= 1e-9))
        throw std::invalid_argument("sga_recurrence: weights at (" + std::to_string(y) + "," +
                                    std::to_string(x) + ") sum to " + std::to_string(sum));
      if (!has_prev(y, x) && !(std::abs(weights.at(0, y, x) - 1) <= 1e-9))
        throw std::invalid_argument("sga_recurrence: scan-start pixel (" + std::to_string(y) +
                                    "," + std::to_string(x) + ") needs self weight 1");
    }

  std::vector<Real> out(cost.size());
  // Number of steps along the scan and the pixels of each scan line.
  const bool horizontal = r.dy == 0;
  const std::size_t lines = horizontal ? h : w;
  const std::size_t length = horizontal ? w : h;
  const bool forward = (r.dx + r.dy) > 0;
  for (std::size_t line = 0; line < lines; ++line) {
    for (std::size_t s = 0; s < length; ++s) {
      const std::size_t t = forward ? s : length - 1 - s;
      const std::size_t y = horizontal ? line : t;
      const std::size_t x = horizontal ? t : line;
      const std::size_t p = y * w + x;
      if (s == 0) {
        for (std::size_t d = 0; d < D; ++d) out[d * plane + p] = cost[d * plane + p];
        continue;
      }
      const std::size_t q = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) - r.dy) * w +
                            static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) - r.dx);
      Real mx = out[q];
      for (std::size_t d = 1; d < D; ++d) mx = std::max(mx, out[d * plane + q]);
      const Real w0 = weights.at(0, y, x), w1 = weights.at(1, y, x), w2 = weights.at(2, y, x),
                 w3 = weights.at(3, y, x), w4 = weights.at(4, y, x);
      for (std::size_t d = 0; d < D; ++d) {
        Real v = w0 * cost[d * plane + p] + w1 * out[d * plane + q] + w4 * mx;
        if (d > 0) v += w2 * out[(d - 1) * plane + q];
        if (d + 1 < D) v += w3 * out[(d + 1) * plane + q];
        out[d * plane + p] = v;
      }
    }
  }
  return out;
}

Tensor5 sga_recurrence(const Tensor5& cost, const SgaWeights& weights, SgaDirection direction) {
  Tensor5 out(cost.shape());
  const std::size_t slab = cost.d() * cost.h() * cost.w();
  for (std::size_t n = 0; n < cost.n(); ++n)
    for (std::size_t c = 0; c < cost.c(); ++c) {
      const std::size_t base = cost.index(n, c, 0, 0, 0);
      auto result = sga_recurrence(cost.data().subspan(base, slab), cost.d(), cost.h(), cost.w(),
                                   weights, direction);
      std::copy(result.begin(), result.end(), out.data().begin() + static_cast<std::ptrdiff_t>(base));
    }
  return out;
}

Affinities::Affinities(PropagationVariant v, std::size_t h_, std::size_t w_)
    : variant(v), h(h_), w(w_), maps(v == PropagationVariant::OneWay ? 1 : 3, std::vector<Real>(h_ * w_, 0)) {}

namespace {

// Row offsets of the previous-column neighbours for each affinity map.
std::vector<int> neighbour_rows(PropagationVariant v) {
  if (v == PropagationVariant::OneWay) return {0};
  return {-1, 0, 1};
}

}  // namespace

std::vector<Real> affinity_propagation(std::span<const Real> input, const Affinities& a) {
  if (input.size() != a.h * a.w)
    throw ShapeError("affinity_propagation: " + std::to_string(input.size()) +
                     " values for a " + std::to_string(a.h) + "x" + std::to_string(a.w) + " grid");
  const auto rows = neighbour_rows(a.variant);
  if (a.maps.size() != rows.size())
    throw ShapeError("affinity_propagation: wrong number of affinity maps");
  std::vector<Real> out(input.size());
  for (std::size_t x = 0; x < a.w; ++x) {
    for (std::size_t y = 0; y < a.h; ++y) {
      const std::size_t p = y * a.w + x;
      Real mass = 0, magnitude = 0, acc = 0;
      if (x > 0) {
        for (std::size_t k = 0; k < rows.size(); ++k) {
          const auto yy = static_cast<std::ptrdiff_t>(y) + rows[k];
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(a.h)) continue;
          const Real v = a.at(k, y, x);
          mass += v;
          magnitude += std::abs(v);
          acc += v * out[static_cast<std::size_t>(yy) * a.w + (x - 1)];
        }
      }
      if (magnitude > 1 + 1e-12)
        throw std::invalid_argument("affinity_propagation: affinity magnitudes at (" +
                                    std::to_string(y) + "," + std::to_string(x) + ") exceed 1");
      out[p] = (1 - mass) * input[p] + acc;
    }
  }
  return out;
}

ScanGraph affinity_graph(std::size_t h, std::size_t w, PropagationVariant variant) {
  ScanGraph g;
  g.h = h;
  g.w = w;
  g.direction = GraphDirection::Custom;
  g.order = ScanOrder::ColumnMajor;
  for (int dy : neighbour_rows(variant)) g.predecessor_offsets.push_back({dy, -1});
  return g;
}

EdgeWeightField affinity_weights(const Affinities& a) {
  const ScanGraph g = affinity_graph(a.h, a.w, a.variant);
  EdgeWeightField f(g);
  for (std::size_t y = 0; y < a.h; ++y)
    for (std::size_t x = 0; x < a.w; ++x) {
      Real mass = 0;
      for (std::size_t k = 0; k < g.predecessor_offsets.size(); ++k) {
        if (!g.in_range(y, x, g.predecessor_offsets[k])) continue;
        f.at(y, x, k + 1) = a.at(k, y, x);
        mass += a.at(k, y, x);
      }
      f.at(y, x, 0) = 1 - mass;
    }
  return f;
}

}  // namespace dsm
