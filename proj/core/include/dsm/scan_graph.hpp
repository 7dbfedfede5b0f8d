#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dsm/tensor.hpp"

namespace dsm {

/// Relative position of a predecessor: q = (y + dy, x + dx).
struct Offset {
  int dy = 0;
  int dx = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

enum class ScanOrder { RowMajor, ReverseRowMajor, ColumnMajor, ReverseColumnMajor };

enum class GraphDirection { G1, G2, Custom };

/// A directed acyclic grid graph. Every pixel p has the predecessors
/// p + offset that fall inside the grid; nodes are processed in `order`.
struct ScanGraph {
  std::size_t h = 0;
  std::size_t w = 0;
  GraphDirection direction = GraphDirection::Custom;
  std::vector<Offset> predecessor_offsets;
  ScanOrder order = ScanOrder::RowMajor;

  std::size_t nodes() const { return h * w; }
  std::size_t slots() const { return predecessor_offsets.size() + 1; }
  bool in_range(std::size_t y, std::size_t x, const Offset& o) const {
    const auto yy = static_cast<std::ptrdiff_t>(y) + o.dy;
    const auto xx = static_cast<std::ptrdiff_t>(x) + o.dx;
    return yy >= 0 && xx >= 0 && yy < static_cast<std::ptrdiff_t>(h) &&
           xx < static_cast<std::ptrdiff_t>(w);
  }
  /// Topological sequence of flat pixel indices y*w + x.
  std::vector<std::size_t> node_order() const;
  /// Number of in-range predecessor edges.
  std::size_t edge_count() const;
};

struct GraphPair {
  ScanGraph g1;
  ScanGraph g2;
};

/// Splits the 8-connected grid into G1 (left, upper-left, up, upper-right
/// predecessors, raster order) and its reverse G2.
GraphPair build_graphs(std::size_t h, std::size_t w);

/// True when every in-range edge runs from an earlier to a later node.
bool is_topological(const ScanGraph& g);

/// Calls fn(y, x) for every node in the graph's scan order.
template <class Fn>
void visit_in_order(const ScanGraph& g, Fn&& fn) {
  switch (g.order) {
    case ScanOrder::RowMajor:
      for (std::size_t y = 0; y < g.h; ++y)
        for (std::size_t x = 0; x < g.w; ++x) fn(y, x);
      break;
    case ScanOrder::ReverseRowMajor:
      for (std::size_t y = g.h; y-- > 0;)
        for (std::size_t x = g.w; x-- > 0;) fn(y, x);
      break;
    case ScanOrder::ColumnMajor:
      for (std::size_t x = 0; x < g.w; ++x)
        for (std::size_t y = 0; y < g.h; ++y) fn(y, x);
      break;
    case ScanOrder::ReverseColumnMajor:
      for (std::size_t x = g.w; x-- > 0;)
        for (std::size_t y = g.h; y-- > 0;) fn(y, x);
      break;
  }
}

/// Visits nodes in the reverse of the scan order.
template <class Fn>
void visit_in_reverse_order(const ScanGraph& g, Fn&& fn) {
  switch (g.order) {
    case ScanOrder::RowMajor:
      for (std::size_t y = g.h; y-- > 0;)
        for (std::size_t x = g.w; x-- > 0;) fn(y, x);
      break;
    case ScanOrder::ReverseRowMajor:
      for (std::size_t y = 0; y < g.h; ++y)
        for (std::size_t x = 0; x < g.w; ++x) fn(y, x);
      break;
    case ScanOrder::ColumnMajor:
      for (std::size_t x = g.w; x-- > 0;)
        for (std::size_t y = g.h; y-- > 0;) fn(y, x);
      break;
    case ScanOrder::ReverseColumnMajor:
      for (std::size_t x = 0; x < g.w; ++x)
        for (std::size_t y = 0; y < g.h; ++y) fn(y, x);
      break;
  }
}

/// Dense per-pixel edge slots: slot 0 is the self edge, slot 1 + k the edge
/// from predecessor offset k. Used for normalized weights, raw similarities
/// and weight gradients alike. Slots of out-of-range predecessors hold 0.
class EdgeField {
 public:
  EdgeField() = default;
  EdgeField(std::size_t h, std::size_t w, std::size_t slots, Real fill = 0);
  EdgeField(const ScanGraph& g, Real fill = 0) : EdgeField(g.h, g.w, g.slots(), fill) {}

  std::size_t h() const { return h_; }
  std::size_t w() const { return w_; }
  std::size_t slots() const { return slots_; }

  Real& at(std::size_t y, std::size_t x, std::size_t slot) {
    return data_[(y * w_ + x) * slots_ + slot];
  }
  Real at(std::size_t y, std::size_t x, std::size_t slot) const {
    return data_[(y * w_ + x) * slots_ + slot];
  }
  std::span<Real> pixel(std::size_t y, std::size_t x) {
    return std::span<Real>(data_).subspan((y * w_ + x) * slots_, slots_);
  }
  std::span<const Real> pixel(std::size_t y, std::size_t x) const {
    return std::span<const Real>(data_).subspan((y * w_ + x) * slots_, slots_);
  }
  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  void fill(Real v);

 private:
  std::size_t h_ = 0, w_ = 0, slots_ = 0;
  std::vector<Real> data_;
};

using EdgeWeightField = EdgeField;

/// Largest |self + sum of in-range predecessor weights - 1| over all pixels.
Real unit_mass_violation(const EdgeWeightField& weights, const ScanGraph& g);

void require_field_matches(const EdgeField& f, const ScanGraph& g, const char* what);

}  // namespace dsm
