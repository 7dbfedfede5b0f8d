#include "dsm/scan_graph.hpp"

#include <algorithm>
#include <cmath>

namespace dsm {

std::vector<std::size_t> ScanGraph::node_order() const {
  std::vector<std::size_t> order;
  order.reserve(nodes());
  visit_in_order(*this, [&](std::size_t y, std::size_t x) { order.push_back(y * w + x); });
  return order;
}

std::size_t ScanGraph::edge_count() const {
  std::size_t edges = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (const Offset& o : predecessor_offsets) edges += in_range(y, x, o) ? 1 : 0;
  return edges;
}

GraphPair build_graphs(std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw std::invalid_argument("build_graphs: grid must be non-empty");
  GraphPair p;
  p.g1 = ScanGraph{h, w, GraphDirection::G1, {{0, -1}, {-1, -1}, {-1, 0}, {-1, 1}},
                   ScanOrder::RowMajor};
  p.g2 = ScanGraph{h, w, GraphDirection::G2, {{0, 1}, {1, 1}, {1, 0}, {1, -1}},
                   ScanOrder::ReverseRowMajor};
  return p;
}

bool is_topological(const ScanGraph& g) {
  const auto order = g.node_order();
  std::vector<std::size_t> rank(g.nodes());
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x)
      for (const Offset& o : g.predecessor_offsets) {
        if (!g.in_range(y, x, o)) continue;
        const std::size_t q = (y + o.dy) * g.w + (x + o.dx);
        if (rank[q] >= rank[y * g.w + x]) return false;
      }
  return true;
}

EdgeField::EdgeField(std::size_t h, std::size_t w, std::size_t slots, Real fill)
    : h_(h), w_(w), slots_(slots), data_(h * w * slots, fill) {}

void EdgeField::fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

void require_field_matches(const EdgeField& f, const ScanGraph& g, const char* what) {
  if (f.h() != g.h || f.w() != g.w || f.slots() != g.slots())
    throw ShapeError(std::string(what) + ": edge field " + std::to_string(f.h()) + "x" +
                     std::to_string(f.w()) + "x" + std::to_string(f.slots()) +
                     " does not match graph " + std::to_string(g.h) + "x" + std::to_string(g.w) +
                     "x" + std::to_string(g.slots()));
}

Real unit_mass_violation(const EdgeWeightField& weights, const ScanGraph& g) {
  require_field_matches(weights, g, "unit_mass_violation");
  Real worst = 0;
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) {
      Real sum = weights.at(y, x, 0);
      for (std::size_t k = 0; k < g.predecessor_offsets.size(); ++k)
        if (g.in_range(y, x, g.predecessor_offsets[k])) sum += weights.at(y, x, k + 1);
      const Real d = std::abs(sum - 1);
      if (!(d <= worst)) worst = d;  // NaN propagates
    }
  return worst;
}

}  // namespace dsm
