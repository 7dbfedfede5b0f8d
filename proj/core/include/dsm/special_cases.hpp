#pragma once

#include <array>
#include <span>
#include <vector>

#include "dsm/scan_graph.hpp"
#include "dsm/tensor.hpp"

namespace dsm {

// Semi-global aggregation ---------------------------------------------------

enum class SgaDirection { LeftToRight, RightToLeft, TopToBottom, BottomToTop };

/// Five weight maps (self, same disparity, d-1, d+1, column max) over an
/// h x w grid, for one scan direction.
struct SgaWeights {
  SgaWeights() = default;
  SgaWeights(std::size_t h, std::size_t w);

  std::size_t h = 0, w = 0;
  std::array<std::vector<Real>, 5> maps;

  Real& at(std::size_t term, std::size_t y, std::size_t x) { return maps[term][y * w + x]; }
  Real at(std::size_t term, std::size_t y, std::size_t x) const { return maps[term][y * w + x]; }
};

/// One-direction SGA recurrence over a d x h x w cost slab:
///   C_A(p,d) = w0 C(p,d) + w1 C_A(p-r,d) + w2 C_A(p-r,d-1) + w3 C_A(p-r,d+1)
///            + w4 max_i C_A(p-r,i)
/// Disparity neighbours outside [0, d) contribute nothing. The five weights
/// must sum to 1 (+/- 1e-9) and pixels with no p-r must have w0 = 1.
std::vector<Real> sga_recurrence(std::span<const Real> cost, std::size_t d, std::size_t h,
                                 std::size_t w, const SgaWeights& weights, SgaDirection direction);

/// Applies sga_recurrence to every (n, c) slab of a cost volume.
Tensor5 sga_recurrence(const Tensor5& cost, const SgaWeights& weights, SgaDirection direction);

// Affinity-based spatial propagation ----------------------------------------

enum class PropagationVariant { OneWay, ThreeWay };

/// Learned affinities for left-to-right column propagation. One-way has one
/// map (neighbour (y, x-1)); three-way has three: (y-1, x-1), (y, x-1),
/// (y+1, x-1). Affinities of out-of-grid neighbours are ignored.
struct Affinities {
  Affinities() = default;
  Affinities(PropagationVariant variant, std::size_t h, std::size_t w);

  PropagationVariant variant = PropagationVariant::OneWay;
  std::size_t h = 0, w = 0;
  std::vector<std::vector<Real>> maps;

  Real& at(std::size_t k, std::size_t y, std::size_t x) { return maps[k][y * w + x]; }
  Real at(std::size_t k, std::size_t y, std::size_t x) const { return maps[k][y * w + x]; }
};

/// C_A(p) = (1 - sum_q a(q,p)) C(p) + sum_q a(q,p) C_A(q), column by column.
/// Requires sum_q |a(q,p)| <= 1 per pixel.
std::vector<Real> affinity_propagation(std::span<const Real> input, const Affinities& affinities);

/// The column-to-column graph the propagation runs on.
ScanGraph affinity_graph(std::size_t h, std::size_t w, PropagationVariant variant);

/// The equivalent generic edge-weight field on affinity_graph.
EdgeWeightField affinity_weights(const Affinities& affinities);

}  // namespace dsm
