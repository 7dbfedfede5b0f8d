#pragma once

#include <span>
#include <vector>

#include "dsm/scan_graph.hpp"
#include "dsm/tensor.hpp"

namespace dsm {

/// Lower clamp applied to raw cosine similarities before normalization.
inline constexpr Real kWeightFloor = 1e-6;
/// Floor on feature-vector norms inside the cosine.
inline constexpr Real kNormFloor = 1e-12;
/// Largest grid the path-enumeration oracle accepts.
inline constexpr std::size_t kMaxBruteForceNodes = 20;

/// Cosine similarity between each pixel of guide sample `sample` and its
/// in-range predecessors. Slot 0 (self) is 1; absent predecessors are 0.
EdgeField raw_edge_similarity(const Tensor4& guide, std::size_t sample, const ScanGraph& g);

/// Clamps predecessor similarities to [kWeightFloor, 1] and divides every
/// slot by the per-pixel sum, so self + predecessors = 1 exactly.
EdgeWeightField normalize_incoming(const EdgeField& raw, const ScanGraph& g);

struct ScanOptions {
  bool enforce_unit_mass = true;
  Real tolerance = 1e-6;
};

/// C_A(p) = w_self(p) C(p) + sum_q w(q,p) C_A(q), visiting nodes in scan
/// order. Throws when the weights violate the unit-mass constraint.
std::vector<Real> forward_scan(std::span<const Real> input, const EdgeWeightField& weights,
                               const ScanGraph& g, const ScanOptions& options = {});

/// Unchecked variant writing into `output` (which may not alias `input`).
void forward_scan_into(std::span<const Real> input, std::span<Real> output,
                       const EdgeWeightField& weights, const ScanGraph& g);

/// forward_scan_into on `planes` consecutive planes that share one weight
/// field. Each plane's arithmetic is identical to the single-plane scan.
void forward_scan_planes(std::span<const Real> input, std::span<Real> output, std::size_t planes,
                         const EdgeWeightField& weights, const ScanGraph& g);

struct ScanGradients {
  std::vector<Real> input;
  EdgeField weights;
};

/// Reverse-order propagation of dE/dC_A through one scan.
ScanGradients backward_scan(std::span<const Real> upstream, const EdgeWeightField& weights,
                            const ScanGraph& g, std::span<const Real> saved_output,
                            std::span<const Real> saved_input);

/// Workhorse of backward_scan: writes the input gradient, accumulates weight
/// gradients. `scratch` is resized as needed.
void backward_scan_into(std::span<const Real> upstream, const EdgeWeightField& weights,
                        const ScanGraph& g, std::span<const Real> saved_output,
                        std::span<const Real> saved_input, std::span<Real> grad_input,
                        EdgeField& grad_weights, std::vector<Real>& scratch);

/// backward_scan_into on `planes` consecutive planes sharing one weight
/// field; weight gradients are summed over the planes.
void backward_scan_planes(std::span<const Real> upstream, const EdgeWeightField& weights,
                          const ScanGraph& g, std::span<const Real> saved_output,
                          std::span<const Real> saved_input, std::span<Real> grad_input,
                          std::size_t planes, EdgeField& grad_weights);

/// Chains weight gradients through the normalization (clamp as a stop-gradient
/// gate) and the cosine, accumulating into `guide_grad` for sample `sample`.
void similarity_backward(const EdgeField& grad_weights, const EdgeField& raw,
                         const Tensor4& guide, std::size_t sample, const ScanGraph& g,
                         Tensor4& guide_grad);

/// Normalized weights for both scan graphs derived from one guide sample.
struct GuideWeights {
  EdgeField raw1, raw2;
  EdgeWeightField w1, w2;
};

GuideWeights make_guide_weights(const Tensor4& guide, std::size_t sample, const GraphPair& graphs);

/// Scans over G1, then feeds the result through G2.
std::vector<Real> filter_2d(std::span<const Real> input, const GuideWeights& weights,
                            const GraphPair& graphs);

/// filter_2d on every (n, c) plane, weights from guide sample n.
Tensor4 filter_2d(const Tensor4& input, const Tensor4& guide);

/// filter_2d on every (n, c, d) slice with one weight set per guide sample.
Tensor5 filter_cost_volume(const Tensor5& cost, const Tensor4& guide);

/// Saved state of a batched filter layer.
struct FilterSaved {
  std::size_t group = 1;  // batch entries per guide sample
  std::vector<GuideWeights> weights;
  Tensor4 input, mid, output;
};

/// Batched filter: entry b of `input` is filtered with weights from guide
/// sample b / group.
Tensor4 nlf_forward(const Tensor4& input, const Tensor4& guide, std::size_t group,
                    FilterSaved& saved);

/// Returns the input gradient and accumulates the guide gradient.
Tensor4 nlf_backward(const Tensor4& upstream, const FilterSaved& saved, const Tensor4& guide,
                     Tensor4& guide_grad);

/// Folds the clamp-gate pattern of every raw similarity into a signature.
std::uint64_t fold_clamp_pattern(std::uint64_t signature, const FilterSaved& saved);

struct PathFilterResult {
  std::vector<Real> output;
  std::vector<Real> total_weight;  // sum_q W(q, p) per node p
  std::vector<Real> path_weight;   // W(q, p) at q * nodes + p
  std::size_t paths = 0;
};

/// Explicit enumeration of every path q -> p (self edge counted once at the
/// start node). Rejects grids larger than kMaxBruteForceNodes.
PathFilterResult brute_force_path_filter(std::span<const Real> input,
                                         const EdgeWeightField& weights, const ScanGraph& g);

}  // namespace dsm
