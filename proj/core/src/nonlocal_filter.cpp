#include "dsm/nonlocal_filter.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>

namespace dsm {

namespace {

void require_plane(std::span<const Real> v, const ScanGraph& g, const char* what) {
  if (v.size() != g.nodes())
    throw ShapeError(std::string(what) + ": plane of " + std::to_string(v.size()) +
                     " values for a " + std::to_string(g.h) + "x" + std::to_string(g.w) +
                     " graph");
}

std::size_t pred_index(const ScanGraph& g, std::size_t y, std::size_t x, const Offset& o) {
  return static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + o.dy) * g.w +
         static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + o.dx);
}

bool clamp_passes_gradient(Real r) { return r >= kWeightFloor && r <= 1; }

std::vector<Real> pixel_norms(const Tensor4& guide, std::size_t sample) {
  const std::size_t plane = guide.h() * guide.w();
  std::vector<Real> sq(plane, 0);
  for (std::size_t c = 0; c < guide.c(); ++c) {
    auto p = guide.plane(sample, c);
    for (std::size_t i = 0; i < plane; ++i) sq[i] += p[i] * p[i];
  }
  for (Real& v : sq) v = std::sqrt(v);
  return sq;
}

// planes x nodes <-> nodes x planes, in 8x8 tiles.
void transpose(const Real* src, Real* dst, std::size_t rows, std::size_t cols) {
  constexpr std::size_t B = 8;
  for (std::size_t r0 = 0; r0 < rows; r0 += B)
    for (std::size_t c0 = 0; c0 < cols; c0 += B) {
      const std::size_t r1 = std::min(rows, r0 + B), c1 = std::min(cols, c0 + B);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
}

// Dot product with eight fixed partial sums (vectorizes, stays deterministic).
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real lanes[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t j = 0; j < 8; ++j) lanes[j] += a[i + j] * b[i + j];
  Real tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return (((lanes[0] + lanes[4]) + (lanes[1] + lanes[5])) +
          ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7]))) + tail;
}

// Both scans work on pixel-major data: value j of node p at [p * planes + j].
void forward_pixel_major(const Real* x, Real* y, std::size_t planes, const EdgeWeightField& weights,
                         const ScanGraph& g) {
  const std::size_t K = g.predecessor_offsets.size();
  const std::size_t S = K + 1;
  const Real* wd = weights.data().data();
  const Offset* offs = g.predecessor_offsets.data();
  visit_in_order(g, [&](std::size_t r, std::size_t c) {
    const std::size_t p = r * g.w + c;
    const Real* s = wd + p * S;
    Real* yp = y + p * planes;
    const Real* xp = x + p * planes;
    const Real s0 = s[0];
    for (std::size_t j = 0; j < planes; ++j) yp[j] = s0 * xp[j];
    for (std::size_t k = 0; k < K; ++k) {
      if (!g.in_range(r, c, offs[k])) continue;
      const Real sk = s[k + 1];
      const Real* yq = y + pred_index(g, r, c, offs[k]) * planes;
      for (std::size_t j = 0; j < planes; ++j) yp[j] += sk * yq[j];
    }
  });
}

// `gb` holds the upstream gradient on entry and is consumed.
void backward_pixel_major(Real* gb, const Real* saved_output, const Real* saved_input, Real* grad_input,
                          std::size_t planes, const EdgeWeightField& weights, const ScanGraph& g,
                          EdgeField& grad_weights) {
  const std::size_t K = g.predecessor_offsets.size();
  const std::size_t S = K + 1;
  const Real* wd = weights.data().data();
  Real* gw = grad_weights.data().data();
  const Offset* offs = g.predecessor_offsets.data();
  visit_in_reverse_order(g, [&](std::size_t r, std::size_t c) {
    const std::size_t p = r * g.w + c;
    const Real* b = gb + p * planes;  // complete: every successor has been visited
    const Real* s = wd + p * S;
    Real* gs = gw + p * S;
    Real* gi = grad_input + p * planes;
    const Real s0 = s[0];
    for (std::size_t j = 0; j < planes; ++j) gi[j] = b[j] * s0;
    gs[0] += dot(b, saved_input + p * planes, planes);
    for (std::size_t k = 0; k < K; ++k) {
      if (!g.in_range(r, c, offs[k])) continue;
      const std::size_t q = pred_index(g, r, c, offs[k]);
      const Real sk = s[k + 1];
      Real* gq = gb + q * planes;
      for (std::size_t j = 0; j < planes; ++j) gq[j] += b[j] * sk;
      gs[k + 1] += dot(b, saved_output + q * planes, planes);
    }
  });
}

}  // namespace

EdgeField raw_edge_similarity(const Tensor4& guide, std::size_t sample, const ScanGraph& g) {
  if (guide.h() != g.h || guide.w() != g.w || sample >= guide.n())
    throw ShapeError("raw_edge_similarity: guide " + to_string(guide.shape()) +
                     " does not match graph " + std::to_string(g.h) + "x" + std::to_string(g.w));
  if (guide.c() == 0) throw ShapeError("raw_edge_similarity: guide has no channels");
  EdgeField raw(g);
  const std::vector<Real> norms = pixel_norms(guide, sample);
  const std::size_t K = g.predecessor_offsets.size();
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) raw.at(y, x, 0) = 1;
  for (std::size_t k = 0; k < K; ++k) {
    const Offset& o = g.predecessor_offsets[k];
    for (std::size_t c = 0; c < guide.c(); ++c) {
      auto f = guide.plane(sample, c);
      for (std::size_t y = 0; y < g.h; ++y)
        for (std::size_t x = 0; x < g.w; ++x)
          if (g.in_range(y, x, o)) raw.at(y, x, k + 1) += f[y * g.w + x] * f[pred_index(g, y, x, o)];
    }
    for (std::size_t y = 0; y < g.h; ++y)
      for (std::size_t x = 0; x < g.w; ++x) {
        if (!g.in_range(y, x, o)) continue;
        const Real np = std::max(norms[y * g.w + x], kNormFloor);
        const Real nq = std::max(norms[pred_index(g, y, x, o)], kNormFloor);
        raw.at(y, x, k + 1) /= np * nq;
      }
  }
  return raw;
}

EdgeWeightField normalize_incoming(const EdgeField& raw, const ScanGraph& g) {
  require_field_matches(raw, g, "normalize_incoming");
  EdgeWeightField w(g);
  const std::size_t K = g.predecessor_offsets.size();
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) {
      auto out = w.pixel(y, x);
      out[0] = 1;
      Real sum = 1;
      for (std::size_t k = 0; k < K; ++k) {
        if (!g.in_range(y, x, g.predecessor_offsets[k])) continue;
        const Real r = raw.at(y, x, k + 1);
        if (!std::isfinite(r)) throw std::domain_error("normalize_incoming: non-finite similarity");
        out[k + 1] = std::clamp(r, kWeightFloor, Real(1));
        sum += out[k + 1];
      }
      for (Real& v : out) v /= sum;
    }
  return w;
}

void forward_scan_into(std::span<const Real> input, std::span<Real> output,
                       const EdgeWeightField& weights, const ScanGraph& g) {
  forward_pixel_major(input.data(), output.data(), 1, weights, g);
}

void forward_scan_planes(std::span<const Real> input, std::span<Real> output, std::size_t planes,
                         const EdgeWeightField& weights, const ScanGraph& g) {
  const std::size_t n = g.nodes();
  if (input.size() != planes * n || output.size() != planes * n)
    throw ShapeError("forward_scan_planes: " + std::to_string(input.size()) + " inputs and " +
                     std::to_string(output.size()) + " outputs for " + std::to_string(planes) +
                     " planes of " + std::to_string(n));
  require_field_matches(weights, g, "forward_scan_planes");
  if (planes == 1) return forward_scan_into(input, output, weights, g);
  std::vector<Real> x(planes * n), y(planes * n);
  transpose(input.data(), x.data(), planes, n);
  forward_pixel_major(x.data(), y.data(), planes, weights, g);
  transpose(y.data(), output.data(), n, planes);
}

std::vector<Real> forward_scan(std::span<const Real> input, const EdgeWeightField& weights,
                               const ScanGraph& g, const ScanOptions& options) {
  require_plane(input, g, "forward_scan");
  require_field_matches(weights, g, "forward_scan");
  if (options.enforce_unit_mass) {
    const Real violation = unit_mass_violation(weights, g);
    if (!(violation <= options.tolerance))
      throw std::invalid_argument("forward_scan: incoming weights sum to 1 +/- " +
                                  std::to_string(violation) + ", tolerance " +
                                  std::to_string(options.tolerance));
  }
  std::vector<Real> out(input.size());
  forward_scan_into(input, out, weights, g);
  return out;
}

void backward_scan_into(std::span<const Real> upstream, const EdgeWeightField& weights,
                        const ScanGraph& g, std::span<const Real> saved_output,
                        std::span<const Real> saved_input, std::span<Real> grad_input,
                        EdgeField& grad_weights, std::vector<Real>& scratch) {
  scratch.assign(upstream.begin(), upstream.end());
  backward_pixel_major(scratch.data(), saved_output.data(), saved_input.data(), grad_input.data(), 1,
                       weights, g, grad_weights);
}

void backward_scan_planes(std::span<const Real> upstream, const EdgeWeightField& weights,
                          const ScanGraph& g, std::span<const Real> saved_output,
                          std::span<const Real> saved_input, std::span<Real> grad_input,
                          std::size_t planes, EdgeField& grad_weights) {
  const std::size_t n = g.nodes();
  for (auto size : {upstream.size(), saved_output.size(), saved_input.size(), grad_input.size()})
    if (size != planes * n)
      throw ShapeError("backward_scan_planes: buffer of " + std::to_string(size) + " values for " +
                       std::to_string(planes) + " planes of " + std::to_string(n));
  require_field_matches(weights, g, "backward_scan_planes");
  require_field_matches(grad_weights, g, "backward_scan_planes");
  std::vector<Real> scratch;
  if (planes == 1)
    return backward_scan_into(upstream, weights, g, saved_output, saved_input, grad_input,
                              grad_weights, scratch);
  std::vector<Real> gb(planes * n), so(planes * n), si(planes * n), gi(planes * n);
  transpose(upstream.data(), gb.data(), planes, n);
  transpose(saved_output.data(), so.data(), planes, n);
  transpose(saved_input.data(), si.data(), planes, n);
  backward_pixel_major(gb.data(), so.data(), si.data(), gi.data(), planes, weights, g, grad_weights);
  transpose(gi.data(), grad_input.data(), n, planes);
}

ScanGradients backward_scan(std::span<const Real> upstream, const EdgeWeightField& weights,
                            const ScanGraph& g, std::span<const Real> saved_output,
                            std::span<const Real> saved_input) {
  require_plane(upstream, g, "backward_scan");
  require_plane(saved_output, g, "backward_scan");
  require_plane(saved_input, g, "backward_scan");
  require_field_matches(weights, g, "backward_scan");
  ScanGradients r{std::vector<Real>(g.nodes()), EdgeField(g)};
  std::vector<Real> scratch;
  backward_scan_into(upstream, weights, g, saved_output, saved_input, r.input, r.weights, scratch);
  return r;
}

void similarity_backward(const EdgeField& grad_weights, const EdgeField& raw,
                         const Tensor4& guide, std::size_t sample, const ScanGraph& g,
                         Tensor4& guide_grad) {
  require_field_matches(grad_weights, g, "similarity_backward");
  require_field_matches(raw, g, "similarity_backward");
  if (guide_grad.shape() != guide.shape())
    throw ShapeError("similarity_backward: guide gradient " + to_string(guide_grad.shape()) +
                     " vs guide " + to_string(guide.shape()));
  const std::size_t K = g.predecessor_offsets.size();
  const std::size_t C = guide.c();

  // d loss / d cos for every (pixel, predecessor); zero where clamped.
  EdgeField dcos(g);
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) {
      auto r = raw.pixel(y, x);
      auto gw = grad_weights.pixel(y, x);
      Real sum = 1;
      for (std::size_t k = 0; k < K; ++k)
        if (g.in_range(y, x, g.predecessor_offsets[k]))
          sum += std::clamp(r[k + 1], kWeightFloor, Real(1));
      // w_j = r_j / sum  =>  dL/dr_k = (g_k - sum_j g_j w_j) / sum
      Real mean = gw[0] / sum;
      for (std::size_t k = 0; k < K; ++k)
        if (g.in_range(y, x, g.predecessor_offsets[k]))
          mean += gw[k + 1] * std::clamp(r[k + 1], kWeightFloor, Real(1)) / sum;
      for (std::size_t k = 0; k < K; ++k) {
        if (!g.in_range(y, x, g.predecessor_offsets[k])) continue;
        if (!clamp_passes_gradient(r[k + 1])) continue;
        dcos.at(y, x, k + 1) = (gw[k + 1] - mean) / sum;
      }
    }

  const std::vector<Real> norms = pixel_norms(guide, sample);
  for (std::size_t k = 0; k < K; ++k) {
    const Offset& o = g.predecessor_offsets[k];
    for (std::size_t c = 0; c < C; ++c) {
      auto f = guide.plane(sample, c);
      auto gf = guide_grad.plane(sample, c);
      for (std::size_t y = 0; y < g.h; ++y)
        for (std::size_t x = 0; x < g.w; ++x) {
          const Real a = dcos.at(y, x, k + 1);
          if (a == 0) continue;
          const std::size_t p = y * g.w + x;
          const std::size_t q = pred_index(g, y, x, o);
          const Real np = std::max(norms[p], kNormFloor);
          const Real nq = std::max(norms[q], kNormFloor);
          const Real cosv = raw.at(y, x, k + 1);
          // d cos / d x_p = x_q / (np nq) - cos x_p / np^2 (norm term absent when floored)
          Real dp = f[q] / (np * nq);
          Real dq = f[p] / (np * nq);
          if (norms[p] >= kNormFloor) dp -= cosv * f[p] / (np * np);
          if (norms[q] >= kNormFloor) dq -= cosv * f[q] / (nq * nq);
          gf[p] += a * dp;
          gf[q] += a * dq;
        }
    }
  }
}

GuideWeights make_guide_weights(const Tensor4& guide, std::size_t sample, const GraphPair& graphs) {
  GuideWeights gw;
  gw.raw1 = raw_edge_similarity(guide, sample, graphs.g1);
  gw.raw2 = raw_edge_similarity(guide, sample, graphs.g2);
  gw.w1 = normalize_incoming(gw.raw1, graphs.g1);
  gw.w2 = normalize_incoming(gw.raw2, graphs.g2);
  return gw;
}

std::vector<Real> filter_2d(std::span<const Real> input, const GuideWeights& weights,
                            const GraphPair& graphs) {
  std::vector<Real> mid = forward_scan(input, weights.w1, graphs.g1);
  return forward_scan(mid, weights.w2, graphs.g2);
}

Tensor4 nlf_forward(const Tensor4& input, const Tensor4& guide, std::size_t group,
                    FilterSaved& saved) {
  if (group == 0 || input.n() != guide.n() * group || input.h() != guide.h() ||
      input.w() != guide.w())
    throw ShapeError("nlf_forward: input " + to_string(input.shape()) + " vs guide " +
                     to_string(guide.shape()) + " with group " + std::to_string(group));
  const GraphPair graphs = build_graphs(input.h(), input.w());
  saved.group = group;
  saved.weights.clear();
  saved.weights.reserve(guide.n());
  for (std::size_t s = 0; s < guide.n(); ++s) saved.weights.push_back(make_guide_weights(guide, s, graphs));
  saved.input = input;
  saved.mid = Tensor4(input.shape());
  saved.output = Tensor4(input.shape());
  // Entries s*group .. (s+1)*group - 1 are contiguous and share sample s's
  // weights; they are scanned together in pixel-major layout.
  const std::size_t n = graphs.g1.nodes(), planes = group * input.c(), block = planes * n;
  auto buffer = [block] { return std::make_unique_for_overwrite<Real[]>(block); };
  const auto x = buffer(), mid = buffer(), y = buffer();
  for (std::size_t s = 0; s < guide.n(); ++s) {
    const GuideWeights& gw = saved.weights[s];
    transpose(&saved.input.data()[s * block], x.get(), planes, n);
    forward_pixel_major(x.get(), mid.get(), planes, gw.w1, graphs.g1);
    forward_pixel_major(mid.get(), y.get(), planes, gw.w2, graphs.g2);
    transpose(mid.get(), &saved.mid.data()[s * block], n, planes);
    transpose(y.get(), &saved.output.data()[s * block], n, planes);
  }
  return saved.output;
}

Tensor4 nlf_backward(const Tensor4& upstream, const FilterSaved& saved, const Tensor4& guide,
                     Tensor4& guide_grad) {
  require_same_shape(upstream, saved.output, "nlf_backward");
  const GraphPair graphs = build_graphs(upstream.h(), upstream.w());
  Tensor4 grad_in(upstream.shape());
  const std::size_t n = graphs.g1.nodes(), planes = saved.group * upstream.c(), block = planes * n;
  auto buffer = [block] { return std::make_unique_for_overwrite<Real[]>(block); };
  const auto gb = buffer(), out = buffer(), mid = buffer(), in = buffer(), g_mid = buffer(), gi = buffer();
  for (std::size_t s = 0; s < guide.n(); ++s) {
    const GuideWeights& gw = saved.weights[s];
    EdgeField gw1(graphs.g1), gw2(graphs.g2);
    transpose(&upstream.data()[s * block], gb.get(), planes, n);
    transpose(&saved.output.data()[s * block], out.get(), planes, n);
    transpose(&saved.mid.data()[s * block], mid.get(), planes, n);
    transpose(&saved.input.data()[s * block], in.get(), planes, n);
    backward_pixel_major(gb.get(), out.get(), mid.get(), g_mid.get(), planes, gw.w2, graphs.g2, gw2);
    backward_pixel_major(g_mid.get(), mid.get(), in.get(), gi.get(), planes, gw.w1, graphs.g1, gw1);
    transpose(gi.get(), &grad_in.data()[s * block], n, planes);
    similarity_backward(gw1, gw.raw1, guide, s, graphs.g1, guide_grad);
    similarity_backward(gw2, gw.raw2, guide, s, graphs.g2, guide_grad);
  }
  return grad_in;
}

Tensor4 filter_2d(const Tensor4& input, const Tensor4& guide) {
  FilterSaved saved;
  return nlf_forward(input, guide, 1, saved);
}

Tensor5 filter_cost_volume(const Tensor5& cost, const Tensor4& guide) {
  if (cost.n() != guide.n() || cost.h() != guide.h() || cost.w() != guide.w())
    throw ShapeError("filter_cost_volume: cost " + to_string(cost.shape()) + " vs guide " +
                     to_string(guide.shape()));
  const GraphPair graphs = build_graphs(cost.h(), cost.w());
  Tensor5 out(cost.shape());
  std::vector<Real> mid(graphs.g1.nodes());
  for (std::size_t n = 0; n < cost.n(); ++n) {
    const GuideWeights gw = make_guide_weights(guide, n, graphs);
    for (std::size_t c = 0; c < cost.c(); ++c)
      for (std::size_t d = 0; d < cost.d(); ++d) {
        forward_scan_into(cost.plane(n, c, d), mid, gw.w1, graphs.g1);
        forward_scan_into(mid, out.plane(n, c, d), gw.w2, graphs.g2);
      }
  }
  return out;
}

std::uint64_t fold_clamp_pattern(std::uint64_t signature, const FilterSaved& saved) {
  constexpr std::uint64_t prime = 1099511628211ull;
  auto fold = [&](const EdgeField& raw) {
    std::uint64_t bits = 0;
    std::size_t count = 0;
    for (Real r : raw.data()) {
      bits = (bits << 1) | (clamp_passes_gradient(r) ? 1u : 0u);
      if (++count == 64) {
        signature = (signature ^ bits) * prime;
        bits = 0;
        count = 0;
      }
    }
    signature = (signature ^ bits) * prime;
  };
  for (const GuideWeights& gw : saved.weights) {
    fold(gw.raw1);
    fold(gw.raw2);
  }
  return signature;
}

PathFilterResult brute_force_path_filter(std::span<const Real> input,
                                         const EdgeWeightField& weights, const ScanGraph& g) {
  const std::size_t N = g.nodes();
  if (N > kMaxBruteForceNodes)
    throw std::invalid_argument("brute_force_path_filter: " + std::to_string(g.h) + "x" +
                                std::to_string(g.w) + " grid has " + std::to_string(N) +
                                " nodes, limit is " + std::to_string(kMaxBruteForceNodes));
  require_plane(input, g, "brute_force_path_filter");
  require_field_matches(weights, g, "brute_force_path_filter");
  PathFilterResult r;
  r.path_weight.assign(N * N, 0);
  const std::size_t K = g.predecessor_offsets.size();

  // Walk every path backwards from its end node p; reaching q with edge
  // product `prod` completes the path q -> ... -> p with w_self(q) * prod.
  std::function<void(std::size_t, std::size_t, std::size_t, Real)> walk =
      [&](std::size_t p, std::size_t y, std::size_t x, Real prod) {
        r.path_weight[(y * g.w + x) * N + p] += prod * weights.at(y, x, 0);
        ++r.paths;
        for (std::size_t k = 0; k < K; ++k) {
          const Offset& o = g.predecessor_offsets[k];
          if (!g.in_range(y, x, o)) continue;
          walk(p, y + o.dy, x + o.dx, prod * weights.at(y, x, k + 1));
        }
      };
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) walk(y * g.w + x, y, x, 1);

  r.output.assign(N, 0);
  r.total_weight.assign(N, 0);
  for (std::size_t p = 0; p < N; ++p)
    for (std::size_t q = 0; q < N; ++q) {
      r.output[p] += r.path_weight[q * N + p] * input[q];
      r.total_weight[p] += r.path_weight[q * N + p];
    }
  return r;
}

}  // namespace dsm
