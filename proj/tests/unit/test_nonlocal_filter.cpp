#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "dsm/grad_check.hpp"
#include "dsm/nonlocal_filter.hpp"
#include "dsm/scan_graph.hpp"
#include "dsm/special_cases.hpp"
#include "support.hpp"

namespace dsm {
namespace {

using test::dot;
using test::max_abs_diff;
using test::random_tensor;
using test::random_unit_weights;
using test::random_vector;

// Independent path-sum oracle: W(q, p) by dynamic programming over the
// topological order, computed from edge lists rather than the scan kernel.
std::vector<Real> path_sum_oracle(std::span<const Real> input, const EdgeWeightField& w, const ScanGraph& g) {
  const std::size_t n = g.nodes();
  std::vector<std::vector<Real>> W(n, std::vector<Real>(n, 0));
  for (std::size_t p : g.node_order()) {
    const std::size_t y = p / g.w, x = p % g.w;
    W[p][p] = w.at(y, x, 0);
    for (std::size_t k = 0; k < g.predecessor_offsets.size(); ++k) {
      const Offset o = g.predecessor_offsets[k];
      if (!g.in_range(y, x, o)) continue;
      const std::size_t q = static_cast<std::size_t>(static_cast<long>(y) + o.dy) * g.w +
                            static_cast<std::size_t>(static_cast<long>(x) + o.dx);
      for (std::size_t s = 0; s < n; ++s) W[s][p] += w.at(y, x, k + 1) * W[s][q];
    }
  }
  std::vector<Real> out(n, 0);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = 0; q < n; ++q) out[p] += W[q][p] * input[q];
  return out;
}

TEST(BuildGraphs, SingleNode) {
  const GraphPair gp = build_graphs(1, 1);
  EXPECT_EQ(gp.g1.edge_count(), 0u);
  EXPECT_EQ(gp.g2.edge_count(), 0u);
  EXPECT_EQ(gp.g1.node_order(), std::vector<std::size_t>{0});
}

TEST(BuildGraphs, SingleRowIsLeftToRightChain) {
  const GraphPair gp = build_graphs(1, 5);
  EXPECT_EQ(gp.g1.edge_count(), 4u);
  for (std::size_t x = 0; x < 5; ++x)
    for (const Offset& o : gp.g1.predecessor_offsets)
      EXPECT_EQ(gp.g1.in_range(0, x, o), (x > 0 && o == Offset{0, -1}));
}

TEST(BuildGraphs, OffsetsAndOrders) {
  const GraphPair gp = build_graphs(4, 5);
  EXPECT_EQ(gp.g1.predecessor_offsets, (std::vector<Offset>{{0, -1}, {-1, -1}, {-1, 0}, {-1, 1}}));
  EXPECT_EQ(gp.g2.predecessor_offsets, (std::vector<Offset>{{0, 1}, {1, 1}, {1, 0}, {1, -1}}));
  EXPECT_TRUE(is_topological(gp.g1));
  EXPECT_TRUE(is_topological(gp.g2));
  const auto o1 = gp.g1.node_order(), o2 = gp.g2.node_order();
  EXPECT_TRUE(std::equal(o1.begin(), o1.end(), o2.rbegin()));
}

TEST(BuildGraphs, UnionCoversEightNeighboursOnce) {
  const GraphPair gp = build_graphs(3, 3);
  std::multiset<std::pair<int, int>> seen;
  for (const ScanGraph* g : {&gp.g1, &gp.g2}) {
    std::size_t count = 0;
    for (const Offset& o : g->predecessor_offsets)
      if (g->in_range(1, 1, o)) {
        seen.insert({o.dy, o.dx});
        ++count;
      }
    EXPECT_EQ(count, 4u);
  }
  EXPECT_EQ(seen.size(), 8u);
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      if (dy || dx) EXPECT_EQ(seen.count({dy, dx}), 1u);
}

Tensor4 guide_from_pixels(std::initializer_list<std::vector<Real>> pixels) {
  const std::size_t c = pixels.begin()->size();
  Tensor4 g(1, c, 1, pixels.size());
  std::size_t x = 0;
  for (const auto& v : pixels) {
    for (std::size_t k = 0; k < c; ++k) g(0, k, 0, x) = v[k];
    ++x;
  }
  return g;
}

TEST(RawEdgeSimilarity, CosineExamples) {
  const ScanGraph g = build_graphs(1, 2).g1;
  EXPECT_NEAR(raw_edge_similarity(guide_from_pixels({{2, 1}, {2, 1}}), 0, g).at(0, 1, 1), 1.0, 1e-15);
  EXPECT_EQ(raw_edge_similarity(guide_from_pixels({{0, 1}, {1, 0}}), 0, g).at(0, 1, 1), 0.0);
  const EdgeField r = raw_edge_similarity(guide_from_pixels({{1, 1}, {1, 0}}), 0, g);
  EXPECT_NEAR(r.at(0, 1, 1), 0.70710678, 1e-8);
  EXPECT_EQ(r.at(0, 1, 0), 1.0);
  EXPECT_EQ(r.at(0, 0, 1), 0.0);
}

TEST(NormalizeIncoming, DivideBySum) {
  const ScanGraph g = build_graphs(2, 2).g1;
  EdgeField raw(g);
  // Pixel (1, 1): left predecessor 0.5, up predecessor 0.25.
  raw.at(1, 1, 0) = 1;
  raw.at(1, 1, 1) = 0.5;
  raw.at(1, 1, 3) = 0.25;
  raw.at(1, 1, 2) = 1e-9;  // clamped up to the floor
  raw.at(0, 0, 0) = 1;
  const EdgeWeightField w = normalize_incoming(raw, g);
  const Real s = 1 + 0.5 + 0.25 + kWeightFloor;
  EXPECT_NEAR(w.at(1, 1, 0), 1 / s, 1e-15);
  EXPECT_NEAR(w.at(1, 1, 1), 0.5 / s, 1e-15);
  EXPECT_NEAR(w.at(1, 1, 3), 0.25 / s, 1e-15);
  EXPECT_NEAR(w.at(1, 1, 0), 4.0 / 7.0, 2e-6);
  EXPECT_EQ(w.at(0, 0, 0), 1.0);
  EXPECT_LT(unit_mass_violation(w, g), 1e-15);
}

TEST(NormalizeIncoming, NegativeAndOversizedValuesAreClamped) {
  const ScanGraph g = build_graphs(1, 2).g1;
  EdgeField raw(g);
  raw.at(0, 1, 0) = 1;
  raw.at(0, 1, 1) = -0.7;
  EXPECT_NEAR(normalize_incoming(raw, g).at(0, 1, 1), kWeightFloor / (1 + kWeightFloor), 1e-18);
  raw.at(0, 1, 1) = 3;
  EXPECT_DOUBLE_EQ(normalize_incoming(raw, g).at(0, 1, 1), 0.5);
}

TEST(ForwardScan, TwoNodeChain) {
  const ScanGraph g = build_graphs(1, 2).g1;
  EdgeWeightField w(g);
  w.at(0, 0, 0) = 1;
  w.at(0, 1, 0) = 0.5;
  w.at(0, 1, 1) = 0.5;
  const std::vector<Real> c{2, 4};
  EXPECT_EQ(forward_scan(c, w, g), (std::vector<Real>{2, 3}));
  const PathFilterResult bf = brute_force_path_filter(c, w, g);
  EXPECT_EQ(bf.output, (std::vector<Real>{2, 3}));
}

TEST(ForwardScan, UnitMass) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Pcg32 rng(seed);
    const std::size_t h = 1 + rng.bounded(40), w = 1 + rng.bounded(40);
    for (const ScanGraph& g : {build_graphs(h, w).g1, build_graphs(h, w).g2}) {
      const auto out = forward_scan(std::vector<Real>(h * w, 1.0), random_unit_weights(g, rng), g);
      for (Real v : out) ASSERT_NEAR(v, 1.0, 1e-12);
    }
  }
}

TEST(ForwardScan, RejectsInvalidWeights) {
  const ScanGraph g = build_graphs(2, 2).g1;
  Pcg32 rng(1);
  EdgeWeightField w = random_unit_weights(g, rng);
  w.at(1, 1, 0) += 1e-3;
  EXPECT_THROW(forward_scan(std::vector<Real>(4, 1), w, g), std::invalid_argument);
  EXPECT_NO_THROW(forward_scan(std::vector<Real>(4, 1), w, g, {.enforce_unit_mass = false}));
}

TEST(ForwardScan, MatchesPathOraclesOnSmallGrids) {
  Pcg32 rng(2);
  for (std::size_t h = 1; h <= 3; ++h)
    for (std::size_t w = 1; w <= 4; ++w)
      for (int rep = 0; rep < 50; ++rep)
        for (const ScanGraph& g : {build_graphs(h, w).g1, build_graphs(h, w).g2}) {
          const EdgeWeightField wf = random_unit_weights(g, rng);
          const auto in = random_vector(h * w, rng);
          const auto scan = forward_scan(in, wf, g);
          const PathFilterResult bf = brute_force_path_filter(in, wf, g);
          ASSERT_LT(max_abs_diff(scan, bf.output), 1e-10);
          ASSERT_LT(max_abs_diff(scan, path_sum_oracle(in, wf, g)), 1e-10);
          for (Real t : bf.total_weight) ASSERT_NEAR(t, 1.0, 1e-12);
        }
}

TEST(BruteForce, SingleNodeAndSizeLimit) {
  const ScanGraph g = build_graphs(1, 1).g1;
  EdgeWeightField w(g);
  w.at(0, 0, 0) = 1;
  EXPECT_EQ(brute_force_path_filter(std::vector<Real>{7.5}, w, g).output, std::vector<Real>{7.5});
  const ScanGraph big = build_graphs(5, 5).g1;
  EXPECT_THROW(brute_force_path_filter(std::vector<Real>(25), EdgeWeightField(big), big), std::invalid_argument);
}

TEST(BackwardScan, IdentityWeights) {
  const ScanGraph g = build_graphs(3, 4).g1;
  EdgeWeightField w(g);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 4; ++x) w.at(y, x, 0) = 1;
  Pcg32 rng(3);
  const auto in = random_vector(12, rng), up = random_vector(12, rng);
  const auto out = forward_scan(in, w, g);
  const ScanGradients gr = backward_scan(up, w, g, out, in);
  EXPECT_EQ(gr.input, up);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(gr.weights.at(i / 4, i % 4, 0), up[i] * in[i]);
}

TEST(BackwardScan, PassesGradCheck) {
  Real worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Pcg32 rng(300 + seed);
    const std::size_t h = 2 + rng.bounded(3), wd = 3 + rng.bounded(3);
    const ScanGraph g = seed % 2 ? build_graphs(h, wd).g2 : build_graphs(h, wd).g1;
    EdgeWeightField w = random_unit_weights(g, rng);
    auto in = random_vector(h * wd, rng);
    const auto up = random_vector(h * wd, rng);
    const auto out = forward_scan(in, w, g);
    const ScanGradients gr = backward_scan(up, w, g, out, in);
    auto f = [&] { return dot(forward_scan(in, w, g, {.enforce_unit_mass = false}), up); };
    const std::vector<GradTarget> t{{"input", in, gr.input}, {"weights", w.data(), gr.weights.data()}};
    worst = std::max(worst, grad_check(std::function<Real()>(f), t, {.seed = seed}).max_rel_error);
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(SimilarityBackward, ZeroGradientGivesZero) {
  Pcg32 rng(4);
  const Tensor4 guide = random_tensor({1, 3, 3, 4}, rng);
  const ScanGraph g = build_graphs(3, 4).g1;
  Tensor4 gg(guide.shape());
  similarity_backward(EdgeField(g), raw_edge_similarity(guide, 0, g), guide, 0, g, gg);
  for (Real v : gg.data()) EXPECT_EQ(v, 0.0);
}

TEST(SimilarityBackward, StationaryAtEqualVectors) {
  const Tensor4 guide = guide_from_pixels({{1, 2, -1}, {1, 2, -1}});
  const ScanGraph g = build_graphs(1, 2).g1;
  EdgeField gw(g);
  gw.at(0, 1, 1) = 1;
  Tensor4 gg(guide.shape());
  similarity_backward(gw, raw_edge_similarity(guide, 0, g), guide, 0, g, gg);
  // Only the self slot and this edge exist, so the weight gradient flows
  // through the cosine, whose gradient vanishes at equality.
  for (Real v : gg.data()) EXPECT_NEAR(v, 0.0, 1e-15);
}

bool near_floor(const EdgeField& raw) {
  for (Real r : raw.data())
    if (r != 0 && std::abs(r - kWeightFloor) < 1e-4) return true;
  return false;
}

TEST(SimilarityBackward, PassesGradCheckThroughFilter) {
  Real worst = 0;
  std::size_t used = 0;
  for (std::uint64_t seed = 0; used < 20; ++seed) {
    Pcg32 rng(400 + seed);
    Tensor4 guide = random_tensor({1, 3, 3, 4}, rng, 0.1, 1);
    const Tensor4 in = random_tensor({1, 1, 3, 4}, rng), up = random_tensor({1, 1, 3, 4}, rng);
    const GraphPair gp = build_graphs(3, 4);
    const GuideWeights gw0 = make_guide_weights(guide, 0, gp);
    if (near_floor(gw0.raw1) || near_floor(gw0.raw2)) continue;
    ++used;
    FilterSaved saved;
    nlf_forward(in, guide, 1, saved);
    Tensor4 gg(guide.shape());
    nlf_backward(up, saved, guide, gg);
    auto f = [&] {
      FilterSaved s;
      const Tensor4 out = nlf_forward(in, guide, 1, s);
      return Evaluation{dot(out.data(), up.data()), fold_clamp_pattern(0, s)};
    };
    const std::vector<GradTarget> t{{"guide", guide.data(), gg.data()}};
    worst = std::max(worst, grad_check(std::function<Evaluation()>(f), t, {.seed = seed}).max_rel_error);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Filter2d, UnitMassAndSinglePixel) {
  Pcg32 rng(5);
  const Tensor4 guide = random_tensor({2, 3, 6, 7}, rng);
  const Tensor4 out = filter_2d(Tensor4(2, 2, 6, 7, 1.0), guide);
  for (Real v : out.data()) EXPECT_NEAR(v, 1.0, 1e-12);
  const Tensor4 g1 = random_tensor({1, 3, 1, 1}, rng), x1 = random_tensor({1, 2, 1, 1}, rng);
  EXPECT_EQ(filter_2d(x1, g1).storage(), x1.storage());
}

TEST(Filter2d, EqualsTwoStagePathOracle) {
  Pcg32 rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor4 guide = random_tensor({1, 2, 3, 4}, rng);
    const auto in = random_vector(12, rng);
    const GraphPair gp = build_graphs(3, 4);
    const GuideWeights gw = make_guide_weights(guide, 0, gp);
    const auto mid = brute_force_path_filter(in, gw.w1, gp.g1).output;
    const auto expected = brute_force_path_filter(mid, gw.w2, gp.g2).output;
    EXPECT_LT(max_abs_diff(filter_2d(in, gw, gp), expected), 1e-10);
  }
}

TEST(FilterCostVolume, SliceWiseEqualsFilter2d) {
  Pcg32 rng(7);
  const Tensor4 guide = random_tensor({2, 3, 5, 6}, rng);
  const Tensor5 cost = test::random_tensor5({2, 2, 4, 5, 6}, rng);
  const Tensor5 out = filter_cost_volume(cost, guide);
  for (std::size_t n = 0; n < 2; ++n) {
    const GraphPair gp = build_graphs(5, 6);
    const GuideWeights gw = make_guide_weights(guide, n, gp);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t d = 0; d < 4; ++d) {
        const auto plane = cost.plane(n, c, d);
        const auto ref = filter_2d(std::vector<Real>(plane.begin(), plane.end()), gw, gp);
        const auto got = out.plane(n, c, d);
        EXPECT_EQ(max_abs_diff(got, ref), 0.0);
      }
  }
  const Tensor5 uniform = filter_cost_volume(Tensor5(2, 1, 3, 5, 6, 1.0), guide);
  for (Real v : uniform.data()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(FilterCostVolume, SingleDisparityReducesToFilter2d) {
  Pcg32 rng(8);
  const Tensor4 guide = random_tensor({1, 3, 4, 5}, rng);
  const Tensor5 cost = test::random_tensor5({1, 1, 1, 4, 5}, rng);
  Tensor4 as4(1, 1, 4, 5);
  std::copy(cost.data().begin(), cost.data().end(), as4.data().begin());
  EXPECT_EQ(max_abs_diff(filter_cost_volume(cost, guide).data(), filter_2d(as4, guide).data()), 0.0);
}

TEST(BatchedScan, PlanesMatchSinglePlaneScansBitwise) {
  Pcg32 rng(9);
  const std::size_t h = 7, w = 9, planes = 5;
  for (const ScanGraph& g : {build_graphs(h, w).g1, build_graphs(h, w).g2}) {
    const EdgeWeightField wf = random_unit_weights(g, rng);
    const auto in = random_vector(planes * h * w, rng), up = random_vector(planes * h * w, rng);
    std::vector<Real> out(in.size()), gin(in.size());
    forward_scan_planes(in, out, planes, wf, g);
    EdgeField gw(g);
    backward_scan_planes(up, wf, g, out, in, gin, planes, gw);
    EdgeField gw_ref(g);
    std::vector<Real> scratch;
    for (std::size_t p = 0; p < planes; ++p) {
      const std::span<const Real> ip(&in[p * h * w], h * w), upp(&up[p * h * w], h * w);
      std::vector<Real> single(h * w), gsingle(h * w);
      forward_scan_into(ip, single, wf, g);
      EXPECT_EQ(max_abs_diff(single, std::span<const Real>(&out[p * h * w], h * w)), 0.0);
      backward_scan_into(upp, wf, g, single, ip, gsingle, gw_ref, scratch);
      EXPECT_EQ(max_abs_diff(gsingle, std::span<const Real>(&gin[p * h * w], h * w)), 0.0);
    }
    EXPECT_LT(max_abs_diff(gw.data(), gw_ref.data()), 1e-12);
  }
}

TEST(NlfForward, GroupedBatchMatchesCostVolumeFilter) {
  Pcg32 rng(10);
  const Tensor4 guide = random_tensor({2, 3, 5, 6}, rng);
  const Tensor5 cost = test::random_tensor5({2, 2, 3, 5, 6}, rng);
  // Entry n*D + d of the slice batch is filtered with guide sample n.
  FilterSaved saved;
  const Tensor4 out = nlf_forward(slices_as_batch(cost), guide, 3, saved);
  const Tensor5 ref = filter_cost_volume(cost, guide);
  EXPECT_LT(max_abs_diff(batch_as_slices(out, 3).data(), ref.data()), 1e-13);
}

TEST(NlfForward, RejectsMismatchedGuide) {
  FilterSaved saved;
  EXPECT_THROW(nlf_forward(Tensor4(2, 1, 4, 4), Tensor4(1, 2, 4, 5), 1, saved), std::invalid_argument);
  EXPECT_THROW(nlf_forward(Tensor4(3, 1, 4, 4), Tensor4(2, 2, 4, 4), 1, saved), std::invalid_argument);
}

// Direct evaluation of the five-term recurrence, left to right on each row.
std::vector<Real> naive_sga_ltr(std::span<const Real> cost, std::size_t D, std::size_t h, std::size_t w,
                                const SgaWeights& sw) {
  std::vector<Real> out(cost.begin(), cost.end());
  auto at = [&](std::size_t d, std::size_t y, std::size_t x) -> Real& { return out[(d * h + y) * w + x]; };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 1; x < w; ++x) {
      Real mx = at(0, y, x - 1);
      for (std::size_t d = 1; d < D; ++d) mx = std::max(mx, at(d, y, x - 1));
      for (std::size_t d = 0; d < D; ++d) {
        Real v = sw.at(0, y, x) * cost[(d * h + y) * w + x] + sw.at(1, y, x) * at(d, y, x - 1) +
                 sw.at(4, y, x) * mx;
        if (d > 0) v += sw.at(2, y, x) * at(d - 1, y, x - 1);
        if (d + 1 < D) v += sw.at(3, y, x) * at(d + 1, y, x - 1);
        at(d, y, x) = v;
      }
    }
  return out;
}

SgaWeights random_sga_weights(std::size_t h, std::size_t w, Pcg32& rng, bool with_max) {
  SgaWeights sw(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (x == 0) {
        sw.at(0, y, x) = 1;
        continue;
      }
      Real v[5], s = 0;
      for (std::size_t t = 0; t < 5; ++t) s += v[t] = t == 4 && !with_max ? 0 : rng.uniform(0.01, 1);
      for (std::size_t t = 0; t < 5; ++t) sw.at(t, y, x) = v[t] / s;
    }
  return sw;
}

TEST(Sga, SelfWeightOneIsIdentity) {
  Pcg32 rng(11);
  SgaWeights sw(3, 4);
  std::fill(sw.maps[0].begin(), sw.maps[0].end(), 1.0);
  const auto cost = random_vector(2 * 12, rng);
  for (SgaDirection dir : {SgaDirection::LeftToRight, SgaDirection::BottomToTop})
    EXPECT_EQ(sga_recurrence(cost, 2, 3, 4, sw, dir), cost);
}

TEST(Sga, PureCopyPropagatesScanStart) {
  Pcg32 rng(12);
  const std::size_t D = 3, h = 2, w = 5;
  SgaWeights sw(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) sw.at(x == 0 ? 0 : 1, y, x) = 1;
  const auto cost = random_vector(D * h * w, rng);
  const auto out = sga_recurrence(cost, D, h, w, sw, SgaDirection::LeftToRight);
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) EXPECT_EQ(out[(d * h + y) * w + x], cost[(d * h + y) * w]);
}

TEST(Sga, MatchesNaiveRecurrenceWithMaxTerm) {
  Pcg32 rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t D = 2 + rng.bounded(4), h = 1 + rng.bounded(4), w = 2 + rng.bounded(5);
    const SgaWeights sw = random_sga_weights(h, w, rng, true);
    const auto cost = random_vector(D * h * w, rng);
    EXPECT_LT(max_abs_diff(sga_recurrence(cost, D, h, w, sw, SgaDirection::LeftToRight),
                           naive_sga_ltr(cost, D, h, w, sw)),
              1e-12);
  }
}

TEST(Sga, WithoutMaxTermEqualsScanOnDisparityLineGraph) {
  Pcg32 rng(14);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t D = 2 + rng.bounded(5), w = 2 + rng.bounded(6);
    const SgaWeights sw = random_sga_weights(1, w, rng, false);
    const auto cost = random_vector(D * w, rng);
    // Nodes (d, x) on a D x w grid, scanned column by column; predecessors
    // at x-1 with the same, lower and higher disparity.
    ScanGraph g{D, w, GraphDirection::Custom, {{0, -1}, {-1, -1}, {1, -1}}, ScanOrder::ColumnMajor};
    EdgeWeightField ew(g);
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t t = 0; t < 4; ++t) ew.at(d, x, t) = sw.at(t, 0, x);
    const auto scan = forward_scan(cost, ew, g, {.enforce_unit_mass = false});
    EXPECT_LT(max_abs_diff(scan, sga_recurrence(cost, D, 1, w, sw, SgaDirection::LeftToRight)), 1e-10);
  }
}

TEST(Sga, RejectsWeightsNotSummingToOne) {
  SgaWeights sw(1, 2);
  sw.at(0, 0, 0) = 1;
  sw.at(0, 0, 1) = 0.5;
  EXPECT_THROW(sga_recurrence(std::vector<Real>(2), 1, 1, 2, sw, SgaDirection::LeftToRight), std::invalid_argument);
}

TEST(AffinityPropagation, ZeroAffinitiesAreIdentity) {
  Pcg32 rng(15);
  const auto in = random_vector(12, rng);
  EXPECT_EQ(affinity_propagation(in, Affinities(PropagationVariant::ThreeWay, 3, 4)), in);
}

TEST(AffinityPropagation, OneWayIsChainScan) {
  Pcg32 rng(16);
  const std::size_t h = 3, w = 6;
  Affinities a(PropagationVariant::OneWay, h, w);
  for (Real& v : a.maps[0]) v = rng.uniform(0, 1);
  const auto in = random_vector(h * w, rng);
  const auto prop = affinity_propagation(in, a);
  for (std::size_t y = 0; y < h; ++y) {
    const ScanGraph chain = build_graphs(1, w).g1;
    EdgeWeightField ew(chain);
    ew.at(0, 0, 0) = 1;
    for (std::size_t x = 1; x < w; ++x) {
      ew.at(0, x, 0) = 1 - a.at(0, y, x);
      ew.at(0, x, 1) = a.at(0, y, x);
    }
    const auto row = forward_scan(std::span<const Real>(&in[y * w], w), ew, chain);
    EXPECT_LT(max_abs_diff(row, std::span<const Real>(&prop[y * w], w)), 1e-12);
  }
}

TEST(AffinityPropagation, ThreeWayMatchesScanOnColumnGraph) {
  Pcg32 rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t h = 2 + rng.bounded(4), w = 2 + rng.bounded(5);
    Affinities a(PropagationVariant::ThreeWay, h, w);
    for (std::size_t i = 0; i < h * w; ++i) {
      Real budget = 1;
      for (auto& m : a.maps) {
        const Real share = rng.uniform(0, budget / 2);
        m[i] = rng.bounded(2) ? share : -share;
        budget -= share;
      }
    }
    const auto in = random_vector(h * w, rng);
    // Independent column-by-column evaluation of the propagation rule.
    std::vector<Real> ref(in);
    for (std::size_t x = 1; x < w; ++x)
      for (std::size_t y = 0; y < h; ++y) {
        Real s = 0, acc = 0;
        for (int k = 0; k < 3; ++k) {
          const long yy = static_cast<long>(y) + k - 1;
          if (yy < 0 || yy >= static_cast<long>(h)) continue;
          s += a.at(static_cast<std::size_t>(k), y, x);
          acc += a.at(static_cast<std::size_t>(k), y, x) * ref[static_cast<std::size_t>(yy) * w + x - 1];
        }
        ref[y * w + x] = (1 - s) * in[y * w + x] + acc;
      }
    const auto scan = forward_scan(in, affinity_weights(a), affinity_graph(h, w, PropagationVariant::ThreeWay));
    EXPECT_LT(max_abs_diff(scan, ref), 1e-10);
    EXPECT_LT(max_abs_diff(affinity_propagation(in, a), ref), 1e-10);
  }
}

}  // namespace
}  // namespace dsm
