#include "dsm/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iterator>
#include <limits>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "dsm/grad_check.hpp"
#include "dsm/nonlocal_filter.hpp"
#include "dsm/norm.hpp"
#include "dsm/ops.hpp"
#include "dsm/rng.hpp"
#include "dsm/special_cases.hpp"
#include "dsm/stereo_model.hpp"

namespace dsm {

namespace {

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Tensor4 random_tensor(Shape4 s, Pcg32& rng, Real lo = -1, Real hi = 1) {
  Tensor4 t(s);
  for (Real& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// Random non-negative weights normalized to unit mass per pixel.
EdgeWeightField random_weights(const ScanGraph& g, Pcg32& rng) {
  EdgeWeightField f(g);
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) {
      Real sum = f.at(y, x, 0) = rng.uniform(0.05, 1);
      for (std::size_t k = 0; k < g.predecessor_offsets.size(); ++k)
        if (g.in_range(y, x, g.predecessor_offsets[k])) sum += f.at(y, x, k + 1) = rng.uniform();
      for (Real& v : f.pixel(y, x)) v /= sum;
    }
  return f;
}

struct Worst {
  Real value = 0;
  void update(Real v) {
    if (!(v <= value)) value = v;
  }
};

}  // namespace

CheckResult check_unit_mass(const SelftestOptions& o) {
  Pcg32 rng(o.seed, 1);
  Worst worst;
  std::size_t fields = 0;
  for (std::size_t i = 0; i < 120; ++i) {
    const std::size_t h = 1 + rng.bounded(64), w = 1 + rng.bounded(64);
    const GraphPair gp = build_graphs(h, w);
    for (const ScanGraph* g : {&gp.g1, &gp.g2}) {
      const auto out = forward_scan(std::vector<Real>(g->nodes(), 1), random_weights(*g, rng), *g);
      for (Real v : out) worst.update(std::abs(v - 1));
      ++fields;
    }
  }
  return {"unit mass", worst.value <= 1e-12,
          fmt("%.0f weight fields, max |out - 1| = %.3g", static_cast<double>(fields), worst.value)};
}

CheckResult check_path_oracle(const SelftestOptions& o) {
  Pcg32 rng(o.seed, 2);
  Worst out_err, mass_err;
  std::size_t cases = 0;
  for (std::size_t h = 1; h <= 4; ++h)
    for (std::size_t w = 1; w <= 4; ++w) {
      if (h * w > 12) continue;
      const GraphPair gp = build_graphs(h, w);
      for (std::size_t rep = 0; rep < 50; ++rep)
        for (const ScanGraph* g : {&gp.g1, &gp.g2}) {
          const EdgeWeightField wf = random_weights(*g, rng);
          std::vector<Real> in(g->nodes());
          for (Real& v : in) v = rng.uniform(-1, 1);
          const auto fast = forward_scan(in, wf, *g);
          const PathFilterResult slow = brute_force_path_filter(in, wf, *g);
          for (std::size_t p = 0; p < in.size(); ++p) {
            out_err.update(std::abs(fast[p] - slow.output[p]));
            mass_err.update(std::abs(slow.total_weight[p] - 1));
          }
          ++cases;
        }
    }
  return {"path-sum oracle", out_err.value <= 1e-10 && mass_err.value <= 1e-12,
          fmt("%.0f instances, max |scan - paths| = %.3g, max |sum W - 1| = %.3g",
              static_cast<double>(cases), out_err.value, mass_err.value)};
}

namespace {

struct FamilyResult {
  Real worst = 0;
  std::size_t seeds = 0;
  std::size_t excluded = 0;
};

/// True when some raw similarity is within 1e-4 of the lower clamp. Exact
/// zeros (zero or disjoint-support feature vectors) stay put under small
/// perturbations, and the upper clamp coincides with the cosine's maximum, so
/// neither is treated as a boundary.
bool near_clamp(const FilterSaved& s) {
  auto near = [](const EdgeField& raw) {
    for (Real r : raw.data())
      if (r != 0 && std::abs(r - kWeightFloor) < 1e-4) return true;
    return false;
  };
  for (const GuideWeights& gw : s.weights)
    if (near(gw.raw1) || near(gw.raw2)) return true;
  return false;
}

Real dot(std::span<const Real> a, std::span<const Real> b) {
  Real s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

FamilyResult grad_scan(const SelftestOptions& o) {
  FamilyResult r;
  for (std::size_t s = 0; s < o.grad_seeds; ++s) {
    Pcg32 rng(derive_seed(o.seed, 300 + s), 3);
    const std::size_t h = 2 + rng.bounded(3), w = 2 + rng.bounded(4);
    const GraphPair gp = build_graphs(h, w);
    const ScanGraph& g = s % 2 ? gp.g2 : gp.g1;
    EdgeWeightField wf = random_weights(g, rng);
    std::vector<Real> in(g.nodes()), up(g.nodes()), out(g.nodes());
    for (Real& v : in) v = rng.uniform(-1, 1);
    for (Real& v : up) v = rng.uniform(-1, 1);
    auto loss = [&] {
      forward_scan_into(in, out, wf, g);
      return dot(out, up);
    };
    loss();
    const ScanGradients grads = backward_scan(up, wf, g, out, in);
    const std::vector<GradTarget> targets{{"input", in, grads.input},
                                          {"weights", wf.data(), grads.weights.data()}};
    r.worst = std::max(r.worst, grad_check(std::function<Real()>(loss), targets, {.seed = s + 1}).max_rel_error);
    ++r.seeds;
  }
  return r;
}

FamilyResult grad_similarity(const SelftestOptions& o) {
  FamilyResult r;
  for (std::size_t s = 0; r.seeds < o.grad_seeds && s < 10 * o.grad_seeds; ++s) {
    Pcg32 rng(derive_seed(o.seed, 400 + s), 4);
    const Shape4 shape{1, 3, 3 + rng.bounded(2), 3 + rng.bounded(3)};
    Tensor4 guide = random_tensor(shape, rng, 0.1, 1);
    const Tensor4 input = random_tensor(shape, rng);
    const Tensor4 up = random_tensor(shape, rng);
    FilterSaved saved;
    auto eval = [&] {
      const Tensor4 out = nlf_forward(input, guide, 1, saved);
      return Evaluation{dot(out.data(), up.data()), fold_clamp_pattern(0, saved)};
    };
    eval();
    if (near_clamp(saved)) {
      ++r.excluded;
      continue;
    }
    Tensor4 guide_grad(shape);
    nlf_backward(up, saved, guide, guide_grad);
    const std::vector<GradTarget> targets{{"guide", guide.data(), guide_grad.data()}};
    r.worst = std::max(r.worst, grad_check(std::function<Evaluation()>(eval), targets, {.seed = s + 1}).max_rel_error);
    ++r.seeds;
  }
  return r;
}

FamilyResult grad_norm(const SelftestOptions& o) {
  FamilyResult r;
  for (std::size_t s = 0; s < o.grad_seeds; ++s) {
    Pcg32 rng(derive_seed(o.seed, 500 + s), 5);
    const Shape4 shape{2, 3, 3 + rng.bounded(3), 3 + rng.bounded(3)};
    for (NormMode mode : {NormMode::Batch, NormMode::Instance, NormMode::Domain}) {
      Tensor4 x = random_tensor(shape, rng, -2, 2);
      DnParams p("n", shape.c);
      for (Real& v : p.gamma.value) v = rng.uniform(0.5, 1.5);
      for (Real& v : p.beta.value) v = rng.uniform(-0.5, 0.5);
      const Tensor4 up = random_tensor(shape, rng);
      auto loss = [&] { return dot(dn_forward(x, p, mode).first.data(), up.data()); };
      const NormGrads g = dn_backward(up, dn_forward(x, p, mode).second, p);
      const std::vector<GradTarget> targets{
          {"x", x.data(), g.input.data()}, {"gamma", p.gamma.value, g.gamma}, {"beta", p.beta.value, g.beta}};
      r.worst = std::max(r.worst, grad_check(std::function<Real()>(loss), targets, {.seed = s + 1}).max_rel_error);
    }
    ++r.seeds;
  }
  return r;
}

FamilyResult grad_conv(const SelftestOptions& o) {
  FamilyResult r;
  for (std::size_t s = 0; s < o.grad_seeds; ++s) {
    Pcg32 rng(derive_seed(o.seed, 600 + s), 6);
    const std::size_t k = s % 2 ? 3 : 1 + 2 * rng.bounded(2);
    const ConvGeometry geom{1 + s % 2, k / 2};
    Tensor4 x = random_tensor({2, 2, 5 + rng.bounded(3), 5 + rng.bounded(3)}, rng);
    Param w("w", {3, 2, k, k}), b("b", {3});
    for (Real& v : w.value) v = rng.uniform(-1, 1);
    for (Real& v : b.value) v = rng.uniform(-1, 1);
    const Tensor4 out0 = conv2d_forward(x, w, &b, geom);
    const Tensor4 up = random_tensor(out0.shape(), rng);
    auto loss = [&] { return dot(conv2d_forward(x, w, &b, geom).data(), up.data()); };
    const Tensor4 gx = conv2d_backward(up, x, w, &b, geom);
    const std::vector<GradTarget> targets{{"x", x.data(), gx.data()}, {"w", w.value, w.grad}, {"b", b.value, b.grad}};
    r.worst = std::max(r.worst, grad_check(std::function<Real()>(loss), targets, {.seed = s + 1}).max_rel_error);
    ++r.seeds;
  }
  return r;
}

FamilyResult grad_model(const SelftestOptions& o) {
  FamilyResult r;
  for (std::size_t s = 0; r.seeds < o.grad_seeds && s < 10 * o.grad_seeds; ++s) {
    Pcg32 rng(derive_seed(o.seed, 700 + s), 7);
    ModelConfig mc;
    mc.feature_channels = 4;
    mc.feature_blocks = 2;
    mc.aggregation_channels = 3;
    mc.aggregation_kernel = s % 2 == 0 ? 3 : 1;  // cost-volume and pointwise paths
    mc.max_disparity = 8;
    mc.nlf_feature_layers = 1;
    mc.nlf_cost_layers = 1;
    mc.init_seed = derive_seed(o.seed, 800 + s);
    StereoModel model(mc);
    const Shape4 shape{2, 3, 16, 24};
    const Tensor4 left = random_tensor(shape, rng, 0, 1), right = random_tensor(shape, rng, 0, 1);
    Tensor4 gt = random_tensor({2, 1, 16, 24}, rng, 0, 7);
    std::vector<std::uint8_t> mask(gt.size());
    for (auto& m : mask) m = rng.bounded(4) != 0;

    ForwardState state;
    auto eval = [&] {
      const Tensor4 pred = model.forward(left, right, state, {true, false});
      return Evaluation{smooth_l1(pred, gt, mask).loss, state.branch_signature()};
    };
    eval();
    bool near = false;
    for (const auto& f : state.filter_saved) near = near || near_clamp(f);
    for (const auto& f : state.cost_filter_saved) near = near || near_clamp(f);
    if (near) {
      ++r.excluded;
      continue;
    }
    model.zero_grad();
    model.backward(smooth_l1(state.disparity, gt, mask).grad, state);
    // softmax(-cost) ignores a constant shift of the cost, so the last bias
    // has an exactly-zero gradient; finite differences only see noise there.
    std::vector<GradTarget> targets;
    Real shift_grad = 0;
    for (Param* p : model.parameters()) {
      if (p->name == "aggregation.conv1.bias") {
        for (Real g : p->grad) shift_grad = std::max(shift_grad, std::abs(g));
        continue;
      }
      targets.push_back({p->name, p->value, p->grad});
    }
    GradCheckOptions opts;
    opts.seed = s + 1;
    opts.max_coords_per_target = 4;
    // Loss roundoff through the full network is ~1e-15; h = 1e-4 keeps it
    // well under the tolerance for small gradients. Kinks still retry smaller.
    opts.step = 1e-4;
    const auto rep = grad_check(std::function<Evaluation()>(eval), targets, opts);
    r.worst = std::max({r.worst, rep.max_rel_error, shift_grad > 1e-12 ? Real(1) : Real(0)});
    ++r.seeds;
  }
  return r;
}

}  // namespace

CheckResult check_gradients(const SelftestOptions& o) {
  const std::pair<const char*, FamilyResult> families[] = {
      {"backward_scan", grad_scan(o)},   {"similarity_backward", grad_similarity(o)},
      {"dn_backward", grad_norm(o)},     {"conv2d_backward", grad_conv(o)},
      {"end-to-end", grad_model(o)},
  };
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [name, f] : families) {
    ok = ok && f.worst < 1e-4 && f.seeds >= o.grad_seeds;
    detail << name << " " << f.worst << " (" << f.seeds << " seeds";
    if (f.excluded) detail << ", " << f.excluded << " near clamp";
    detail << ")";
    if (&name != &families[std::size(families) - 1].first) detail << "; ";
  }
  return {"gradients", ok, detail.str()};
}

CheckResult check_domain_norm(const SelftestOptions& o) {
  Pcg32 rng(o.seed, 8);
  const Real eps = 1e-5;
  Worst norm_err, affine_err;
  bool in_range = true;
  for (int rep = 0; rep < 10; ++rep) {
    const Shape4 shape{2, 4, 6, 7};
    const Tensor4 x = random_tensor(shape, rng, -10, 10);
    const DnParams p("dn", shape.c, eps);
    const auto [y, saved] = dn_forward(x, p, NormMode::Domain);
    const std::size_t plane = shape.plane();
    for (std::size_t n = 0; n < shape.n; ++n)
      for (std::size_t i = 0; i < plane; ++i) {
        Real pre = 0, post = 0;
        for (std::size_t c = 0; c < shape.c; ++c) {
          pre += saved.x_hat.plane(n, c)[i] * saved.x_hat.plane(n, c)[i];
          post += saved.x_prime.plane(n, c)[i] * saved.x_prime.plane(n, c)[i];
        }
        if (std::sqrt(pre) <= 100 * std::sqrt(eps)) continue;
        const Real r = std::sqrt(post);
        if (r < 1 - 1e-4 || r > 1 + 4 * std::numeric_limits<Real>::epsilon()) in_range = false;
        norm_err.update(std::abs(r - 1));
      }
    // eps perturbs exact invariance by about eps |1 - 1/a^2| / (2 var), so the
    // gains stay within [0.5, 2] and the input variance is well above eps.
    Tensor4 xs(shape);
    for (std::size_t c = 0; c < shape.c; ++c) {
      const Real a = rng.uniform(0.5, 2), b = rng.uniform(-3, 3);
      for (std::size_t n = 0; n < shape.n; ++n) {
        auto src = x.plane(n, c);
        auto dst = xs.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = a * src[i] + b;
      }
    }
    const auto shifted = dn_forward(xs, p, NormMode::Domain).second;
    for (std::size_t i = 0; i < x.size(); ++i)
      affine_err.update(std::abs(shifted.x_prime.data()[i] - saved.x_prime.data()[i]));
  }

  // Norm histograms: DN features concentrate at 1; batch-normalized features
  // of a shifted input (running statistics from clean data) do not.
  const Shape4 shape{4, 8, 12, 12};
  const Tensor4 clean = random_tensor(shape, rng, 0, 1);
  Tensor4 shifted(shape);
  for (std::size_t i = 0; i < clean.size(); ++i) shifted.data()[i] = 1.4 * clean.data()[i] + 0.15;
  const std::size_t bins = 21;
  const auto dn = norm_histogram(dn_forward(shifted, DnParams("dn", shape.c, eps), NormMode::Domain).second.x_prime, bins);
  NormLayer bn("bn", NormMode::Batch, shape.c, eps, 1.0);
  bn.forward(clean, true, true);
  const auto bn_hist = norm_histogram(bn.forward(shifted, false, false).second.x_prime, bins);
  const std::size_t one = dn.bin_of(1.0);
  const Real dn_frac = static_cast<Real>(dn.counts[one]) / static_cast<Real>(dn.total());
  const Real bn_frac = static_cast<Real>(bn_hist.counts[one]) / static_cast<Real>(bn_hist.total());

  const bool ok = in_range && affine_err.value <= 1e-6 && dn_frac == 1 && bn_frac < 0.5;
  return {"domain normalization", ok,
          fmt("max |norm - 1| = %.3g, affine max diff = %.3g, ", norm_err.value, affine_err.value) +
              fmt("mass at 1.0: DN %.3f, BN (shifted) %.3f", dn_frac, bn_frac)};
}

namespace {

/// Extracts the scan line `line` of a D x h x w cost slab as a D x L grid in
/// scan order, with the matching weights as an edge field on `sga_line_graph`.
struct SgaLine {
  std::vector<Real> cost;
  EdgeWeightField weights;
  std::vector<std::size_t> pixels;  // flat y*w + x per scan step
};

ScanGraph sga_line_graph(std::size_t D, std::size_t L) {
  ScanGraph g;
  g.h = D;
  g.w = L;
  g.predecessor_offsets = {{0, -1}, {-1, -1}, {1, -1}};
  g.order = ScanOrder::ColumnMajor;
  return g;
}

SgaLine sga_line(std::span<const Real> cost, std::size_t D, std::size_t h, std::size_t w,
                 const SgaWeights& sw, SgaDirection dir, std::size_t line) {
  const bool horizontal = dir == SgaDirection::LeftToRight || dir == SgaDirection::RightToLeft;
  const bool forward = dir == SgaDirection::LeftToRight || dir == SgaDirection::TopToBottom;
  const std::size_t L = horizontal ? w : h;
  SgaLine out{std::vector<Real>(D * L), EdgeWeightField(sga_line_graph(D, L)), {}};
  for (std::size_t s = 0; s < L; ++s) {
    const std::size_t t = forward ? s : L - 1 - s;
    const std::size_t y = horizontal ? line : t, x = horizontal ? t : line;
    out.pixels.push_back(y * w + x);
    for (std::size_t d = 0; d < D; ++d) {
      out.cost[d * L + s] = cost[(d * h + y) * w + x];
      out.weights.at(d, s, 0) = sw.at(0, y, x);
      if (s == 0) continue;
      out.weights.at(d, s, 1) = sw.at(1, y, x);
      if (d > 0) out.weights.at(d, s, 2) = sw.at(2, y, x);
      if (d + 1 < D) out.weights.at(d, s, 3) = sw.at(3, y, x);
    }
  }
  return out;
}

}  // namespace

CheckResult check_special_cases(const SelftestOptions& o) {
  Pcg32 rng(o.seed, 9);
  Worst sga_err, one_err, three_err;
  const SgaDirection dirs[] = {SgaDirection::LeftToRight, SgaDirection::RightToLeft,
                               SgaDirection::TopToBottom, SgaDirection::BottomToTop};
  for (std::size_t inst = 0; inst < 24; ++inst) {
    const std::size_t D = 2 + rng.bounded(5), h = 2 + rng.bounded(5), w = 2 + rng.bounded(6);
    const SgaDirection dir = dirs[inst % 4];
    SgaWeights sw(h, w);
    const bool horizontal = dir == SgaDirection::LeftToRight || dir == SgaDirection::RightToLeft;
    const bool forward = dir == SgaDirection::LeftToRight || dir == SgaDirection::TopToBottom;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t pos = horizontal ? x : y, len = horizontal ? w : h;
        const bool start = forward ? pos == 0 : pos == len - 1;
        if (start) {
          sw.at(0, y, x) = 1;
          continue;
        }
        Real v[4], sum = 0;
        for (Real& t : v) sum += t = rng.uniform(0.01, 1);
        for (std::size_t t = 0; t < 4; ++t) sw.at(t, y, x) = v[t] / sum;
      }
    std::vector<Real> cost(D * h * w);
    for (Real& c : cost) c = rng.uniform(-1, 1);
    const auto sga = sga_recurrence(cost, D, h, w, sw, dir);
    const std::size_t lines = horizontal ? h : w;
    for (std::size_t line = 0; line < lines; ++line) {
      const SgaLine sl = sga_line(cost, D, h, w, sw, dir, line);
      const ScanGraph g = sga_line_graph(D, sl.pixels.size());
      const auto scan = forward_scan(sl.cost, sl.weights, g, {.enforce_unit_mass = false});
      const std::size_t L = sl.pixels.size();
      for (std::size_t s = 0; s < L; ++s)
        for (std::size_t d = 0; d < D; ++d)
          sga_err.update(std::abs(scan[d * L + s] - sga[d * h * w + sl.pixels[s]]));
    }

    for (PropagationVariant v : {PropagationVariant::OneWay, PropagationVariant::ThreeWay}) {
      Affinities a(v, h, w);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          Real budget = rng.uniform(0, 1);
          for (auto& m : a.maps) {
            const Real share = rng.uniform(0, budget);
            m[y * w + x] = rng.bounded(2) ? share : -share;
            budget -= share;
          }
        }
      std::vector<Real> in(h * w);
      for (Real& c : in) c = rng.uniform(-1, 1);
      const auto prop = affinity_propagation(in, a);
      const auto scan = forward_scan(in, affinity_weights(a), affinity_graph(h, w, v));
      Worst& e = v == PropagationVariant::OneWay ? one_err : three_err;
      for (std::size_t i = 0; i < in.size(); ++i) e.update(std::abs(prop[i] - scan[i]));
    }
  }
  const bool ok = sga_err.value <= 1e-10 && one_err.value <= 1e-10 && three_err.value <= 1e-10;
  return {"special cases", ok,
          fmt("24 instances; SGA %.3g, one-way %.3g, three-way %.3g", sga_err.value, one_err.value,
              three_err.value)};
}

CheckResult check_linear_complexity(const SelftestOptions& o) {
  Pcg32 rng(o.seed, 10);
  const std::size_t sides[] = {64, 128, 256, 512};
  std::vector<Real> n, t;
  for (std::size_t side : sides) {
    const GraphPair gp = build_graphs(side, side);
    const EdgeWeightField w1 = random_weights(gp.g1, rng), w2 = random_weights(gp.g2, rng);
    std::vector<Real> in(side * side), mid(in.size()), out(in.size());
    for (Real& v : in) v = rng.uniform(-1, 1);
    // Every timed batch covers about a million pixels; best of 7 batches.
    const std::size_t reps = std::max<std::size_t>(1, std::size_t{4} * 512 * 512 / (side * side));
    double best = 1e300;
    for (int batch = 0; batch < 7; ++batch) {
      const auto start = std::chrono::steady_clock::now();
      for (std::size_t r = 0; r < reps; ++r) {
        forward_scan_into(in, mid, w1, gp.g1);
        forward_scan_into(mid, out, w2, gp.g2);
      }
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
      best = std::min(best, dt.count() / static_cast<double>(reps));
    }
    n.push_back(static_cast<Real>(side * side));
    t.push_back(best);
  }
  const Real mn = std::accumulate(n.begin(), n.end(), 0.0) / 4, mt = std::accumulate(t.begin(), t.end(), 0.0) / 4;
  Real sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    sxy += (n[i] - mn) * (t[i] - mt);
    sxx += (n[i] - mn) * (n[i] - mn);
    syy += (t[i] - mt) * (t[i] - mt);
  }
  const Real r2 = sxy * sxy / (sxx * syy);
  std::string per_size;
  for (std::size_t i = 0; i < t.size(); ++i)
    per_size += fmt(i ? ", %.0f^2 %.3g ms" : " (%.0f^2 %.3g ms", static_cast<double>(sides[i]), t[i] * 1e3);
  return {"linear complexity", r2 > 0.99,
          fmt("R^2 = %.5f, %.3g s per megapixel", r2, sxy / sxx * 1e6) + per_size + ")"};
}

std::vector<CheckResult> run_selftest(const SelftestOptions& o) {
  return {check_unit_mass(o), check_path_oracle(o), check_gradients(o),
          check_domain_norm(o), check_special_cases(o), check_linear_complexity(o)};
}

}  // namespace dsm
