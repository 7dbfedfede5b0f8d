#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "dsm/grad_check.hpp"
#include "dsm/ops.hpp"
#include "dsm/optim.hpp"
#include "support.hpp"

namespace dsm {
namespace {

using test::dot;
using test::max_abs_diff;
using test::random_tensor;

// Direct sextuple loop over (n, oc, oy, ox, ic, ky, kx).
Tensor4 naive_conv(const Tensor4& x, const Param& w, const Param* b, std::size_t stride, std::size_t pad) {
  const std::size_t oc_n = w.extents[0], kh = w.extents[2], kw = w.extents[3];
  const std::size_t oh = (x.h() + 2 * pad - kh) / stride + 1, ow = (x.w() + 2 * pad - kw) / stride + 1;
  Tensor4 out(x.n(), oc_n, oh, ow);
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t oc = 0; oc < oc_n; ++oc)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          Real s = b ? b->value[oc] : 0;
          for (std::size_t ic = 0; ic < x.c(); ++ic)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const auto iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const auto ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(x.h()) || ix >= static_cast<long>(x.w())) continue;
                s += w.value[((oc * x.c() + ic) * kh + ky) * kw + kx] *
                     x(n, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
          out(n, oc, oy, ox) = s;
        }
  return out;
}

Param random_kernels(std::size_t oc, std::size_t ic, std::size_t kh, std::size_t kw, Pcg32& rng) {
  Param w("w", {oc, ic, kh, kw});
  for (Real& v : w.value) v = rng.uniform(-1, 1);
  return w;
}

TEST(Conv2d, CenterOfOnesIsNine) {
  const Tensor4 x(1, 1, 3, 3, 1.0);
  const Param w("w", {1, 1, 3, 3}, 1.0);
  const Tensor4 y = conv2d_forward(x, w, nullptr, {1, 1});
  ASSERT_EQ(y.shape(), (Shape4{1, 1, 3, 3}));
  EXPECT_EQ(y(0, 0, 1, 1), 9.0);
  EXPECT_EQ(y(0, 0, 0, 0), 4.0);
}

TEST(Conv2d, IdentityKernelReproducesInput) {
  Pcg32 rng(1);
  const Tensor4 x = random_tensor({2, 1, 4, 5}, rng);
  Param w("w", {1, 1, 3, 3});
  w.value[4] = 1;
  const Tensor4 y = conv2d_forward(x, w, nullptr, {1, 1});
  EXPECT_EQ(max_abs_diff(y.data(), x.data()), 0.0);
}

TEST(Conv2d, MatchesNaiveLoops) {
  Pcg32 rng(2);
  const Tensor4 x = random_tensor({1, 2, 5, 5}, rng);
  const Param w = random_kernels(3, 2, 3, 3, rng);
  const Tensor4 y = conv2d_forward(x, w, nullptr, {1, 1});
  EXPECT_LT(max_abs_diff(y.data(), naive_conv(x, w, nullptr, 1, 1).data()), 1e-12);
}

struct ConvCase {
  std::size_t kh, kw, stride, pad, h, w;
};

class ConvGeometries : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvGeometries, ForwardMatchesNaiveLoops) {
  const ConvCase c = GetParam();
  Pcg32 rng(3 + c.kh * 7 + c.stride * 11 + c.pad);
  const Tensor4 x = random_tensor({2, 3, c.h, c.w}, rng);
  const Param w = random_kernels(4, 3, c.kh, c.kw, rng);
  Param b("b", {4});
  for (Real& v : b.value) v = rng.uniform(-1, 1);
  const Tensor4 y = conv2d_forward(x, w, &b, {c.stride, c.pad});
  const Tensor4 ref = naive_conv(x, w, &b, c.stride, c.pad);
  ASSERT_EQ(y.shape(), ref.shape());
  EXPECT_LT(max_abs_diff(y.data(), ref.data()), 1e-12);
}

TEST_P(ConvGeometries, BackwardPassesGradCheck) {
  const ConvCase c = GetParam();
  Real worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Pcg32 rng(100 + seed, c.kh * 10 + c.stride);
    Tensor4 x = random_tensor({2, 2, c.h, c.w}, rng);
    Param w = random_kernels(3, 2, c.kh, c.kw, rng), b("b", {3});
    for (Real& v : b.value) v = rng.uniform(-1, 1);
    const ConvGeometry g{c.stride, c.pad};
    const Tensor4 up = random_tensor(conv2d_forward(x, w, &b, g).shape(), rng);
    const Tensor4 gx = conv2d_backward(up, x, w, &b, g);
    auto f = [&] { return dot(conv2d_forward(x, w, &b, g).data(), up.data()); };
    const std::vector<GradTarget> targets{{"x", x.data(), gx.data()}, {"w", w.value, w.grad}, {"b", b.value, b.grad}};
    worst = std::max(worst, grad_check(std::function<Real()>(f), targets, {.seed = seed}).max_rel_error);
  }
  EXPECT_LT(worst, 1e-5);
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvGeometries,
                         ::testing::Values(ConvCase{3, 3, 1, 1, 5, 6}, ConvCase{3, 3, 2, 1, 7, 6},
                                           ConvCase{1, 1, 1, 0, 4, 5}, ConvCase{5, 3, 1, 2, 6, 5},
                                           ConvCase{3, 3, 1, 0, 5, 5}, ConvCase{3, 5, 2, 2, 6, 7},
                                           ConvCase{3, 3, 3, 1, 8, 8}));

TEST(Conv2d, Linearity) {
  Pcg32 rng(4);
  const Tensor4 a = random_tensor({1, 2, 5, 6}, rng), b = random_tensor({1, 2, 5, 6}, rng);
  const Param w = random_kernels(3, 2, 3, 3, rng);
  const Real ca = 0.7, cb = -1.3;
  Tensor4 mix(a.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = ca * a.data()[i] + cb * b.data()[i];
  const Tensor4 lhs = conv2d_forward(mix, w, nullptr, {1, 1});
  const Tensor4 ya = conv2d_forward(a, w, nullptr, {1, 1}), yb = conv2d_forward(b, w, nullptr, {1, 1});
  Real worst = 0;
  for (std::size_t i = 0; i < lhs.size(); ++i)
    worst = std::max(worst, std::abs(lhs.data()[i] - (ca * ya.data()[i] + cb * yb.data()[i])));
  EXPECT_LT(worst, 1e-10);
}

TEST(Conv2d, ShapeMismatchNamesBothShapes) {
  const Tensor4 x(1, 2, 4, 4);
  const Param w("w", {1, 3, 3, 3});
  try {
    conv2d_forward(x, w, nullptr, {1, 1});
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1x2x4x4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("1x3x3x3"), std::string::npos) << msg;
  }
  EXPECT_THROW(conv2d_forward(x, Param("w", {1, 2, 2, 3}), nullptr, {1, 1}), ShapeError);
}

TEST(Conv2dBackward, ZeroUpstreamGivesZeroGradients) {
  Pcg32 rng(5);
  const Tensor4 x = random_tensor({1, 2, 4, 4}, rng);
  Param w = random_kernels(2, 2, 3, 3, rng);
  const Tensor4 gx = conv2d_backward(Tensor4(1, 2, 4, 4), x, w, nullptr, {1, 1});
  for (Real v : gx.data()) EXPECT_EQ(v, 0.0);
  for (Real v : w.grad) EXPECT_EQ(v, 0.0);
}

TEST(Conv2dBackward, IdentityKernelPassesUpstreamThrough) {
  Pcg32 rng(6);
  const Tensor4 x = random_tensor({1, 1, 4, 5}, rng), up = random_tensor({1, 1, 4, 5}, rng);
  Param w("w", {1, 1, 3, 3});
  w.value[4] = 1;
  const Tensor4 gx = conv2d_backward(up, x, w, nullptr, {1, 1});
  EXPECT_EQ(max_abs_diff(gx.data(), up.data()), 0.0);
}

TEST(Conv2dBackward, RejectsWrongUpstreamShape) {
  const Tensor4 x(1, 1, 4, 4);
  Param w("w", {1, 1, 3, 3});
  EXPECT_THROW(conv2d_backward(Tensor4(1, 1, 3, 3), x, w, nullptr, {1, 1}), ShapeError);
}

TEST(Conv2d, Deterministic) {
  Pcg32 rng(7);
  const Tensor4 x = random_tensor({2, 3, 9, 11}, rng);
  const Param w = random_kernels(4, 3, 3, 3, rng);
  const Tensor4 a = conv2d_forward(x, w, nullptr, {1, 1}), b = conv2d_forward(x, w, nullptr, {1, 1});
  EXPECT_EQ(a.storage(), b.storage());
}

TEST(Relu, Examples) {
  Tensor4 x(1, 1, 1, 3);
  x.storage() = {-1, 0, 2};
  EXPECT_EQ(relu(x).storage(), (std::vector<Real>{0, 0, 2}));
  Tensor4 x2(1, 1, 1, 2), up(1, 1, 1, 2);
  x2.storage() = {-1, 2};
  up.storage() = {5, 5};
  EXPECT_EQ(relu_backward(up, x2).storage(), (std::vector<Real>{0, 5}));
}

TEST(Relu, BackwardMatchesFiniteDifferencesAwayFromZero) {
  Pcg32 rng(8);
  Tensor4 x = random_tensor({1, 2, 3, 4}, rng);
  for (Real& v : x.data())
    if (std::abs(v) < 0.1) v = v < 0 ? -0.1 : 0.1;
  const Tensor4 up = random_tensor(x.shape(), rng);
  const Tensor4 g = relu_backward(up, x);
  auto f = [&] { return dot(relu(x).data(), up.data()); };
  const std::vector<GradTarget> t{{"x", x.data(), g.data()}};
  EXPECT_LT(grad_check(std::function<Real()>(f), t).max_rel_error, 1e-7);
}

TEST(Softmax, UniformLogits) {
  const Tensor5 p = softmax_axis(Tensor5(1, 1, 4, 2, 2, 3.0));
  for (Real v : p.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, PeakedLogits) {
  Tensor5 l(1, 1, 3, 1, 1);
  l.data()[0] = 10;
  const Tensor5 p = softmax_axis(l);
  const Real z = std::exp(10.0) + 2;
  EXPECT_NEAR(p.data()[0], std::exp(10.0) / z, 1e-15);
  EXPECT_NEAR(p.data()[0], 0.99991, 1e-5);
  EXPECT_NEAR(p.data()[1], 4.54e-5, 1e-7);
  EXPECT_NEAR(p.data()[2], 4.54e-5, 1e-7);
}

TEST(Softmax, ShiftInvariantAndNormalized) {
  Pcg32 rng(9);
  const Tensor5 l = test::random_tensor5({2, 1, 7, 3, 4}, rng, -20, 20);
  Tensor5 shifted = l;
  for (Real& v : shifted.data()) v += 123.5;
  const Tensor5 p = softmax_axis(l), q = softmax_axis(shifted);
  EXPECT_LT(max_abs_diff(p.data(), q.data()), 1e-12);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        Real s = 0;
        for (std::size_t d = 0; d < 7; ++d) {
          EXPECT_GE(p(n, 0, d, y, x), 0.0);
          s += p(n, 0, d, y, x);
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
}

TEST(Softmax, BackwardMatchesFiniteDifferences) {
  Pcg32 rng(10);
  Tensor5 l = test::random_tensor5({1, 1, 5, 2, 3}, rng, -3, 3);
  const Tensor5 up = test::random_tensor5(l.shape(), rng);
  const Tensor5 g = softmax_axis_backward(up, softmax_axis(l));
  auto f = [&] { return dot(softmax_axis(l).data(), up.data()); };
  const std::vector<GradTarget> t{{"logits", l.data(), g.data()}};
  EXPECT_LT(grad_check(std::function<Real()>(f), t).max_rel_error, 1e-7);
}

TEST(SmoothL1, AnalyticBranches) {
  Tensor4 p(1, 1, 1, 1), t(1, 1, 1, 1);
  const std::vector<std::uint8_t> m{1};
  EXPECT_EQ(smooth_l1(p, t, m).loss, 0.0);
  p.data()[0] = 0.5;
  EXPECT_DOUBLE_EQ(smooth_l1(p, t, m).loss, 0.125);
  p.data()[0] = 2;
  const LossResult r = smooth_l1(p, t, m);
  EXPECT_DOUBLE_EQ(r.loss, 1.5);
  EXPECT_DOUBLE_EQ(std::abs(r.grad.data()[0]), 1.0);
}

TEST(SmoothL1, AveragesOverValidPixelsOnly) {
  Tensor4 p(1, 1, 1, 3), t(1, 1, 1, 3);
  p.storage() = {0.5, 100, 2};
  const std::vector<std::uint8_t> m{1, 0, 1};
  const LossResult r = smooth_l1(p, t, m);
  EXPECT_DOUBLE_EQ(r.loss, (0.125 + 1.5) / 2);
  EXPECT_EQ(r.valid, 2u);
  EXPECT_EQ(r.grad.data()[1], 0.0);
  EXPECT_THROW(smooth_l1(p, t, std::vector<std::uint8_t>{0, 0, 0}), std::invalid_argument);
}

TEST(Adam, ZeroGradientLeavesValueUnchanged) {
  Param p("p", {3}, 0.5);
  adam_step(p, {});
  for (Real v : p.value) EXPECT_EQ(v, 0.5);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradient) {
  Param p("p", {2});
  p.grad = {3.0, -0.01};
  adam_step(p, {.learning_rate = 1e-3});
  EXPECT_NEAR(p.value[0], -1e-3, 1e-8);
  EXPECT_NEAR(p.value[1], 1e-3, 1e-6);
  EXPECT_EQ(p.grad, (std::vector<Real>{0, 0}));
  EXPECT_EQ(p.step_count, 1u);
}

TEST(Adam, ConstantGradientDescends) {
  Param p("p", {1}, 1.0);
  for (int i = 0; i < 100; ++i) {
    p.grad[0] = 2.0;
    adam_step(p, {});
  }
  EXPECT_LT(p.value[0], 1.0 - 0.09);
}

TEST(GradCheck, Quadratic) {
  std::vector<Real> x{3};
  const std::vector<Real> analytic{6};
  auto f = [&] { return x[0] * x[0]; };
  const std::vector<GradTarget> t{{"x", x, analytic}};
  const GradCheckReport r = grad_check(std::function<Real()>(f), t);
  EXPECT_NEAR(r.worst.numeric, 6.0, 1e-7);
  EXPECT_EQ(x[0], 3.0);
}

TEST(GradCheck, LinearIsExactToRounding) {
  std::vector<Real> x{1, 2, 3};
  const std::vector<Real> analytic{0.5, -2, 4};
  auto f = [&] { return 0.5 * x[0] - 2 * x[1] + 4 * x[2]; };
  const std::vector<GradTarget> t{{"x", x, analytic}};
  EXPECT_LT(grad_check(std::function<Real()>(f), t).max_rel_error, 1e-9);
}

TEST(GradCheck, DetectsWrongGradient) {
  std::vector<Real> x{2};
  const std::vector<Real> analytic{5};
  auto f = [&] { return x[0] * x[0]; };
  const std::vector<GradTarget> t{{"x", x, analytic}};
  EXPECT_GT(grad_check(std::function<Real()>(f), t).max_rel_error, 0.1);
}

TEST(GradCheck, RejectsNonFiniteLoss) {
  std::vector<Real> x{1};
  const std::vector<Real> analytic{0};
  auto f = [&] { return std::numeric_limits<Real>::quiet_NaN(); };
  const std::vector<GradTarget> t{{"x", x, analytic}};
  EXPECT_THROW(grad_check(std::function<Real()>(f), t), std::domain_error);
}

TEST(Tensor, SliceBatchRoundTrip) {
  Pcg32 rng(11);
  const Tensor5 v = test::random_tensor5({2, 3, 4, 2, 5}, rng);
  const Tensor4 b = slices_as_batch(v);
  EXPECT_EQ(b.shape(), (Shape4{8, 3, 2, 5}));
  EXPECT_EQ(b(1 * 4 + 2, 1, 1, 3), v(1, 1, 2, 1, 3));
  EXPECT_EQ(batch_as_slices(b, 4).data().size(), v.size());
  const Tensor5 back = batch_as_slices(b, 4);
  EXPECT_EQ(max_abs_diff(back.data(), v.data()), 0.0);
}

}  // namespace
}  // namespace dsm
