#include "dsm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace dsm {

namespace {

struct ConvDims {
  std::size_t out_c, in_c, kh, kw;
};

ConvDims check_conv(const Tensor4& input, const Param& kernels, const Param* bias) {
  if (kernels.extents.size() != 4)
    throw ShapeError("conv2d: kernel parameter '" + kernels.name + "' must have rank 4");
  ConvDims d{kernels.extents[0], kernels.extents[1], kernels.extents[2], kernels.extents[3]};
  if (d.kh % 2 == 0 || d.kw % 2 == 0)
    throw ShapeError("conv2d: kernel extents must be odd, got " + std::to_string(d.kh) + "x" +
                     std::to_string(d.kw));
  if (input.c() != d.in_c)
    throw ShapeError("conv2d: input " + to_string(input.shape()) + " does not match kernels [" +
                     std::to_string(d.out_c) + "x" + std::to_string(d.in_c) + "x" +
                     std::to_string(d.kh) + "x" + std::to_string(d.kw) + "]");
  if (bias && (bias->extents.size() != 1 || bias->extents[0] != d.out_c))
    throw ShapeError("conv2d: bias '" + bias->name + "' must have extent " +
                     std::to_string(d.out_c));
  return d;
}

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

struct ConvLayout {
  ConvDims d;
  std::size_t ih, iw, oh, ow;
  ConvGeometry g;

  std::size_t rows() const { return d.in_c * d.kh * d.kw; }
  std::size_t cols() const { return oh * ow; }
};

// Visits (column row, input row) pairs of one sample: col[r][oy*ow + ox] is
// input[ic][oy*s + ky - pad][ox*s + kx - pad] for in-range taps.
template <class F>
void for_each_tap(const ConvLayout& l, F&& f) {
  const auto pad = static_cast<std::ptrdiff_t>(l.g.pad);
  const auto s = static_cast<std::ptrdiff_t>(l.g.stride);
  for (std::size_t ic = 0; ic < l.d.in_c; ++ic)
    for (std::size_t ky = 0; ky < l.d.kh; ++ky)
      for (std::size_t kx = 0; kx < l.d.kw; ++kx) {
        const std::size_t r = (ic * l.d.kh + ky) * l.d.kw + kx;
        const auto off = static_cast<std::ptrdiff_t>(kx) - pad;
        // Output columns whose input column lies in [0, iw).
        const std::ptrdiff_t first = off < 0 ? (-off + s - 1) / s : 0;
        const std::ptrdiff_t last_in = static_cast<std::ptrdiff_t>(l.iw) - 1 - off;
        const std::ptrdiff_t last =
            last_in < 0 ? -1 : std::min(last_in / s, static_cast<std::ptrdiff_t>(l.ow) - 1);
        for (std::size_t oy = 0; oy < l.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy) * s + static_cast<std::ptrdiff_t>(ky) - pad;
          const bool row_ok = iy >= 0 && iy < static_cast<std::ptrdiff_t>(l.ih);
          f(r, ic, oy, row_ok ? iy : -1, first, last, off);
        }
      }
}

void im2col(const Real* in, const ConvLayout& l, Real* col) {
  const std::size_t plane = l.ih * l.iw, p = l.cols();
  const auto s = static_cast<std::ptrdiff_t>(l.g.stride);
  for_each_tap(l, [&](std::size_t r, std::size_t ic, std::size_t oy, std::ptrdiff_t iy,
                      std::ptrdiff_t first, std::ptrdiff_t last, std::ptrdiff_t off) {
    Real* dst = col + r * p + oy * l.ow;
    std::fill(dst, dst + l.ow, Real{0});
    if (iy < 0) return;
    const Real* src = in + ic * plane + static_cast<std::size_t>(iy) * l.iw;
    for (std::ptrdiff_t ox = first; ox <= last; ++ox) dst[ox] = src[ox * s + off];
  });
}

void col2im_add(const Real* col, const ConvLayout& l, Real* in) {
  const std::size_t plane = l.ih * l.iw, p = l.cols();
  const auto s = static_cast<std::ptrdiff_t>(l.g.stride);
  for_each_tap(l, [&](std::size_t r, std::size_t ic, std::size_t oy, std::ptrdiff_t iy,
                      std::ptrdiff_t first, std::ptrdiff_t last, std::ptrdiff_t off) {
    if (iy < 0) return;
    const Real* src = col + r * p + oy * l.ow;
    Real* dst = in + ic * plane + static_cast<std::size_t>(iy) * l.iw;
    for (std::ptrdiff_t ox = first; ox <= last; ++ox) dst[ox * s + off] += src[ox];
  });
}

// Stride-1 convolution as one GEMM per tap. Inputs are zero-padded and the
// output is computed on the padded-width grid, so that tap (ky, kx) reads a
// strided view starting at ky*pw + kx. Columns past ow in each row are junk.
struct ShiftedConv {
  ConvLayout l;
  std::size_t ph, pw, plane, span;

  explicit ShiftedConv(const ConvLayout& layout)
      : l(layout),
        ph(l.ih + 2 * l.g.pad),
        pw(l.iw + 2 * l.g.pad),
        plane(ph * pw),
        span((l.oh - 1) * pw + l.ow) {}

  std::size_t taps() const { return l.d.kh * l.d.kw; }
  std::size_t offset(std::size_t t) const { return (t / l.d.kw) * pw + t % l.d.kw; }

  // Kernel taps as contiguous (out_c x in_c) blocks.
  std::vector<Real> tap_weights(const std::vector<Real>& w) const {
    std::vector<Real> out(w.size());
    const std::size_t kk = taps(), cin = l.d.in_c;
    for (std::size_t oc = 0; oc < l.d.out_c; ++oc)
      for (std::size_t ic = 0; ic < cin; ++ic)
        for (std::size_t t = 0; t < kk; ++t)
          out[(t * l.d.out_c + oc) * cin + ic] = w[(oc * cin + ic) * kk + t];
    return out;
  }

  void pad_input(const Real* in, Real* dst) const {
    std::fill(dst, dst + l.d.in_c * plane, Real{0});
    for (std::size_t ic = 0; ic < l.d.in_c; ++ic)
      for (std::size_t y = 0; y < l.ih; ++y)
        std::copy_n(in + (ic * l.ih + y) * l.iw, l.iw, dst + ic * plane + (y + l.g.pad) * pw + l.g.pad);
  }

  ConstStridedMap input_view(const Real* padded, std::size_t t) const {
    return {padded + offset(t), static_cast<Eigen::Index>(l.d.in_c), static_cast<Eigen::Index>(span),
            Eigen::OuterStride<>(static_cast<Eigen::Index>(plane))};
  }
};

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, const ConvGeometry& g) {
  if (g.stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  if (in + 2 * g.pad < kernel) return 0;
  return (in + 2 * g.pad - kernel) / g.stride + 1;
}

Tensor4 conv2d_forward(const Tensor4& input, const Param& kernels, const Param* bias,
                       const ConvGeometry& g) {
  const ConvLayout l{check_conv(input, kernels, bias), input.h(), input.w(),
                     conv_out_extent(input.h(), kernels.extents[2], g),
                     conv_out_extent(input.w(), kernels.extents[3], g), g};
  Tensor4 out(input.n(), l.d.out_c, l.oh, l.ow);
  const std::size_t k = l.rows(), p = l.cols();
  if (p == 0) return out;
  const auto rows_out = static_cast<Eigen::Index>(l.d.out_c);
  if (g.stride == 1) {
    const ShiftedConv sc(l);
    const std::vector<Real> wt = sc.tap_weights(kernels.value);
    std::vector<Real> padded(g.pad == 0 ? 0 : l.d.in_c * sc.plane), wide(l.d.out_c * sc.span);
    for (std::size_t n = 0; n < input.n(); ++n) {
      const Real* src = &input.plane(n, 0)[0];
      if (g.pad != 0) {
        sc.pad_input(src, padded.data());
        src = padded.data();
      }
      MatrixMap acc(wide.data(), rows_out, static_cast<Eigen::Index>(sc.span));
      acc.setZero();
      for (std::size_t t = 0; t < sc.taps(); ++t)
        acc.noalias() += ConstMatrixMap(&wt[t * l.d.out_c * l.d.in_c], rows_out,
                                        static_cast<Eigen::Index>(l.d.in_c)) *
                         sc.input_view(src, t);
      for (std::size_t oc = 0; oc < l.d.out_c; ++oc) {
        auto o = out.plane(n, oc);
        const Real b = bias ? bias->value[oc] : Real{0};
        for (std::size_t oy = 0; oy < l.oh; ++oy) {
          const Real* row = &wide[oc * sc.span + oy * sc.pw];
          for (std::size_t ox = 0; ox < l.ow; ++ox) o[oy * l.ow + ox] = row[ox] + b;
        }
      }
    }
    return out;
  }
  const ConstMatrixMap w(kernels.value.data(), rows_out, static_cast<Eigen::Index>(k));
  std::vector<Real> col(k * p);
  for (std::size_t n = 0; n < input.n(); ++n) {
    im2col(&input.plane(n, 0)[0], l, col.data());
    MatrixMap o(&out.plane(n, 0)[0], rows_out, static_cast<Eigen::Index>(p));
    o.noalias() = w * ConstMatrixMap(col.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
    if (bias)
      for (std::size_t oc = 0; oc < l.d.out_c; ++oc) o.row(static_cast<Eigen::Index>(oc)).array() += bias->value[oc];
  }
  return out;
}

Tensor4 conv2d_backward(const Tensor4& upstream, const Tensor4& saved_input, Param& kernels,
                        Param* bias, const ConvGeometry& g) {
  const ConvLayout l{check_conv(saved_input, kernels, bias), saved_input.h(), saved_input.w(),
                     conv_out_extent(saved_input.h(), kernels.extents[2], g),
                     conv_out_extent(saved_input.w(), kernels.extents[3], g), g};
  const Shape4 expected{saved_input.n(), l.d.out_c, l.oh, l.ow};
  if (upstream.shape() != expected)
    throw ShapeError("conv2d_backward: upstream " + to_string(upstream.shape()) +
                     " does not match forward output " + to_string(expected));
  Tensor4 grad_in(saved_input.shape());
  const std::size_t k = l.rows(), p = l.cols();
  if (p == 0) return grad_in;
  const auto rows_out = static_cast<Eigen::Index>(l.d.out_c);
  const auto rows_k = static_cast<Eigen::Index>(k), cols_p = static_cast<Eigen::Index>(p);
  if (g.stride == 1) {
    const ShiftedConv sc(l);
    const auto rows_in = static_cast<Eigen::Index>(l.d.in_c), cols_s = static_cast<Eigen::Index>(sc.span);
    const std::size_t block = l.d.out_c * l.d.in_c;
    const std::vector<Real> wt = sc.tap_weights(kernels.value);
    std::vector<Real> gwt(wt.size(), Real{0});
    std::vector<Real> padded(g.pad == 0 ? 0 : l.d.in_c * sc.plane), gpad(l.d.in_c * sc.plane);
    std::vector<Real> wide(l.d.out_c * sc.span, Real{0});
    for (std::size_t n = 0; n < saved_input.n(); ++n) {
      for (std::size_t oc = 0; oc < l.d.out_c; ++oc) {
        const auto up = upstream.plane(n, oc);
        Real bsum = 0;
        for (std::size_t oy = 0; oy < l.oh; ++oy) {
          Real* row = &wide[oc * sc.span + oy * sc.pw];
          for (std::size_t ox = 0; ox < l.ow; ++ox) {
            row[ox] = up[oy * l.ow + ox];
            bsum += row[ox];
          }
        }
        if (bias) bias->grad[oc] += bsum;
      }
      const Real* src = &saved_input.plane(n, 0)[0];
      if (g.pad != 0) {
        sc.pad_input(src, padded.data());
        src = padded.data();
      }
      std::fill(gpad.begin(), gpad.end(), Real{0});
      const ConstMatrixMap up(wide.data(), rows_out, cols_s);
      for (std::size_t t = 0; t < sc.taps(); ++t) {
        MatrixMap(&gwt[t * block], rows_out, rows_in).noalias() += up * sc.input_view(src, t).transpose();
        StridedMap(&gpad[sc.offset(t)], rows_in, cols_s, Eigen::OuterStride<>(static_cast<Eigen::Index>(sc.plane)))
            .noalias() += ConstMatrixMap(&wt[t * block], rows_out, rows_in).transpose() * up;
      }
      Real* gin = &grad_in.plane(n, 0)[0];
      for (std::size_t ic = 0; ic < l.d.in_c; ++ic)
        for (std::size_t y = 0; y < l.ih; ++y)
          std::copy_n(&gpad[ic * sc.plane + (y + g.pad) * sc.pw + g.pad], l.iw, gin + (ic * l.ih + y) * l.iw);
    }
    const std::size_t kk = sc.taps();
    for (std::size_t oc = 0; oc < l.d.out_c; ++oc)
      for (std::size_t ic = 0; ic < l.d.in_c; ++ic)
        for (std::size_t t = 0; t < kk; ++t)
          kernels.grad[(oc * l.d.in_c + ic) * kk + t] += gwt[(t * l.d.out_c + oc) * l.d.in_c + ic];
    return grad_in;
  }
  const ConstMatrixMap w(kernels.value.data(), rows_out, rows_k);
  MatrixMap gw(kernels.grad.data(), rows_out, rows_k);
  std::vector<Real> col(k * p), gcol(k * p);
  for (std::size_t n = 0; n < saved_input.n(); ++n) {
    const ConstMatrixMap up(&upstream.plane(n, 0)[0], rows_out, cols_p);
    if (bias)
      for (std::size_t oc = 0; oc < l.d.out_c; ++oc) bias->grad[oc] += up.row(static_cast<Eigen::Index>(oc)).sum();
    im2col(&saved_input.plane(n, 0)[0], l, col.data());
    gw.noalias() += up * ConstMatrixMap(col.data(), rows_k, cols_p).transpose();
    MatrixMap(gcol.data(), rows_k, cols_p).noalias() = w.transpose() * up;
    col2im_add(gcol.data(), l, &grad_in.plane(n, 0)[0]);
  }
  return grad_in;
}

Tensor4 relu(const Tensor4& input) {
  Tensor4 out(input.shape());
  auto src = input.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0 ? src[i] : Real(0);
  return out;
}

Tensor4 relu_backward(const Tensor4& upstream, const Tensor4& saved_input) {
  require_same_shape(upstream, saved_input, "relu_backward");
  Tensor4 out(upstream.shape());
  auto up = upstream.data();
  auto x = saved_input.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < up.size(); ++i) dst[i] = x[i] > 0 ? up[i] : Real(0);
  return out;
}

Tensor5 softmax_axis(const Tensor5& logits) {
  if (logits.d() == 0) throw ShapeError("softmax_axis: empty disparity axis");
  Tensor5 out(logits.shape());
  const std::size_t plane = logits.h() * logits.w();
  const std::size_t D = logits.d();
  std::vector<Real> mx(plane), sum(plane);
  for (std::size_t n = 0; n < logits.n(); ++n) {
    for (std::size_t c = 0; c < logits.c(); ++c) {
      std::fill(mx.begin(), mx.end(), -std::numeric_limits<Real>::infinity());
      std::fill(sum.begin(), sum.end(), 0);
      for (std::size_t d = 0; d < D; ++d) {
        auto l = logits.plane(n, c, d);
        for (std::size_t i = 0; i < plane; ++i) mx[i] = std::max(mx[i], l[i]);
      }
      for (std::size_t d = 0; d < D; ++d) {
        auto l = logits.plane(n, c, d);
        auto o = out.plane(n, c, d);
        for (std::size_t i = 0; i < plane; ++i) {
          o[i] = std::exp(l[i] - mx[i]);
          sum[i] += o[i];
        }
      }
      for (std::size_t d = 0; d < D; ++d) {
        auto o = out.plane(n, c, d);
        for (std::size_t i = 0; i < plane; ++i) o[i] /= sum[i];
      }
    }
  }
  return out;
}

Tensor5 softmax_axis_backward(const Tensor5& upstream, const Tensor5& saved_output) {
  if (upstream.shape() != saved_output.shape())
    throw ShapeError("softmax_axis_backward: shape mismatch " + to_string(upstream.shape()) +
                     " vs " + to_string(saved_output.shape()));
  Tensor5 out(upstream.shape());
  const std::size_t plane = upstream.h() * upstream.w();
  std::vector<Real> dot(plane);
  for (std::size_t n = 0; n < upstream.n(); ++n) {
    for (std::size_t c = 0; c < upstream.c(); ++c) {
      std::fill(dot.begin(), dot.end(), 0);
      for (std::size_t d = 0; d < upstream.d(); ++d) {
        auto g = upstream.plane(n, c, d);
        auto p = saved_output.plane(n, c, d);
        for (std::size_t i = 0; i < plane; ++i) dot[i] += g[i] * p[i];
      }
      for (std::size_t d = 0; d < upstream.d(); ++d) {
        auto g = upstream.plane(n, c, d);
        auto p = saved_output.plane(n, c, d);
        auto o = out.plane(n, c, d);
        for (std::size_t i = 0; i < plane; ++i) o[i] = p[i] * (g[i] - dot[i]);
      }
    }
  }
  return out;
}

LossResult smooth_l1(const Tensor4& pred, const Tensor4& target,
                     std::span<const std::uint8_t> valid_mask) {
  require_same_shape(pred, target, "smooth_l1");
  if (pred.c() != 1) throw ShapeError("smooth_l1: expected single-channel maps, got " +
                                      to_string(pred.shape()));
  if (valid_mask.size() != pred.size())
    throw ShapeError("smooth_l1: mask has " + std::to_string(valid_mask.size()) +
                     " entries, maps have " + std::to_string(pred.size()));
  LossResult r;
  r.grad = Tensor4(pred.shape());
  auto p = pred.data();
  auto t = target.data();
  for (std::size_t i = 0; i < p.size(); ++i)
    if (valid_mask[i]) ++r.valid;
  if (r.valid == 0) throw std::invalid_argument("smooth_l1: no valid pixels");
  const Real inv = Real(1) / static_cast<Real>(r.valid);
  auto g = r.grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!valid_mask[i]) continue;
    const Real e = p[i] - t[i];
    const Real a = std::abs(e);
    if (a < 1) {
      r.loss += 0.5 * e * e;
      g[i] = e * inv;
    } else {
      r.loss += a - 0.5;
      g[i] = (e > 0 ? 1 : -1) * inv;
    }
  }
  r.loss *= inv;
  return r;
}

std::uint64_t fold_sign_pattern(std::uint64_t signature, std::span<const Real> values) {
  // FNV-1a over one bit per element, packed eight at a time.
  constexpr std::uint64_t prime = 1099511628211ull;
  std::uint8_t byte = 0;
  std::size_t bits = 0;
  for (Real v : values) {
    byte = static_cast<std::uint8_t>((byte << 1) | (v > 0 ? 1 : 0));
    if (++bits == 8) {
      signature = (signature ^ byte) * prime;
      byte = 0;
      bits = 0;
    }
  }
  if (bits) signature = (signature ^ byte) * prime;
  return (signature ^ values.size()) * prime;
}

}  // namespace dsm
