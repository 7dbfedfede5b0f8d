#pragma once

#include <cstdint>
#include <span>

#include "dsm/tensor.hpp"

namespace dsm {

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

/// Output extent of a zero-padded convolution along one axis.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, const ConvGeometry& g);

/// 2D cross-correlation with zero padding. `kernels` has extents
/// {out_c, in_c, kh, kw} with odd kh, kw; `bias` (optional) has {out_c}.
Tensor4 conv2d_forward(const Tensor4& input, const Param& kernels, const Param* bias,
                       const ConvGeometry& geometry);

/// Returns the input gradient and accumulates kernel (and bias) gradients
/// into the parameters' grad buffers.
Tensor4 conv2d_backward(const Tensor4& upstream, const Tensor4& saved_input, Param& kernels,
                        Param* bias, const ConvGeometry& geometry);

Tensor4 relu(const Tensor4& input);
Tensor4 relu_backward(const Tensor4& upstream, const Tensor4& saved_input);

/// Softmax along the disparity axis of a cost volume, max-subtracted.
Tensor5 softmax_axis(const Tensor5& logits);
/// Gradient w.r.t. the logits given the saved softmax output.
Tensor5 softmax_axis_backward(const Tensor5& upstream, const Tensor5& saved_output);

struct LossResult {
  Real loss = 0;
  Tensor4 grad;  // d loss / d pred
  std::size_t valid = 0;
};

/// Smooth-L1 (Huber with delta 1) averaged over pixels whose mask byte is
/// non-zero. `pred`/`target` are n x 1 x h x w; mask has n*h*w bytes.
LossResult smooth_l1(const Tensor4& pred, const Tensor4& target,
                     std::span<const std::uint8_t> valid_mask);

/// Folds the sign pattern of `values` into a running 64-bit signature. Used to
/// detect when a finite-difference probe crosses a ReLU kink.
std::uint64_t fold_sign_pattern(std::uint64_t signature, std::span<const Real> values);

}  // namespace dsm
