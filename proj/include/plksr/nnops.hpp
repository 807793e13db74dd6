// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "plksr/tensor.hpp"

namespace plksr {

/// Square convolution weights laid out (out, in, ky, kx) plus one bias per
/// output channel. For depthwise use, in_channels is 1 and out_channels
/// equals the input's channel count.
struct ConvKernel {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t k = 1;
  std::vector<float> weights;
  std::vector<float> bias;

  /// Zero weights and bias; throws ShapeError when k is even or a count is 0.
  static ConvKernel zeros(std::size_t out_channels, std::size_t in_channels, std::size_t k);
  /// Per-output-channel identity (1 at the center tap of channel o -> o).
  static ConvKernel identity(std::size_t channels, std::size_t k);

  float& w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
    return weights[((o * in_channels + i) * k + ky) * k + kx];
  }
  float w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return weights[((o * in_channels + i) * k + ky) * k + kx];
  }

  std::size_t param_count() const { return weights.size() + bias.size(); }
  /// Throws ShapeError when the buffers disagree with the declared shape.
  void validate() const;
  bool operator==(const ConvKernel&) const = default;
};

/// Direct six-loop convolution, stride 1, zero padding k/2, double
/// accumulation. Reference semantics for every other convolution.
Tensor conv2d_naive(const Tensor& input, const ConvKernel& kernel);

/// Same semantics as conv2d_naive, lowered to tiled im2col + SGEMM.
Tensor conv2d_fast(const Tensor& input, const ConvKernel& kernel);

/// Each channel filtered by its own k x k kernel (kernel.in_channels == 1).
Tensor depthwise_conv2d(const Tensor& input, const ConvKernel& kernel);

/// Exact erf form: x * Phi(x).
Tensor gelu(const Tensor& t);
Tensor sigmoid(const Tensor& t);

/// out[c, y*r+dy, x*r+dx] = in[c*r*r + dy*r + dx, y, x]
Tensor pixel_shuffle(const Tensor& t, std::size_t r);
/// Inverse of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& t, std::size_t r);

/// Interleaved repeat: source channel c fills output channels [c*times, (c+1)*times).
Tensor repeat_channels(const Tensor& t, std::size_t times);

/// out[c, y, x] = in[c, y / r, x / r]
Tensor nearest_upscale(const Tensor& t, std::size_t r);

/// Sets the worker thread count of the GEMM backend (n >= 1).
void set_num_threads(int n);

}  // namespace plksr
