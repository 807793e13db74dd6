// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "plksr/nnops.hpp"
#include "plksr/tensor.hpp"

namespace plksr {

class ReparamError : public Error {
 public:
  using Error::Error;
};

/// Convolution weights with independent odd height and width, laid out
/// (out, in, ky, kx). Only the reparam code needs non-square kernels.
struct RectKernel {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kh = 1;
  std::size_t kw = 1;
  std::vector<float> weights;
  std::vector<float> bias;

  static RectKernel zeros(std::size_t out_channels, std::size_t in_channels, std::size_t kh, std::size_t kw);
  static RectKernel from_square(const ConvKernel& k);
  /// Throws ReparamError unless kh == kw.
  ConvKernel to_square() const;

  float& w(std::size_t o, std::size_t i, std::size_t y, std::size_t x) {
    return weights[((o * in_channels + i) * kh + y) * kw + x];
  }
  float w(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const {
    return weights[((o * in_channels + i) * kh + y) * kw + x];
  }

  void validate() const;
  bool operator==(const RectKernel&) const = default;
};

struct BranchSpec {
  RectKernel kernel;
  std::size_t dilation = 1;

  std::size_t effective_height() const { return (kernel.kh - 1) * dilation + 1; }
  std::size_t effective_width() const { return (kernel.kw - 1) * dilation + 1; }
};

/// Dense kernel of side (k-1)*dilation+1 with the original taps every
/// `dilation` positions; bias unchanged.
RectKernel expand_dilated(const RectKernel& kernel, std::size_t dilation);
ConvKernel expand_dilated(const ConvKernel& kernel, std::size_t dilation);

/// Expands every branch, center-embeds it in target_k x target_k and sums
/// taps and biases. Branches are summed in a canonical order, so any
/// permutation of the input list yields a bit-identical result.
ConvKernel merge_branches(std::span<const BranchSpec> branches, std::size_t target_k);

/// Direct dilated convolution of one branch with "same" zero padding
/// (effective_size / 2 per side).
Tensor branch_conv2d(const Tensor& input, const BranchSpec& branch);
/// Sum of branch_conv2d over all branches (the training-time multi-branch output).
Tensor multi_branch_conv2d(const Tensor& input, std::span<const BranchSpec> branches);

/// Kernel container (.plkt), little-endian:
///   "PLKT" | u32 version=1 | u32 count | per kernel:
///   u32 out | u32 in | u32 kh | u32 kw | f32 weights | f32 bias
void save_kernel_container(const std::filesystem::path& path, std::span<const RectKernel> kernels);
/// Throws ReparamError on malformed files.
std::vector<RectKernel> load_kernel_container(const std::filesystem::path& path);

}  // namespace plksr
