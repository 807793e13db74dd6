// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plksr/nnops.hpp"
#include "plksr/tensor.hpp"

namespace plksr {

enum class MixerVariant : std::uint32_t { FFN = 0, CCM = 1, ICCM = 2, DCCM = 3 };

std::string_view to_string(MixerVariant v);
/// Accepts "ffn", "ccm", "iccm", "dccm" (case-insensitive).
std::optional<MixerVariant> parse_mixer(std::string_view name);
/// Spatial size of the expand / reduce convolutions for a mixer variant.
std::size_t proj_kernel_size(MixerVariant v);
std::size_t agg_kernel_size(MixerVariant v);

struct ModelConfig {
  std::size_t scale = 4;
  std::size_t n_blocks = 28;
  std::size_t width = 64;
  std::size_t split = 16;
  std::size_t kernel = 17;
  MixerVariant mixer = MixerVariant::DCCM;
  bool use_ea = true;

  /// Throws ShapeError describing the first violated constraint.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;

  /// "plksr" (28 blocks, 64ch, 16 split, 17 kernel, EA) or "plksr-tiny"
  /// (12 blocks, 64ch, 16 split, 13 kernel, no EA).
  static std::optional<ModelConfig> preset(std::string_view name, std::size_t scale);
};

/// Name of the preset a config equals (ignoring scale), if any.
std::optional<std::string> preset_name(const ModelConfig& cfg);

struct BlockWeights {
  ConvKernel mixer_proj;  // c -> 2c
  ConvKernel mixer_agg;   // 2c -> c
  ConvKernel plk;         // split -> split, kernel x kernel
  std::optional<ConvKernel> ea;  // c -> c, 3x3; present iff use_ea
  ConvKernel fuse;        // c -> c, 1x1

  bool operator==(const BlockWeights&) const = default;
};

struct ModelWeights {
  ConvKernel head;  // 3 -> c, 3x3
  std::vector<BlockWeights> blocks;
  ConvKernel tail;  // c -> 3 r^2, 3x3

  bool operator==(const ModelWeights&) const = default;
};

/// Expected (out, in, k) of one weight slot.
struct KernelSlot {
  std::string name;
  std::size_t out_channels;
  std::size_t in_channels;
  std::size_t k;

  std::size_t weight_count() const { return out_channels * in_channels * k * k; }
};

/// Every convolution of a model in the canonical file order: head, then per
/// block mixer_proj, mixer_agg, plk, ea (if enabled), fuse, then tail.
std::vector<KernelSlot> kernel_layout(const ModelConfig& cfg);

/// Visits the kernels of `weights` in kernel_layout order.
void for_each_kernel(const ModelWeights& weights, const std::function<void(const ConvKernel&)>& fn);
void for_each_kernel(ModelWeights& weights, const std::function<void(ConvKernel&)>& fn);

/// Throws ShapeError when weights do not match cfg's layout.
void validate_weights(const ModelWeights& weights, const ModelConfig& cfg);

ModelWeights zero_init(const ModelConfig& cfg);
/// Uniform(-s, s) with s = 1/sqrt(in * k * k) per kernel (weights and bias),
/// drawn from std::mt19937_64 seeded with `seed`, in canonical order.
ModelWeights random_init(const ModelConfig& cfg, std::uint64_t seed);

Tensor mixer_forward(const Tensor& x, MixerVariant variant, const ConvKernel& proj, const ConvKernel& agg);
Tensor plkc_forward(const Tensor& x, const ConvKernel& plk, std::size_t split);
Tensor ea_forward(const Tensor& x, const ConvKernel& ea);
Tensor block_forward(const Tensor& x, const BlockWeights& bw, const ModelConfig& cfg);
/// (3, H, W) in [0, 1] -> (3, H*r, W*r); not clamped.
Tensor model_forward(const Tensor& img, const ModelWeights& weights, const ModelConfig& cfg);

std::uint64_t count_params(const ModelConfig& cfg);

/// Multiply-adds count 2 per tap: 2*out*in*k*k*H*W per convolution. Each
/// elementwise op (GELU, sigmoid, product, residual add, final add) adds
/// H*W*channels. Channel moves (split, concat, repeat, shuffle) are free.
std::uint64_t count_flops(const ModelConfig& cfg, std::size_t height, std::size_t width);
std::string_view flops_formula();

}  // namespace plksr
