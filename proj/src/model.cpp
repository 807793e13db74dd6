// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#include "plksr/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

namespace plksr {

namespace {

constexpr std::size_t kExpansion = 2;
constexpr std::size_t kImageChannels = 3;

void require_kernel(const ConvKernel& k, std::size_t out, std::size_t in, std::size_t size, const std::string& what) {
  k.validate();
  if (k.out_channels != out || k.in_channels != in || k.k != size) {
    throw ShapeError(what + ": expected kernel (" + std::to_string(out) + "," + std::to_string(in) + "," +
                     std::to_string(size) + "x" + std::to_string(size) + "), got (" +
                     std::to_string(k.out_channels) + "," + std::to_string(k.in_channels) + "," +
                     std::to_string(k.k) + "x" + std::to_string(k.k) + ")");
  }
}

// Uniform draw in the open interval (-bound, bound) from 53 random bits.
float draw_open_uniform(std::mt19937_64& rng, float bound) {
  const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  float v = static_cast<float>(static_cast<double>(bound) * (2.0 * u - 1.0));
  if (v >= bound) v = std::nextafter(bound, 0.0f);
  if (v <= -bound) v = std::nextafter(-bound, 0.0f);
  return v;
}

}  // namespace

std::string_view to_string(MixerVariant v) {
  switch (v) {
    case MixerVariant::FFN: return "FFN";
    case MixerVariant::CCM: return "CCM";
    case MixerVariant::ICCM: return "ICCM";
    case MixerVariant::DCCM: return "DCCM";
  }
  return "?";
}

std::optional<MixerVariant> parse_mixer(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "ffn") return MixerVariant::FFN;
  if (lower == "ccm") return MixerVariant::CCM;
  if (lower == "iccm") return MixerVariant::ICCM;
  if (lower == "dccm") return MixerVariant::DCCM;
  return std::nullopt;
}

std::size_t proj_kernel_size(MixerVariant v) {
  return (v == MixerVariant::CCM || v == MixerVariant::DCCM) ? 3 : 1;
}

std::size_t agg_kernel_size(MixerVariant v) {
  return (v == MixerVariant::ICCM || v == MixerVariant::DCCM) ? 3 : 1;
}

void ModelConfig::validate() const {
  if (scale < 1) throw ShapeError("config: scale must be >= 1");
  if (n_blocks < 1) throw ShapeError("config: n_blocks must be >= 1");
  if (width < 1) throw ShapeError("config: width must be >= 1");
  if (split < 1 || split > width) {
    throw ShapeError("config: split " + std::to_string(split) + " must be in [1, " + std::to_string(width) + "]");
  }
  if (kernel % 2 == 0) throw ShapeError("config: kernel size " + std::to_string(kernel) + " must be odd");
  if (static_cast<std::uint32_t>(mixer) > 3) throw ShapeError("config: unknown mixer variant");
}

std::optional<ModelConfig> ModelConfig::preset(std::string_view name, std::size_t scale) {
  ModelConfig cfg;
  cfg.scale = scale;
  if (name == "plksr") {
    cfg.n_blocks = 28;
    cfg.kernel = 17;
    cfg.use_ea = true;
  } else if (name == "plksr-tiny") {
    cfg.n_blocks = 12;
    cfg.kernel = 13;
    cfg.use_ea = false;
  } else {
    return std::nullopt;
  }
  cfg.width = 64;
  cfg.split = 16;
  cfg.mixer = MixerVariant::DCCM;
  return cfg;
}

std::optional<std::string> preset_name(const ModelConfig& cfg) {
  for (const char* name : {"plksr", "plksr-tiny"}) {
    if (ModelConfig::preset(name, cfg.scale) == cfg) return std::string(name);
  }
  return std::nullopt;
}

std::vector<KernelSlot> kernel_layout(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.width;
  std::vector<KernelSlot> slots;
  slots.push_back({"head", c, kImageChannels, 3});
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    const std::string prefix = "blocks." + std::to_string(b) + ".";
    slots.push_back({prefix + "mixer_proj", kExpansion * c, c, proj_kernel_size(cfg.mixer)});
    slots.push_back({prefix + "mixer_agg", c, kExpansion * c, agg_kernel_size(cfg.mixer)});
    slots.push_back({prefix + "plk", cfg.split, cfg.split, cfg.kernel});
    if (cfg.use_ea) slots.push_back({prefix + "ea", c, c, 3});
    slots.push_back({prefix + "fuse", c, c, 1});
  }
  slots.push_back({"tail", kImageChannels * cfg.scale * cfg.scale, c, 3});
  return slots;
}

void for_each_kernel(const ModelWeights& weights, const std::function<void(const ConvKernel&)>& fn) {
  fn(weights.head);
  for (const auto& b : weights.blocks) {
    fn(b.mixer_proj);
    fn(b.mixer_agg);
    fn(b.plk);
    if (b.ea) fn(*b.ea);
    fn(b.fuse);
  }
  fn(weights.tail);
}

void for_each_kernel(ModelWeights& weights, const std::function<void(ConvKernel&)>& fn) {
  fn(weights.head);
  for (auto& b : weights.blocks) {
    fn(b.mixer_proj);
    fn(b.mixer_agg);
    fn(b.plk);
    if (b.ea) fn(*b.ea);
    fn(b.fuse);
  }
  fn(weights.tail);
}

void validate_weights(const ModelWeights& weights, const ModelConfig& cfg) {
  cfg.validate();
  if (weights.blocks.size() != cfg.n_blocks) {
    throw ShapeError("weights: " + std::to_string(weights.blocks.size()) + " blocks, config expects " +
                     std::to_string(cfg.n_blocks));
  }
  for (std::size_t b = 0; b < weights.blocks.size(); ++b) {
    if (weights.blocks[b].ea.has_value() != cfg.use_ea) {
      throw ShapeError("weights: block " + std::to_string(b) + (cfg.use_ea ? " lacks" : " carries") +
                       " an EA kernel but config says use_ea=" + (cfg.use_ea ? "true" : "false"));
    }
  }
  const auto slots = kernel_layout(cfg);
  std::size_t i = 0;
  for_each_kernel(weights, [&](const ConvKernel& k) {
    const auto& s = slots[i++];
    require_kernel(k, s.out_channels, s.in_channels, s.k, s.name);
  });
}

ModelWeights zero_init(const ModelConfig& cfg) {
  const auto slots = kernel_layout(cfg);
  auto it = slots.begin();
  auto next = [&] {
    const auto& s = *it++;
    return ConvKernel::zeros(s.out_channels, s.in_channels, s.k);
  };
  ModelWeights w;
  w.head = next();
  w.blocks.resize(cfg.n_blocks);
  for (auto& b : w.blocks) {
    b.mixer_proj = next();
    b.mixer_agg = next();
    b.plk = next();
    if (cfg.use_ea) b.ea = next();
    b.fuse = next();
  }
  w.tail = next();
  return w;
}

ModelWeights random_init(const ModelConfig& cfg, std::uint64_t seed) {
  ModelWeights w = zero_init(cfg);
  std::mt19937_64 rng(seed);
  for_each_kernel(w, [&](ConvKernel& k) {
    const float bound = static_cast<float>(1.0 / std::sqrt(static_cast<double>(k.in_channels * k.k * k.k)));
    for (float& v : k.weights) v = draw_open_uniform(rng, bound);
    for (float& v : k.bias) v = draw_open_uniform(rng, bound);
  });
  return w;
}

Tensor mixer_forward(const Tensor& x, MixerVariant variant, const ConvKernel& proj, const ConvKernel& agg) {
  const std::size_t c = x.channels();
  require_kernel(proj, kExpansion * c, c, proj_kernel_size(variant), std::string(to_string(variant)) + " proj");
  require_kernel(agg, c, kExpansion * c, agg_kernel_size(variant), std::string(to_string(variant)) + " agg");
  return conv2d_fast(gelu(conv2d_fast(x, proj)), agg);
}

Tensor plkc_forward(const Tensor& x, const ConvKernel& plk, std::size_t split) {
  if (split < 1 || split > x.channels()) {
    throw ShapeError("plkc_forward: split " + std::to_string(split) + " exceeds " + std::to_string(x.channels()) +
                     " channels");
  }
  plk.validate();
  if (plk.in_channels != split || plk.out_channels != split) {
    throw ShapeError("plkc_forward: kernel must map " + std::to_string(split) + " -> " + std::to_string(split) +
                     " channels");
  }
  if (split == x.channels()) return conv2d_fast(x, plk);
  Tensor global = conv2d_fast(slice_channels(x, 0, split), plk);
  Tensor identity = slice_channels(x, split, x.channels());
  const Tensor parts[] = {std::move(global), std::move(identity)};
  return concat_channels(parts);
}

Tensor ea_forward(const Tensor& x, const ConvKernel& ea) {
  require_kernel(ea, x.channels(), x.channels(), 3, "ea");
  return hadamard_mul(x, sigmoid(conv2d_fast(x, ea)));
}

Tensor block_forward(const Tensor& x, const BlockWeights& bw, const ModelConfig& cfg) {
  if (x.channels() != cfg.width) {
    throw ShapeError("block_forward: input has " + std::to_string(x.channels()) + " channels, config width is " +
                     std::to_string(cfg.width));
  }
  Tensor feat = plkc_forward(mixer_forward(x, cfg.mixer, bw.mixer_proj, bw.mixer_agg), bw.plk, cfg.split);
  if (cfg.use_ea) {
    if (!bw.ea) throw ShapeError("block_forward: use_ea is set but the block has no EA kernel");
    feat = ea_forward(feat, *bw.ea);
  }
  require_kernel(bw.fuse, cfg.width, cfg.width, 1, "fuse");
  return elementwise_add(x, conv2d_fast(feat, bw.fuse));
}

Tensor model_forward(const Tensor& img, const ModelWeights& weights, const ModelConfig& cfg) {
  if (img.channels() != kImageChannels) {
    throw ShapeError("model_forward: expected a 3-channel image, got " + img.shape().str());
  }
  validate_weights(weights, cfg);
  Tensor feat = conv2d_fast(img, weights.head);
  for (const auto& block : weights.blocks) feat = block_forward(feat, block, cfg);
  const Tensor high = conv2d_fast(feat, weights.tail);
  const Tensor low = repeat_channels(img, cfg.scale * cfg.scale);
  return pixel_shuffle(elementwise_add(high, low), cfg.scale);
}

std::uint64_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  const std::uint64_t c = cfg.width;
  const std::uint64_t c2 = kExpansion * c;
  const std::uint64_t kp = proj_kernel_size(cfg.mixer);
  const std::uint64_t ka = agg_kernel_size(cfg.mixer);
  const std::uint64_t s = cfg.split;
  const std::uint64_t K = cfg.kernel;
  const std::uint64_t tail_out = kImageChannels * cfg.scale * cfg.scale;

  const std::uint64_t head = kImageChannels * c * 9 + c;
  std::uint64_t block = (c * c2 * kp * kp + c2) + (c2 * c * ka * ka + c) + (s * s * K * K + s) + (c * c + c);
  if (cfg.use_ea) block += c * c * 9 + c;
  const std::uint64_t tail = c * tail_out * 9 + tail_out;
  return head + cfg.n_blocks * block + tail;
}

std::uint64_t count_flops(const ModelConfig& cfg, std::size_t height, std::size_t width) {
  cfg.validate();
  const std::uint64_t hw = static_cast<std::uint64_t>(height) * width;
  const std::uint64_t c = cfg.width;
  const std::uint64_t c2 = kExpansion * c;
  const std::uint64_t kp = proj_kernel_size(cfg.mixer);
  const std::uint64_t ka = agg_kernel_size(cfg.mixer);
  const std::uint64_t tail_out = kImageChannels * cfg.scale * cfg.scale;
  auto conv = [hw](std::uint64_t out, std::uint64_t in, std::uint64_t k) { return 2 * out * in * k * k * hw; };

  std::uint64_t block = conv(c2, c, kp) + c2 * hw  // proj + GELU
                        + conv(c, c2, ka)           // agg
                        + conv(cfg.split, cfg.split, cfg.kernel) + conv(c, c, 1) + c * hw;  // plk, fuse, residual
  if (cfg.use_ea) block += conv(c, c, 3) + 2 * c * hw;  // conv, sigmoid, product
  return conv(c, kImageChannels, 3) + cfg.n_blocks * block + conv(tail_out, c, 3) + tail_out * hw;
}

std::string_view flops_formula() {
  return "FLOPs = sum over convs of 2*out*in*k*k*H*W + H*W*channels per elementwise op "
         "(GELU, sigmoid, EA product, block residual, final residual add); split/concat/repeat/shuffle = 0";
}

}  // namespace plksr
