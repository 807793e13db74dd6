// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "plksr/model.hpp"
#include "support.hpp"

using namespace plksr;
using plksr::testing::random_kernel;
using plksr::testing::random_tensor;

namespace {

constexpr MixerVariant kVariants[] = {MixerVariant::FFN, MixerVariant::CCM, MixerVariant::ICCM, MixerVariant::DCCM};

ModelConfig small_config(MixerVariant mixer = MixerVariant::DCCM, bool ea = true, std::size_t scale = 2) {
  ModelConfig cfg;
  cfg.scale = scale;
  cfg.n_blocks = 2;
  cfg.width = 8;
  cfg.split = 3;
  cfg.kernel = 5;
  cfg.mixer = mixer;
  cfg.use_ea = ea;
  return cfg;
}

// Parameter total by walking every field of materialized weights.
std::uint64_t enumerate_params(const ModelWeights& w) {
  auto n = [](const ConvKernel& k) { return static_cast<std::uint64_t>(k.weights.size() + k.bias.size()); };
  std::uint64_t total = n(w.head) + n(w.tail);
  for (const auto& b : w.blocks) {
    total += n(b.mixer_proj) + n(b.mixer_agg) + n(b.plk) + n(b.fuse);
    if (b.ea) total += n(*b.ea);
  }
  return total;
}

}  // namespace

TEST_CASE("presets") {
  const auto full = ModelConfig::preset("plksr", 4);
  REQUIRE(full);
  CHECK(full->n_blocks == 28);
  CHECK(full->width == 64);
  CHECK(full->split == 16);
  CHECK(full->kernel == 17);
  CHECK(full->mixer == MixerVariant::DCCM);
  CHECK(full->use_ea);

  const auto tiny = ModelConfig::preset("plksr-tiny", 2);
  REQUIRE(tiny);
  CHECK(tiny->n_blocks == 12);
  CHECK(tiny->width == 64);
  CHECK(tiny->split == 16);
  CHECK(tiny->kernel == 13);
  CHECK_FALSE(tiny->use_ea);

  CHECK_FALSE(ModelConfig::preset("edsr", 2));
  CHECK(preset_name(*tiny) == "plksr-tiny");
  CHECK_FALSE(preset_name(small_config()));
}

TEST_CASE("config validation") {
  ModelConfig cfg = small_config();
  cfg.split = 9;
  CHECK_THROWS_AS(cfg.validate(), ShapeError);
  cfg = small_config();
  cfg.kernel = 4;
  CHECK_THROWS_AS(cfg.validate(), ShapeError);
  cfg = small_config();
  cfg.n_blocks = 0;
  CHECK_THROWS_AS(cfg.validate(), ShapeError);
}

TEST_CASE("mixer variants: shape law and zero projection") {
  std::mt19937_64 rng(30);
  const std::size_t c = 6;
  const Tensor x = random_tensor({c, 9, 7}, rng);
  for (MixerVariant v : kVariants) {
    const ConvKernel proj = random_kernel(2 * c, c, proj_kernel_size(v), rng, 0.2f);
    ConvKernel agg = random_kernel(c, 2 * c, agg_kernel_size(v), rng, 0.2f);
    CHECK(mixer_forward(x, v, proj, agg).shape() == x.shape());

    const ConvKernel zero_proj = ConvKernel::zeros(2 * c, c, proj_kernel_size(v));
    const Tensor out = mixer_forward(x, v, zero_proj, agg);
    for (std::size_t o = 0; o < c; ++o)
      for (float val : out.channel(o)) CHECK(val == agg.bias[o]);

    CHECK_THROWS_AS(mixer_forward(x, v, ConvKernel::zeros(2 * c, c, 5), agg), ShapeError);
  }
  CHECK(proj_kernel_size(MixerVariant::DCCM) == 3);
  CHECK(agg_kernel_size(MixerVariant::DCCM) == 3);
  CHECK(proj_kernel_size(MixerVariant::CCM) == 3);
  CHECK(agg_kernel_size(MixerVariant::CCM) == 1);
  CHECK(proj_kernel_size(MixerVariant::ICCM) == 1);
  CHECK(agg_kernel_size(MixerVariant::ICCM) == 3);
  CHECK(proj_kernel_size(MixerVariant::FFN) == 1);
  CHECK(agg_kernel_size(MixerVariant::FFN) == 1);
}

TEST_CASE("DCCM wired as identity through the expansion computes GELU") {
  std::mt19937_64 rng(31);
  const std::size_t c = 5;
  const Tensor x = random_tensor({c, 8, 8}, rng, -3.0f, 3.0f);
  ConvKernel proj = ConvKernel::zeros(2 * c, c, 3);
  ConvKernel agg = ConvKernel::zeros(c, 2 * c, 3);
  for (std::size_t i = 0; i < c; ++i) {
    proj.w(i, i, 1, 1) = 1.0f;
    agg.w(i, i, 1, 1) = 1.0f;
  }
  const Tensor out = mixer_forward(x, MixerVariant::DCCM, proj, agg);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    CHECK(std::abs(out.data()[i] - v * plksr::testing::normal_cdf_series(v)) <= 1e-5);
  }
}

TEST_CASE("plkc_forward") {
  std::mt19937_64 rng(32);
  const Tensor x = random_tensor({10, 12, 11}, rng);

  const ConvKernel full = random_kernel(10, 10, 5, rng, 0.1f);
  CHECK(plkc_forward(x, full, 10) == conv2d_fast(x, full));
  CHECK(plkc_forward(x, ConvKernel::identity(4, 7), 4) == x);
  CHECK_THROWS_AS(plkc_forward(x, ConvKernel::zeros(11, 11, 3), 11), ShapeError);

  // Embedded full-width oracle: plk in the top-left block, center-tap identity for the rest.
  const std::size_t split = 4;
  const ConvKernel plk = random_kernel(split, split, 7, rng, 0.1f);
  ConvKernel embedded = ConvKernel::zeros(10, 10, 7);
  for (std::size_t o = 0; o < 10; ++o) {
    if (o < split) {
      embedded.bias[o] = plk.bias[o];
      for (std::size_t i = 0; i < split; ++i)
        for (std::size_t ky = 0; ky < 7; ++ky)
          for (std::size_t kx = 0; kx < 7; ++kx) embedded.w(o, i, ky, kx) = plk.w(o, i, ky, kx);
    } else {
      embedded.w(o, o, 3, 3) = 1.0f;
    }
  }
  const Tensor out = plkc_forward(x, plk, split);
  CHECK(max_abs_diff(out, conv2d_naive(x, embedded)) <= 1e-4);
  CHECK(slice_channels(out, split, 10) == slice_channels(x, split, 10));
  CHECK(slice_channels(out, 0, split) == conv2d_fast(slice_channels(x, 0, split), plk));
}

TEST_CASE("ea_forward") {
  std::mt19937_64 rng(33);
  const Tensor x = random_tensor({6, 9, 9}, rng);
  const Tensor half = ea_forward(x, ConvKernel::zeros(6, 6, 3));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(half.data()[i] == 0.5f * x.data()[i]);

  ConvKernel saturate = ConvKernel::zeros(6, 6, 3);
  std::fill(saturate.bias.begin(), saturate.bias.end(), 30.0f);
  CHECK(max_abs_diff(ea_forward(x, saturate), x) <= 1e-6);

  for (int trial = 0; trial < 50; ++trial) {
    const Tensor in = random_tensor({6, 7, 8}, rng, -4.0f, 4.0f);
    const Tensor out = ea_forward(in, random_kernel(6, 6, 3, rng, 2.0f));
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(std::abs(out.data()[i]) <= std::abs(in.data()[i]));
  }
  CHECK_THROWS_AS(ea_forward(x, ConvKernel::zeros(6, 6, 5)), ShapeError);
}

TEST_CASE("block_forward residual contract") {
  std::mt19937_64 rng(34);
  const ModelConfig cfg = small_config();
  const Tensor x = random_tensor({cfg.width, 10, 10}, rng);

  CHECK(block_forward(x, zero_init(cfg).blocks[0], cfg) == x);

  BlockWeights bw = random_init(cfg, 7).blocks[0];
  const Tensor out = block_forward(x, bw, cfg);
  CHECK(out.shape() == x.shape());
  // out - x == fuse(EA(PLKC(mixer(x))))
  const Tensor expected = conv2d_fast(
      ea_forward(plkc_forward(mixer_forward(x, cfg.mixer, bw.mixer_proj, bw.mixer_agg), bw.plk, cfg.split), *bw.ea),
      bw.fuse);
  CHECK(out == elementwise_add(x, expected));

  bw.fuse = ConvKernel::zeros(cfg.width, cfg.width, 1);
  CHECK(block_forward(x, bw, cfg) == x);
}

TEST_CASE("block_forward ignores EA weights when EA is disabled") {
  std::mt19937_64 rng(35);
  const ModelConfig cfg = small_config(MixerVariant::DCCM, false);
  const Tensor x = random_tensor({cfg.width, 8, 8}, rng);
  BlockWeights bw = random_init(cfg, 3).blocks[0];
  const Tensor plain = block_forward(x, bw, cfg);
  bw.ea = random_kernel(cfg.width, cfg.width, 3, rng);
  CHECK(block_forward(x, bw, cfg) == plain);
}

TEST_CASE("block shape for both presets") {
  std::mt19937_64 rng(36);
  for (const char* name : {"plksr", "plksr-tiny"}) {
    const ModelConfig cfg = *ModelConfig::preset(name, 2);
    ModelConfig one = cfg;
    one.n_blocks = 1;
    const Tensor x = random_tensor({64, 24, 24}, rng);
    CHECK(block_forward(x, random_init(one, 1).blocks[0], cfg).shape() == Shape{64, 24, 24});
  }
}

TEST_CASE("model_forward") {
  std::mt19937_64 rng(37);
  for (std::size_t r : {2, 3, 4}) {
    for (MixerVariant v : kVariants) {
      const ModelConfig cfg = small_config(v, v != MixerVariant::FFN, r);
      const Tensor img = random_tensor({3, 7, 6}, rng, 0.0f, 1.0f);
      CHECK(model_forward(img, zero_init(cfg), cfg) == nearest_upscale(img, r));
    }
  }

  const ModelConfig cfg = small_config(MixerVariant::DCCM, true, 4);
  const ModelWeights w = random_init(cfg, 11);
  const Tensor img = random_tensor({3, 48, 48}, rng, 0.0f, 1.0f);
  const Tensor a = model_forward(img, w, cfg);
  CHECK(a.shape() == Shape{3, 192, 192});
  CHECK(model_forward(img, w, cfg) == a);

  CHECK_THROWS_AS(model_forward(Tensor::zeros(4, 8, 8), w, cfg), ShapeError);
  ModelConfig other = cfg;
  other.n_blocks = 3;
  CHECK_THROWS_AS(model_forward(img, w, other), ShapeError);
}

TEST_CASE("count_params matches enumeration") {
  CHECK(3 * 64 * 9 + 64 == 1792);
  CHECK(kernel_layout(*ModelConfig::preset("plksr", 4)).front().weight_count() + 64 == 1792);

  for (const char* name : {"plksr", "plksr-tiny"}) {
    for (std::size_t r : {2, 3, 4}) {
      const ModelConfig cfg = *ModelConfig::preset(name, r);
      CHECK(count_params(cfg) == enumerate_params(zero_init(cfg)));
    }
  }
  // Hand-expanded total for the x4 preset.
  const std::uint64_t block = (64 * 128 * 9 + 128) + (128 * 64 * 9 + 64) + (16 * 16 * 289 + 16) + (64 * 64 * 9 + 64) +
                              (64 * 64 + 64);
  CHECK(count_params(*ModelConfig::preset("plksr", 4)) == 1792 + 28 * block + (64 * 48 * 9 + 48));

  std::mt19937_64 rng(38);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig cfg;
    cfg.scale = 1 + rng() % 4;
    cfg.n_blocks = 1 + rng() % 4;
    cfg.width = 1 + rng() % 24;
    cfg.split = 1 + rng() % cfg.width;
    cfg.kernel = 1 + 2 * (rng() % 9);
    cfg.mixer = kVariants[rng() % 4];
    cfg.use_ea = rng() % 2;
    CHECK(count_params(cfg) == enumerate_params(random_init(cfg, trial)));
  }

  // Additivity: N = 1 is head + one block + tail.
  ModelConfig one = small_config();
  one.n_blocks = 1;
  ModelConfig two = one;
  two.n_blocks = 2;
  const ModelWeights w1 = zero_init(one);
  auto n = [](const ConvKernel& k) { return k.param_count(); };
  const std::uint64_t block_params = n(w1.blocks[0].mixer_proj) + n(w1.blocks[0].mixer_agg) + n(w1.blocks[0].plk) +
                                     n(*w1.blocks[0].ea) + n(w1.blocks[0].fuse);
  CHECK(count_params(one) == n(w1.head) + block_params + n(w1.tail));
  CHECK(count_params(two) - count_params(one) == block_params);
}

TEST_CASE("count_flops") {
  const ModelConfig cfg = *ModelConfig::preset("plksr", 2);
  const std::uint64_t H = 360, W = 640, hw = H * W;
  // Per-layer sum for the x2 preset at 640x360.
  const std::uint64_t head = 2ull * 64 * 3 * 9 * hw;
  const std::uint64_t proj = 2ull * 128 * 64 * 9 * hw;
  const std::uint64_t gelu = 128ull * hw;
  const std::uint64_t agg = 2ull * 64 * 128 * 9 * hw;
  const std::uint64_t plk = 2ull * 16 * 16 * 17 * 17 * hw;
  const std::uint64_t ea_conv = 2ull * 64 * 64 * 9 * hw;
  const std::uint64_t ea_sigmoid = 64ull * hw;
  const std::uint64_t ea_mul = 64ull * hw;
  const std::uint64_t fuse = 2ull * 64 * 64 * hw;
  const std::uint64_t residual = 64ull * hw;
  const std::uint64_t tail = 2ull * 12 * 64 * 9 * hw;
  const std::uint64_t final_add = 12ull * hw;
  const std::uint64_t expected =
      head + 28 * (proj + gelu + agg + plk + ea_conv + ea_sigmoid + ea_mul + fuse + residual) + tail + final_add;
  CHECK(count_flops(cfg, H, W) == expected);

  // Linear in H*W.
  CHECK(count_flops(cfg, 2 * H, W) == 2 * count_flops(cfg, H, W));
  CHECK(count_flops(cfg, 10, 10) * 4 == count_flops(cfg, 20, 20));

  // A 1x1 c->c conv costs 2 c^2 HW: FFN differs from ICCM only in agg (1x1 vs 3x3).
  ModelConfig ffn = small_config(MixerVariant::FFN, false);
  ModelConfig iccm = small_config(MixerVariant::ICCM, false);
  const std::uint64_t c = ffn.width;
  CHECK(count_flops(iccm, 5, 7) - count_flops(ffn, 5, 7) == ffn.n_blocks * 2 * c * 2 * c * 8 * 35);
}

TEST_CASE("random_init") {
  const ModelConfig cfg = small_config();
  const ModelWeights a = random_init(cfg, 0);
  CHECK(random_init(cfg, 0) == a);
  CHECK_FALSE(random_init(cfg, 1) == a);
  for_each_kernel(a, [](const ConvKernel& k) {
    const float s = static_cast<float>(1.0 / std::sqrt(static_cast<double>(k.in_channels * k.k * k.k)));
    for (float v : k.weights) CHECK((v > -s && v < s));
    for (float v : k.bias) CHECK((v > -s && v < s));
  });
  validate_weights(a, cfg);
}
