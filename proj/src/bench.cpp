// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#include "plksr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "plksr/nnops.hpp"
#include "plksr/reparam.hpp"

namespace plksr::bench {

namespace {

constexpr std::size_t kStackDepth = 6;  // 1 + 6 * (3 - 1) = 13

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Tensor t = Tensor::zeros(shape);
  for (float& v : t.data()) v = dist(rng);
  return t;
}

ConvKernel random_kernel(std::size_t out, std::size_t in, std::size_t k, std::mt19937_64& rng) {
  ConvKernel kernel = ConvKernel::zeros(out, in, k);
  const float bound = static_cast<float>(1.0 / std::sqrt(static_cast<double>(in * k * k)));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (float& v : kernel.weights) v = dist(rng);
  for (float& v : kernel.bias) v = dist(rng);
  return kernel;
}

Tensor stacked_partial(const Tensor& x, const std::vector<ConvKernel>& layers, std::size_t split, bool with_gelu) {
  Tensor feat = slice_channels(x, 0, split);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    feat = conv2d_fast(feat, layers[i]);
    if (with_gelu && i + 1 < layers.size()) feat = gelu(feat);
  }
  if (split == x.channels()) return feat;
  const Tensor parts[] = {std::move(feat), slice_channels(x, split, x.channels())};
  return concat_channels(parts);
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::FullConv: return "full_conv";
    case Op::PartialConv: return "partial_conv";
    case Op::StackedConv: return "stacked_conv3x3";
    case Op::StackedConvGelu: return "stacked_conv3x3_gelu";
    case Op::Depthwise: return "depthwise_conv";
    case Op::MergedReparam: return "merged_reparam";
    case Op::ModelForward: return "model_forward";
  }
  return "?";
}

void BenchSpec::validate() const {
  if (iters < 5) throw Error("bench: timed iterations must be >= 5, got " + std::to_string(iters));
  if (warmup < 1) throw Error("bench: warmup iterations must be >= 1");
  if (op != Op::ModelForward && (split < 1 || split > shape.channels)) {
    throw Error("bench: split " + std::to_string(split) + " must be in [1, " + std::to_string(shape.channels) + "]");
  }
  if (kernel % 2 == 0) throw Error("bench: kernel size " + std::to_string(kernel) + " must be odd");
}

BenchRecord measure(const BenchSpec& spec, const std::function<Tensor()>& fn) {
  spec.validate();
  using clock = std::chrono::steady_clock;
  BenchRecord rec;
  rec.spec = spec;
  rec.checksum = checksum(fn());
  for (std::size_t i = 0; i < spec.warmup; ++i) (void)fn();

  std::vector<double> times;
  times.reserve(spec.iters);
  for (std::size_t i = 0; i < spec.iters; ++i) {
    reset_peak();
    const auto start = clock::now();
    Tensor out = fn();
    const auto stop = clock::now();
    rec.peak_bytes = std::max(rec.peak_bytes, peak_memory());
    times.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    const double sum = checksum(out);
    if (sum != rec.checksum) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "bench: %s output checksum changed between runs (%.9g vs %.9g)",
                    std::string(op_name(spec.op)).c_str(), sum, rec.checksum);
      throw Error(buf);
    }
  }
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  rec.median_ms = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
  rec.min_ms = times.front();
  rec.max_ms = times.back();
  return rec;
}

BenchRecord run_spec(const BenchSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const Tensor x = random_tensor(spec.shape, rng);
  const std::size_t c = spec.shape.channels;

  switch (spec.op) {
    case Op::FullConv: {
      const ConvKernel k = random_kernel(c, c, spec.kernel, rng);
      return measure(spec, [&] { return conv2d_fast(x, k); });
    }
    case Op::PartialConv: {
      const ConvKernel k = random_kernel(spec.split, spec.split, spec.kernel, rng);
      return measure(spec, [&] { return plkc_forward(x, k, spec.split); });
    }
    case Op::StackedConv:
    case Op::StackedConvGelu: {
      std::vector<ConvKernel> layers;
      for (std::size_t i = 0; i < kStackDepth; ++i) layers.push_back(random_kernel(spec.split, spec.split, 3, rng));
      const bool with_gelu = spec.op == Op::StackedConvGelu;
      return measure(spec, [&] { return stacked_partial(x, layers, spec.split, with_gelu); });
    }
    case Op::Depthwise: {
      const ConvKernel k = random_kernel(c, 1, spec.kernel, rng);
      return measure(spec, [&] { return depthwise_conv2d(x, k); });
    }
    case Op::MergedReparam: {
      // K x K plus a 5 x 5 branch (or K x K alone when K < 5), merged ahead of timing.
      std::vector<BranchSpec> branches;
      branches.push_back({RectKernel::from_square(random_kernel(spec.split, spec.split, spec.kernel, rng)), 1});
      if (spec.kernel >= 5) {
        branches.push_back({RectKernel::from_square(random_kernel(spec.split, spec.split, 5, rng)), 1});
      }
      const ConvKernel merged = merge_branches(branches, spec.kernel);
      return measure(spec, [&] { return plkc_forward(x, merged, spec.split); });
    }
    case Op::ModelForward:
      throw Error("bench: use run_model_bench for model_forward");
  }
  throw Error("bench: unknown op");
}

std::vector<BenchRecord> run_conv_sweep(const std::vector<std::size_t>& channels,
                                        const std::vector<std::size_t>& kernels, const Shape& shape,
                                        std::size_t warmup, std::size_t iters, std::uint64_t seed) {
  for (std::size_t ch : channels) {
    if (ch < 1 || ch > shape.channels) {
      throw Error("bench sweep: channel count " + std::to_string(ch) + " outside [1, " +
                  std::to_string(shape.channels) + "]");
    }
  }
  std::vector<BenchRecord> records;
  for (std::size_t ch : channels) {
    for (std::size_t k : kernels) {
      BenchSpec spec;
      spec.op = Op::PartialConv;
      spec.shape = shape;
      spec.split = ch;
      spec.kernel = k;
      spec.warmup = warmup;
      spec.iters = iters;
      spec.seed = seed;
      records.push_back(run_spec(spec));
    }
  }
  return records;
}

StackComparison run_stack_vs_single(const Shape& shape, std::size_t split, std::size_t warmup, std::size_t iters,
                                    std::uint64_t seed) {
  BenchSpec spec;
  spec.shape = shape;
  spec.split = split;
  spec.warmup = warmup;
  spec.iters = iters;
  spec.seed = seed;

  StackComparison cmp;
  cmp.receptive_field = 1 + kStackDepth * 2;
  spec.op = Op::PartialConv;
  spec.kernel = cmp.receptive_field;
  cmp.single = run_spec(spec);
  spec.kernel = 3;
  spec.op = Op::StackedConv;
  cmp.stacked = run_spec(spec);
  spec.op = Op::StackedConvGelu;
  cmp.stacked_gelu = run_spec(spec);
  cmp.stacked_over_single = cmp.stacked.median_ms / cmp.single.median_ms;
  cmp.stacked_gelu_over_single = cmp.stacked_gelu.median_ms / cmp.single.median_ms;
  return cmp;
}

ModelBenchResult run_model_bench(const ModelConfig& cfg, std::size_t height, std::size_t width, std::size_t warmup,
                                 std::size_t iters, std::uint64_t seed) {
  cfg.validate();
  BenchSpec spec;
  spec.op = Op::ModelForward;
  spec.shape = Shape{3, height, width};
  spec.split = cfg.split;
  spec.kernel = cfg.kernel;
  spec.warmup = warmup;
  spec.iters = iters;
  spec.seed = seed;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  Tensor img = Tensor::zeros(spec.shape);
  for (float& v : img.data()) v = dist(rng);
  const ModelWeights weights = random_init(cfg, seed);

  ModelBenchResult result;
  result.record = measure(spec, [&] { return model_forward(img, weights, cfg); });
  result.params = count_params(cfg);
  result.flops = count_flops(cfg, height, width);
  return result;
}

void write_csv_header(std::ostream& os) { os << kCsvHeader << '\n'; }

void write_csv_row(std::ostream& os, const BenchRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%zu,%zu,%zu,%.4f,%.4f,%.4f,%zu,%.9g",
                std::string(op_name(r.spec.op)).c_str(), r.spec.shape.channels, r.spec.shape.height,
                r.spec.shape.width, r.spec.split, r.spec.kernel, r.spec.iters, r.median_ms, r.min_ms, r.max_ms,
                r.peak_bytes, r.checksum);
  os << buf << '\n';
}

}  // namespace plksr::bench
