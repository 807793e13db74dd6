// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "plksr/model.hpp"
#include "plksr/tensor.hpp"

namespace plksr::bench {

enum class Op { FullConv, PartialConv, StackedConv, StackedConvGelu, Depthwise, MergedReparam, ModelForward };

std::string_view op_name(Op op);

struct BenchSpec {
  Op op = Op::PartialConv;
  Shape shape{64, 640, 360};
  std::size_t split = 16;
  std::size_t kernel = 17;
  std::size_t warmup = 3;
  std::size_t iters = 9;
  std::uint64_t seed = 0;

  /// Throws plksr::Error when iters < 5, warmup < 1, or split is out of range.
  void validate() const;
};

struct BenchRecord {
  BenchSpec spec;
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::size_t peak_bytes = 0;
  double checksum = 0.0;
};

/// Times `fn` after `warmup` untimed calls. A cold reference call fixes the
/// output checksum; every later call must reproduce it bit-for-bit or
/// plksr::Error is thrown. peak_bytes covers the timed region only
/// (the allocation peak is reset right before each call).
BenchRecord measure(const BenchSpec& spec, const std::function<Tensor()>& fn);

/// Times one BenchSpec over a seeded uniform(-1, 1) feature map with
/// 1/sqrt(fan_in)-scaled kernels.
BenchRecord run_spec(const BenchSpec& spec);

/// One PartialConv record per (C, K) pair, channels outer, kernels inner.
std::vector<BenchRecord> run_conv_sweep(const std::vector<std::size_t>& channels,
                                        const std::vector<std::size_t>& kernels, const Shape& shape,
                                        std::size_t warmup, std::size_t iters, std::uint64_t seed = 0);

struct StackComparison {
  BenchRecord single;        // one 13x13 partial conv
  BenchRecord stacked;       // six 3x3 partial convs
  BenchRecord stacked_gelu;  // six 3x3 partial convs with GELU between them
  std::size_t receptive_field = 13;
  double stacked_over_single = 0.0;
  double stacked_gelu_over_single = 0.0;
};

/// Six stacked 3x3 convs on the first C channels vs one 13x13 conv
/// (identical 13x13 receptive field).
StackComparison run_stack_vs_single(const Shape& shape, std::size_t split, std::size_t warmup, std::size_t iters,
                                    std::uint64_t seed = 0);

struct ModelBenchResult {
  BenchRecord record;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
};

/// End-to-end model_forward on a seeded random (3, H, W) image with
/// random_init(cfg, seed) weights.
ModelBenchResult run_model_bench(const ModelConfig& cfg, std::size_t height, std::size_t width, std::size_t warmup,
                                 std::size_t iters, std::uint64_t seed = 0);

inline constexpr const char* kCsvHeader = "op,c,h,w,split,kernel,iters,median_ms,min_ms,max_ms,peak_bytes,checksum";
void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const BenchRecord& r);

}  // namespace plksr::bench
