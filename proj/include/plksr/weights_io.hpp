// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "plksr/model.hpp"

namespace plksr {

/// Binary layout of a .plkw file (little-endian, no padding):
///
///   "PLKW" | u32 version=1 | u32 scale | u32 n_blocks | u32 width |
///   u32 split | u32 kernel | u32 mixer | u32 flags (bit 0 = EA) |
///   f32 tensors in kernel_layout() order, each weights then bias.
inline constexpr char kWeightMagic[4] = {'P', 'L', 'K', 'W'};
inline constexpr std::uint32_t kWeightVersion = 1;
inline constexpr std::size_t kWeightHeaderBytes = 4 + 8 * 4;

class WeightFileError : public Error {
 public:
  enum class Kind { Io, BadMagic, BadVersion, Truncated, ShapeMismatch };

  WeightFileError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct LoadedModel {
  ModelWeights weights;
  ModelConfig config;
};

/// Writes atomically (temp file + rename). Validates weights against cfg first.
void save_weights(const ModelWeights& weights, const ModelConfig& cfg, const std::filesystem::path& path);

/// Validates magic, version, header config, and total size before
/// decoding tensors. Throws WeightFileError.
LoadedModel load_weights(const std::filesystem::path& path);

/// Header-only read: config and the declared tensor layout.
ModelConfig read_weight_header(const std::filesystem::path& path);

}  // namespace plksr
