// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#include "plksr/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "plksr/atomic_file.hpp"

namespace plksr {

static_assert(std::endian::native == std::endian::little, "weight files are read with native little-endian loads");

namespace {

using Kind = WeightFileError::Kind;

void put_u32(std::vector<char>& buf, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  buf.insert(buf.end(), bytes, bytes + 4);
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightFileError(Kind::Io, "cannot open weight file " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ModelConfig parse_header(const std::vector<char>& buf, const std::filesystem::path& path) {
  if (buf.size() < 4 || std::memcmp(buf.data(), kWeightMagic, 4) != 0) {
    throw WeightFileError(Kind::BadMagic, path.string() + ": bad magic (not a PLKW weight file)");
  }
  if (buf.size() < 8) throw WeightFileError(Kind::Truncated, path.string() + ": truncated in header (version)");
  const std::uint32_t version = get_u32(buf.data() + 4);
  if (version != kWeightVersion) {
    throw WeightFileError(Kind::BadVersion,
                          path.string() + ": unsupported version " + std::to_string(version) + " (expected 1)");
  }
  if (buf.size() < kWeightHeaderBytes) {
    throw WeightFileError(Kind::Truncated, path.string() + ": truncated in header");
  }
  const char* p = buf.data() + 8;
  ModelConfig cfg;
  cfg.scale = get_u32(p);
  cfg.n_blocks = get_u32(p + 4);
  cfg.width = get_u32(p + 8);
  cfg.split = get_u32(p + 12);
  cfg.kernel = get_u32(p + 16);
  const std::uint32_t mixer = get_u32(p + 20);
  const std::uint32_t flags = get_u32(p + 24);
  if (mixer > 3) {
    throw WeightFileError(Kind::ShapeMismatch, path.string() + ": unknown mixer id " + std::to_string(mixer));
  }
  if ((flags & ~1u) != 0) {
    throw WeightFileError(Kind::ShapeMismatch, path.string() + ": unknown flag bits " + std::to_string(flags));
  }
  // Sanity bounds keep the derived layout arithmetic far from overflow.
  if (cfg.scale > 64 || cfg.n_blocks > 100000 || cfg.width > 65536 || cfg.kernel > 1023) {
    throw WeightFileError(Kind::ShapeMismatch, path.string() + ": header dimensions out of range");
  }
  cfg.mixer = static_cast<MixerVariant>(mixer);
  cfg.use_ea = (flags & 1u) != 0;
  try {
    cfg.validate();
  } catch (const ShapeError& e) {
    throw WeightFileError(Kind::ShapeMismatch, path.string() + ": inconsistent header: " + e.what());
  }
  return cfg;
}

}  // namespace

void save_weights(const ModelWeights& weights, const ModelConfig& cfg, const std::filesystem::path& path) {
  validate_weights(weights, cfg);
  std::vector<char> buf(kWeightMagic, kWeightMagic + 4);
  put_u32(buf, kWeightVersion);
  put_u32(buf, static_cast<std::uint32_t>(cfg.scale));
  put_u32(buf, static_cast<std::uint32_t>(cfg.n_blocks));
  put_u32(buf, static_cast<std::uint32_t>(cfg.width));
  put_u32(buf, static_cast<std::uint32_t>(cfg.split));
  put_u32(buf, static_cast<std::uint32_t>(cfg.kernel));
  put_u32(buf, static_cast<std::uint32_t>(cfg.mixer));
  put_u32(buf, cfg.use_ea ? 1u : 0u);
  for_each_kernel(weights, [&](const ConvKernel& k) {
    for (const auto* v : {&k.weights, &k.bias}) {
      const char* bytes = reinterpret_cast<const char*>(v->data());
      buf.insert(buf.end(), bytes, bytes + v->size() * sizeof(float));
    }
  });
  write_file_atomic(path, buf);
}

ModelConfig read_weight_header(const std::filesystem::path& path) { return parse_header(read_all(path), path); }

LoadedModel load_weights(const std::filesystem::path& path) {
  const std::vector<char> buf = read_all(path);
  LoadedModel loaded;
  loaded.config = parse_header(buf, path);
  const auto slots = kernel_layout(loaded.config);

  // Size check up front so a bad file never yields partially decoded weights.
  std::size_t expected = kWeightHeaderBytes;
  for (const auto& s : slots) {
    const std::size_t start = expected;
    expected += (s.weight_count() + s.out_channels) * sizeof(float);
    if (buf.size() < expected) {
      const bool in_bias = buf.size() >= start + s.weight_count() * sizeof(float);
      throw WeightFileError(Kind::Truncated, path.string() + ": truncated in tensor " + s.name +
                                                 (in_bias ? ".bias" : ".weight") + " (file has " +
                                                 std::to_string(buf.size()) + " bytes, needs " +
                                                 std::to_string(expected) + ")");
    }
  }
  if (buf.size() != expected) {
    throw WeightFileError(Kind::ShapeMismatch, path.string() + ": " + std::to_string(buf.size() - expected) +
                                                   " trailing bytes after the tensors the header declares");
  }

  loaded.weights = zero_init(loaded.config);
  const char* p = buf.data() + kWeightHeaderBytes;
  for_each_kernel(loaded.weights, [&](ConvKernel& k) {
    for (auto* v : {&k.weights, &k.bias}) {
      std::memcpy(v->data(), p, v->size() * sizeof(float));
      p += v->size() * sizeof(float);
    }
  });
  return loaded;
}

}  // namespace plksr
