// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "plksr/tensor.hpp"

namespace plksr {

class ImageError : public Error {
 public:
  using Error::Error;
};

/// 8-bit interleaved RGB raster.
struct ImageU8 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;  // 3 bytes per pixel, row-major

  static ImageU8 blank(std::size_t height, std::size_t width);
  std::uint8_t* pixel(std::size_t y, std::size_t x) { return data.data() + 3 * (y * width + x); }
  const std::uint8_t* pixel(std::size_t y, std::size_t x) const { return data.data() + 3 * (y * width + x); }
  bool operator==(const ImageU8&) const = default;
};

/// Decodes any 8/16-bit PNG to RGB: gray is promoted, palettes expanded,
/// alpha stripped, 16-bit samples reduced to 8 bits.
ImageU8 read_png(const std::filesystem::path& path);
/// Atomic write (temp file + rename).
void write_png(const std::filesystem::path& path, const ImageU8& img);

/// bytes / 255 into a (3, H, W) tensor.
Tensor to_tensor(const ImageU8& img);
/// Clamps to [0, 1], scales by 255, rounds half away from zero.
ImageU8 from_tensor(const Tensor& t);

ImageU8 nearest_upscale(const ImageU8& img, std::size_t r);

}  // namespace plksr
