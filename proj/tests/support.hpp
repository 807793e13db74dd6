// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

// Shared test helpers: seeded generators, temp directories and
// test-only reference implementations that never call engine kernels.

#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "plksr/image.hpp"
#include "plksr/nnops.hpp"
#include "plksr/reparam.hpp"
#include "plksr/tensor.hpp"

namespace plksr::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  Tensor t = Tensor::zeros(shape);
  for (float& v : t.data()) v = dist(rng);
  return t;
}

inline ConvKernel random_kernel(std::size_t out, std::size_t in, std::size_t k, std::mt19937_64& rng,
                                float bound = 1.0f) {
  std::uniform_real_distribution<float> dist(-bound, bound);
  ConvKernel kernel = ConvKernel::zeros(out, in, k);
  for (float& v : kernel.weights) v = dist(rng);
  for (float& v : kernel.bias) v = dist(rng);
  return kernel;
}

inline RectKernel random_rect(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw, std::mt19937_64& rng,
                              float bound = 1.0f) {
  std::uniform_real_distribution<float> dist(-bound, bound);
  RectKernel kernel = RectKernel::zeros(out, in, kh, kw);
  for (float& v : kernel.weights) v = dist(rng);
  for (float& v : kernel.bias) v = dist(rng);
  return kernel;
}

inline ImageU8 random_image(std::size_t height, std::size_t width, std::mt19937_64& rng) {
  ImageU8 img = ImageU8::blank(height, width);
  std::uniform_int_distribution<int> dist(0, 255);
  for (auto& b : img.data) b = static_cast<std::uint8_t>(dist(rng));
  return img;
}

/// Dilated, rectangular, zero-padded ("same") convolution written as the
/// plain definition, double accumulation.
inline Tensor reference_dilated_conv(const Tensor& in, const RectKernel& k, std::size_t dilation) {
  const long H = static_cast<long>(in.height());
  const long W = static_cast<long>(in.width());
  const long d = static_cast<long>(dilation);
  const long py = static_cast<long>((k.kh - 1) * dilation / 2);
  const long px = static_cast<long>((k.kw - 1) * dilation / 2);
  Tensor out = Tensor::zeros(k.out_channels, in.height(), in.width());
  for (std::size_t o = 0; o < k.out_channels; ++o)
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x) {
        double acc = k.bias[o];
        for (std::size_t i = 0; i < k.in_channels; ++i)
          for (long ky = 0; ky < static_cast<long>(k.kh); ++ky)
            for (long kx = 0; kx < static_cast<long>(k.kw); ++kx) {
              const long iy = y + ky * d - py;
              const long ix = x + kx * d - px;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += static_cast<double>(k.weights[((o * k.in_channels + i) * k.kh + ky) * k.kw + kx]) *
                     in.at(i, iy, ix);
            }
        out.at(o, y, x) = static_cast<float>(acc);
      }
  return out;
}

/// Standard normal CDF through the Maclaurin series of erf.
inline double normal_cdf_series(double x) {
  const double z = x / std::sqrt(2.0);
  long double term = z;
  long double sum = z;
  for (int n = 1; n < 200; ++n) {
    term *= -static_cast<long double>(z) * z / n;
    sum += term / (2 * n + 1);
  }
  const long double erf_z = 2.0L / std::sqrt(3.14159265358979323846264338327950288L) * sum;
  return static_cast<double>(0.5L * (1.0L + erf_z));
}

/// The three kernel-branch layouts of the re-parameterization study:
/// (kh, kw, dilation) per branch, merged into a 17x17 kernel.
struct BranchShape {
  std::size_t kh, kw, dilation;
};
inline std::vector<std::vector<BranchShape>> reference_branch_layouts() {
  return {
      {{17, 17, 1}, {5, 5, 1}},
      {{17, 5, 1}, {5, 17, 1}, {5, 5, 1}},
      {{17, 17, 1}, {5, 5, 1}, {9, 9, 2}, {5, 5, 3}, {5, 5, 4}},
  };
}

// Writes a PNG with an arbitrary colour type through libpng directly.
inline void write_raw_png(const std::filesystem::path& path, int color_type, int channels, std::size_t h, std::size_t w,
                   const std::vector<std::uint8_t>& bytes) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < h; ++y)
    png_write_row(png, const_cast<png_bytep>(bytes.data() + y * w * static_cast<std::size_t>(channels)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}


class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("plksr-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace plksr::testing
