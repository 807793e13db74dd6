// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#include "plksr/image.hpp"

#include <png.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <system_error>

namespace plksr {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

bool encode_png(std::FILE* fp, const ImageU8& img, std::string& message) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  std::vector<png_bytep> rows(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = const_cast<png_bytep>(img.data.data() + 3 * img.width * y);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

ImageU8 ImageU8::blank(std::size_t height, std::size_t width) {
  return ImageU8{height, width, std::vector<std::uint8_t>(3 * height * width, 0)};
}

ImageU8 read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ImageError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ImageError(path.string() + ": not a PNG file");
  }

  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
  if (!png) throw ImageError("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageError("libpng: cannot create info struct");
  }

  ImageU8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError(path.string() + ": invalid PNG: " + message);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  if (png_get_rowbytes(png, info) != 3 * img.width) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError(path.string() + ": unexpected decoded row size");
  }
  img.data.resize(3 * img.width * img.height);
  rows.resize(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.data.data() + 3 * img.width * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path& path, const ImageU8& img) {
  if (img.width == 0 || img.height == 0 || img.data.size() != 3 * img.width * img.height) {
    throw ImageError("write_png: image buffer does not match its dimensions");
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());

  std::string message;
  bool ok = false;
  {
    FilePtr fp(std::fopen(tmp.c_str(), "wb"));
    if (!fp) throw ImageError("cannot open " + tmp.string() + " for writing");
    ok = encode_png(fp.get(), img, message) && std::fflush(fp.get()) == 0;
  }
  std::error_code ec;
  if (ok) std::filesystem::rename(tmp, path, ec);
  if (!ok || ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw ImageError("failed writing " + path.string() + (message.empty() ? "" : ": " + message));
  }
}

Tensor to_tensor(const ImageU8& img) {
  Tensor t = Tensor::zeros(3, img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const auto* p = img.pixel(y, x);
      for (std::size_t c = 0; c < 3; ++c) t.at(c, y, x) = static_cast<float>(p[c]) / 255.0f;
    }
  }
  return t;
}

ImageU8 from_tensor(const Tensor& t) {
  if (t.channels() != 3) throw ShapeError("from_tensor: expected 3 channels, got " + t.shape().str());
  ImageU8 img = ImageU8::blank(t.height(), t.width());
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      auto* p = img.pixel(y, x);
      for (std::size_t c = 0; c < 3; ++c) {
        const float raw = t.at(c, y, x);
        const float v = std::isnan(raw) ? 0.0f : std::clamp(raw, 0.0f, 1.0f);
        p[c] = static_cast<std::uint8_t>(std::round(v * 255.0f));
      }
    }
  }
  return img;
}

ImageU8 nearest_upscale(const ImageU8& img, std::size_t r) {
  ImageU8 out = ImageU8::blank(img.height * r, img.width * r);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) std::copy_n(img.pixel(y / r, x / r), 3, out.pixel(y, x));
  }
  return out;
}

}  // namespace plksr
