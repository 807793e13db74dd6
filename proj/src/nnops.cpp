// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#include "plksr/nnops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace plksr {

namespace {

// Pixels lowered per im2col tile. The patch buffer holds
// kTilePixels * in_channels * k * k floats, so its size scales with the
// convolved channel count.
constexpr std::size_t kTilePixels = 1024;

void check_conv_input(const Tensor& input, const ConvKernel& kernel, const char* op) {
  kernel.validate();
  if (input.channels() != kernel.in_channels) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(input.channels()) +
                     " channels, kernel expects " + std::to_string(kernel.in_channels));
  }
}

// Valid tap range [lo, hi) for an output coordinate so that
// pos + tap - pad stays inside [0, extent).
inline void tap_range(std::ptrdiff_t pos, std::ptrdiff_t pad, std::ptrdiff_t k, std::ptrdiff_t extent,
                      std::ptrdiff_t& lo, std::ptrdiff_t& hi) {
  lo = std::max<std::ptrdiff_t>(0, pad - pos);
  hi = std::min<std::ptrdiff_t>(k, extent - pos + pad);
}

}  // namespace

ConvKernel ConvKernel::zeros(std::size_t out_channels, std::size_t in_channels, std::size_t k) {
  if (out_channels == 0 || in_channels == 0) throw ShapeError("ConvKernel: channel counts must be >= 1");
  if (k == 0 || k % 2 == 0) throw ShapeError("ConvKernel: kernel size must be odd, got " + std::to_string(k));
  ConvKernel kernel;
  kernel.out_channels = out_channels;
  kernel.in_channels = in_channels;
  kernel.k = k;
  kernel.weights.assign(out_channels * in_channels * k * k, 0.0f);
  kernel.bias.assign(out_channels, 0.0f);
  return kernel;
}

ConvKernel ConvKernel::identity(std::size_t channels, std::size_t k) {
  ConvKernel kernel = zeros(channels, channels, k);
  for (std::size_t c = 0; c < channels; ++c) kernel.w(c, c, k / 2, k / 2) = 1.0f;
  return kernel;
}

void ConvKernel::validate() const {
  if (out_channels == 0 || in_channels == 0) throw ShapeError("ConvKernel: channel counts must be >= 1");
  if (k == 0 || k % 2 == 0) throw ShapeError("ConvKernel: kernel size must be odd, got " + std::to_string(k));
  if (weights.size() != out_channels * in_channels * k * k) {
    throw ShapeError("ConvKernel: weight buffer has " + std::to_string(weights.size()) + " values, expected " +
                     std::to_string(out_channels * in_channels * k * k));
  }
  if (bias.size() != out_channels) {
    throw ShapeError("ConvKernel: bias buffer has " + std::to_string(bias.size()) + " values, expected " +
                     std::to_string(out_channels));
  }
}

Tensor conv2d_naive(const Tensor& input, const ConvKernel& kernel) {
  check_conv_input(input, kernel, "conv2d_naive");
  const auto H = static_cast<std::ptrdiff_t>(input.height());
  const auto W = static_cast<std::ptrdiff_t>(input.width());
  const auto K = static_cast<std::ptrdiff_t>(kernel.k);
  const std::ptrdiff_t pad = K / 2;
  Tensor out = Tensor::zeros(kernel.out_channels, input.height(), input.width());

  for (std::size_t o = 0; o < kernel.out_channels; ++o) {
    for (std::ptrdiff_t y = 0; y < H; ++y) {
      std::ptrdiff_t ky0, ky1;
      tap_range(y, pad, K, H, ky0, ky1);
      for (std::ptrdiff_t x = 0; x < W; ++x) {
        std::ptrdiff_t kx0, kx1;
        tap_range(x, pad, K, W, kx0, kx1);
        double acc = kernel.bias[o];
        for (std::size_t i = 0; i < kernel.in_channels; ++i) {
          for (std::ptrdiff_t ky = ky0; ky < ky1; ++ky) {
            for (std::ptrdiff_t kx = kx0; kx < kx1; ++kx) {
              acc += static_cast<double>(kernel.w(o, i, ky, kx)) *
                     static_cast<double>(input.at(i, y + ky - pad, x + kx - pad));
            }
          }
        }
        out.at(o, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor conv2d_fast(const Tensor& input, const ConvKernel& kernel) {
  check_conv_input(input, kernel, "conv2d_fast");
  const std::size_t H = input.height();
  const std::size_t W = input.width();
  const std::size_t P = H * W;
  const std::size_t K = kernel.k;
  const std::size_t C_in = kernel.in_channels;
  const std::size_t C_out = kernel.out_channels;
  Tensor out = Tensor::zeros(C_out, H, W);
  auto dst = out.data();

  if (K == 1) {
    // Pointwise: the input already is the (C_in x P) patch matrix.
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(C_out), static_cast<int>(P),
                static_cast<int>(C_in), 1.0f, kernel.weights.data(), static_cast<int>(C_in), input.data().data(),
                static_cast<int>(P), 0.0f, dst.data(), static_cast<int>(P));
    for (std::size_t o = 0; o < C_out; ++o) {
      const float b = kernel.bias[o];
      if (b == 0.0f) continue;
      for (float& v : out.channel(o)) v += b;
    }
    return out;
  }

  const std::size_t patch_len = C_in * K * K;
  const std::size_t tile = std::min(P, kTilePixels);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K / 2);
  tracked_vector<float> patches(tile * patch_len);
  tracked_vector<float> result(tile * C_out);
  const float* src = input.data().data();

  for (std::size_t p0 = 0; p0 < P; p0 += tile) {
    const std::size_t n = std::min(tile, P - p0);
    // Pixel-major patch rows, each laid out (in, ky, kx) to match the weights.
    for (std::size_t j = 0; j < n; ++j) {
      const auto y = static_cast<std::ptrdiff_t>((p0 + j) / W);
      const auto x = static_cast<std::ptrdiff_t>((p0 + j) % W);
      std::ptrdiff_t kx0, kx1;
      tap_range(x, pad, static_cast<std::ptrdiff_t>(K), static_cast<std::ptrdiff_t>(W), kx0, kx1);
      float* row = patches.data() + j * patch_len;
      for (std::size_t i = 0; i < C_in; ++i) {
        const float* plane = src + i * P;
        for (std::size_t ky = 0; ky < K; ++ky, row += K) {
          const std::ptrdiff_t iy = y + static_cast<std::ptrdiff_t>(ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H) || kx0 >= kx1) {
            std::fill(row, row + K, 0.0f);
            continue;
          }
          std::fill(row, row + kx0, 0.0f);
          std::memcpy(row + kx0, plane + iy * static_cast<std::ptrdiff_t>(W) + x + kx0 - pad,
                      static_cast<std::size_t>(kx1 - kx0) * sizeof(float));
          std::fill(row + kx1, row + K, 0.0f);
        }
      }
    }
    // result (n x C_out) = patches (n x patch_len) * weights^T
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(n), static_cast<int>(C_out),
                static_cast<int>(patch_len), 1.0f, patches.data(), static_cast<int>(patch_len),
                kernel.weights.data(), static_cast<int>(patch_len), 0.0f, result.data(), static_cast<int>(C_out));
    for (std::size_t o = 0; o < C_out; ++o) {
      float* plane = dst.data() + o * P + p0;
      const float b = kernel.bias[o];
      for (std::size_t j = 0; j < n; ++j) plane[j] = result[j * C_out + o] + b;
    }
  }
  return out;
}

Tensor depthwise_conv2d(const Tensor& input, const ConvKernel& kernel) {
  kernel.validate();
  if (kernel.in_channels != 1 || kernel.out_channels != input.channels()) {
    throw ShapeError("depthwise_conv2d: kernel must be (" + std::to_string(input.channels()) +
                     ", 1, k, k), got (" + std::to_string(kernel.out_channels) + ", " +
                     std::to_string(kernel.in_channels) + ", k, k)");
  }
  const auto H = static_cast<std::ptrdiff_t>(input.height());
  const auto W = static_cast<std::ptrdiff_t>(input.width());
  const auto K = static_cast<std::ptrdiff_t>(kernel.k);
  const std::ptrdiff_t pad = K / 2;
  Tensor out = Tensor::zeros(input.shape());

  for (std::size_t c = 0; c < input.channels(); ++c) {
    auto dst = out.channel(c);
    const auto src = input.channel(c);
    std::fill(dst.begin(), dst.end(), kernel.bias[c]);
    for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
      const std::ptrdiff_t dy = ky - pad;
      const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
      const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(H, H - dy);
      for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
        const float w = kernel.w(c, 0, ky, kx);
        if (w == 0.0f) continue;
        const std::ptrdiff_t dx = kx - pad;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = y0; y < y1; ++y) {
          float* o = dst.data() + y * W;
          const float* s = src.data() + (y + dy) * W + dx;
          for (std::ptrdiff_t x = x0; x < x1; ++x) o[x] += w * s[x];
        }
      }
    }
  }
  return out;
}

Tensor gelu(const Tensor& t) {
  Tensor out = Tensor::zeros(t.shape());
  auto dst = out.data();
  auto src = t.data();
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double x = src[i];
    dst[i] = static_cast<float>(0.5 * x * (1.0 + std::erf(x * inv_sqrt2)));
  }
  return out;
}

Tensor sigmoid(const Tensor& t) {
  Tensor out = Tensor::zeros(t.shape());
  auto dst = out.data();
  auto src = t.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    // Saturates to exactly 1.0f for x above ~17 (float rounding).
    dst[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(src[i]))));
  }
  return out;
}

Tensor pixel_shuffle(const Tensor& t, std::size_t r) {
  if (r == 0 || t.channels() % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(t.channels()) + " channels not divisible by r^2 = " +
                     std::to_string(r * r));
  }
  const std::size_t C = t.channels() / (r * r);
  const std::size_t H = t.height();
  const std::size_t W = t.width();
  Tensor out = Tensor::zeros(C, H * r, W * r);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t dy = 0; dy < r; ++dy) {
      for (std::size_t dx = 0; dx < r; ++dx) {
        const std::size_t src_c = c * r * r + dy * r + dx;
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t x = 0; x < W; ++x) out.at(c, y * r + dy, x * r + dx) = t.at(src_c, y, x);
        }
      }
    }
  }
  return out;
}

Tensor pixel_unshuffle(const Tensor& t, std::size_t r) {
  if (r == 0 || t.height() % r != 0 || t.width() % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial size " + t.shape().str() + " not divisible by r = " +
                     std::to_string(r));
  }
  const std::size_t H = t.height() / r;
  const std::size_t W = t.width() / r;
  Tensor out = Tensor::zeros(t.channels() * r * r, H, W);
  for (std::size_t c = 0; c < t.channels(); ++c) {
    for (std::size_t dy = 0; dy < r; ++dy) {
      for (std::size_t dx = 0; dx < r; ++dx) {
        const std::size_t dst_c = c * r * r + dy * r + dx;
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t x = 0; x < W; ++x) out.at(dst_c, y, x) = t.at(c, y * r + dy, x * r + dx);
        }
      }
    }
  }
  return out;
}

Tensor repeat_channels(const Tensor& t, std::size_t times) {
  if (times == 0) throw ShapeError("repeat_channels: times must be >= 1");
  Tensor out = Tensor::zeros(t.channels() * times, t.height(), t.width());
  for (std::size_t c = 0; c < t.channels(); ++c) {
    const auto src = t.channel(c);
    for (std::size_t k = 0; k < times; ++k) std::copy(src.begin(), src.end(), out.channel(c * times + k).begin());
  }
  return out;
}

Tensor nearest_upscale(const Tensor& t, std::size_t r) {
  if (r == 0) throw ShapeError("nearest_upscale: r must be >= 1");
  Tensor out = Tensor::zeros(t.channels(), t.height() * r, t.width() * r);
  for (std::size_t c = 0; c < out.channels(); ++c) {
    for (std::size_t y = 0; y < out.height(); ++y) {
      for (std::size_t x = 0; x < out.width(); ++x) out.at(c, y, x) = t.at(c, y / r, x / r);
    }
  }
  return out;
}

void set_num_threads(int n) { openblas_set_num_threads(std::max(1, n)); }

}  // namespace plksr
