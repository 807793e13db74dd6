// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#include "plksr/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace plksr {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kRange = 255.0;
constexpr double kC1 = (0.01 * kRange) * (0.01 * kRange);
constexpr double kC2 = (0.03 * kRange) * (0.03 * kRange);

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double sum = 0.0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(kWindow / 2);
    taps[i] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable valid-region filtering of a (H x W) plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t H, std::size_t W,
                                 const std::array<double, kWindow>& taps) {
  const std::size_t OH = H - kWindow + 1;
  const std::size_t OW = W - kWindow + 1;
  std::vector<double> rows(H * OW);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < OW; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * plane[y * W + x + k];
      rows[y * OW + x] = acc;
    }
  }
  std::vector<double> out(OH * OW);
  for (std::size_t y = 0; y < OH; ++y) {
    for (std::size_t x = 0; x < OW; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * rows[(y + k) * OW + x];
      out[y * OW + x] = acc;
    }
  }
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

Tensor rgb_to_y(const ImageU8& img) {
  Tensor y = Tensor::zeros(1, img.height, img.width);
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      const auto* p = img.pixel(r, c);
      const double luma = (65.481 * p[0] + 128.553 * p[1] + 24.966 * p[2]) / 255.0 + 16.0;
      y.at(0, r, c) = static_cast<float>(luma);
    }
  }
  return y;
}

Tensor crop_border(const Tensor& t, std::size_t pixels) {
  if (2 * pixels >= t.height() || 2 * pixels >= t.width()) {
    throw ShapeError("crop_border: cropping " + std::to_string(pixels) + " px per side exceeds " + t.shape().str());
  }
  if (pixels == 0) return t;
  Tensor out = Tensor::zeros(t.channels(), t.height() - 2 * pixels, t.width() - 2 * pixels);
  for (std::size_t c = 0; c < out.channels(); ++c)
    for (std::size_t y = 0; y < out.height(); ++y)
      for (std::size_t x = 0; x < out.width(); ++x) out.at(c, y, x) = t.at(c, y + pixels, x + pixels);
  return out;
}

double psnr(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "psnr");
  double se = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(x.size());
  return 10.0 * std::log10(kRange * kRange / mse);
}

double ssim(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "ssim");
  const std::size_t H = a.height();
  const std::size_t W = a.width();
  if (H < kWindow || W < kWindow) {
    throw ShapeError("ssim: image " + a.shape().str() + " is smaller than the 11x11 window");
  }
  const auto taps = gaussian_taps();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    std::vector<double> pa(H * W), pb(H * W), paa(H * W), pbb(H * W), pab(H * W);
    const auto ca = a.channel(c);
    const auto cb = b.channel(c);
    for (std::size_t i = 0; i < H * W; ++i) {
      pa[i] = ca[i];
      pb[i] = cb[i];
      paa[i] = pa[i] * pa[i];
      pbb[i] = pb[i] * pb[i];
      pab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, H, W, taps);
    const auto mu_b = filter_valid(pb, H, W, taps);
    const auto e_aa = filter_valid(paa, H, W, taps);
    const auto e_bb = filter_valid(pbb, H, W, taps);
    const auto e_ab = filter_valid(pab, H, W, taps);
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i];
      const double mb = mu_b[i];
      const double var_a = e_aa[i] - ma * ma;
      const double var_b = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      const double num = (2.0 * ma * mb + kC1) * (2.0 * cov + kC2);
      const double den = (ma * ma + mb * mb + kC1) * (var_a + var_b + kC2);
      total += num / den;
    }
    count += mu_a.size();
  }
  return total / static_cast<double>(count);
}

QualityScore evaluate_y(const ImageU8& restored, const ImageU8& reference, std::size_t crop) {
  if (restored.height != reference.height || restored.width != reference.width) {
    throw ShapeError("evaluate_y: restored image is " + std::to_string(restored.width) + "x" +
                     std::to_string(restored.height) + ", reference is " + std::to_string(reference.width) + "x" +
                     std::to_string(reference.height));
  }
  const Tensor ya = crop_border(rgb_to_y(restored), crop);
  const Tensor yb = crop_border(rgb_to_y(reference), crop);
  return {psnr(ya, yb), ssim(ya, yb)};
}

}  // namespace plksr
