// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "plksr/image.hpp"
#include "plksr/tensor.hpp"

namespace plksr {

/// BT.601 studio-swing luma on the 0-255 scale:
/// Y = 65.481 R' + 128.553 G' + 24.966 B' + 16 with R' = R / 255.
Tensor rgb_to_y(const ImageU8& img);

/// Removes `pixels` rows and columns from every side.
Tensor crop_border(const Tensor& t, std::size_t pixels);

/// 10 log10(255^2 / MSE); +infinity for identical inputs.
double psnr(const Tensor& a, const Tensor& b);

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5, K1 0.01,
/// K2 0.03, L 255), computed per channel and averaged.
double ssim(const Tensor& a, const Tensor& b);

struct QualityScore {
  double psnr_db;
  double ssim;
};

/// rgb_to_y -> crop_border(crop) -> psnr / ssim.
QualityScore evaluate_y(const ImageU8& restored, const ImageU8& reference, std::size_t crop);

}  // namespace plksr
