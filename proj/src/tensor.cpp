// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#include "plksr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace plksr {

namespace {

std::atomic<std::size_t> g_live{0};
std::atomic<std::size_t> g_peak{0};

void raise_peak(std::size_t candidate) {
  std::size_t peak = g_peak.load(std::memory_order_relaxed);
  while (candidate > peak && !g_peak.compare_exchange_weak(peak, candidate, std::memory_order_relaxed)) {
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

namespace detail {

void note_alloc(std::size_t bytes) {
  const std::size_t live = g_live.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  raise_peak(live);
}

void note_free(std::size_t bytes) { g_live.fetch_sub(bytes, std::memory_order_relaxed); }

}  // namespace detail

AllocStats alloc_stats() { return {g_live.load(), g_peak.load()}; }
std::size_t peak_memory() { return g_peak.load(); }
std::size_t live_memory() { return g_live.load(); }
void reset_peak() { g_peak.store(g_live.load()); }

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << channels << "," << height << "," << width << ")";
  return os.str();
}

Tensor::Tensor(const Shape& shape) : shape_(shape) {
  if (shape.channels == 0 || shape.height == 0 || shape.width == 0) {
    throw ShapeError("tensor dimensions must be >= 1, got " + shape.str());
  }
  constexpr std::size_t max_elems = std::numeric_limits<std::ptrdiff_t>::max() / sizeof(float);
  if (shape.height > max_elems / shape.width || shape.plane() > max_elems / shape.channels) {
    throw ShapeError("tensor dimensions overflow addressable size: " + shape.str());
  }
  data_.assign(shape.numel(), 0.0f);
}

Tensor Tensor::zeros(std::size_t channels, std::size_t height, std::size_t width) {
  return Tensor(Shape{channels, height, width});
}

Tensor Tensor::filled(const Shape& shape, float value) {
  Tensor t(shape);
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::from_values(const Shape& shape, std::span<const float> values) {
  Tensor t(shape);
  if (values.size() != t.size()) {
    throw ShapeError("from_values: expected " + std::to_string(t.size()) + " values for " + shape.str() + ", got " +
                     std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), t.data_.begin());
  return t;
}

Tensor elementwise_add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise_add");
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  return out;
}

Tensor hadamard_mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard_mul");
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return out;
}

Tensor slice_channels(const Tensor& t, std::size_t from, std::size_t to) {
  if (from >= to || to > t.channels()) {
    throw ShapeError("slice_channels: invalid range [" + std::to_string(from) + ", " + std::to_string(to) +
                     ") for " + std::to_string(t.channels()) + " channels");
  }
  Tensor out = Tensor::zeros(to - from, t.height(), t.width());
  const auto plane = t.shape().plane();
  auto src = t.data().subspan(from * plane, (to - from) * plane);
  std::copy(src.begin(), src.end(), out.data().begin());
  return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: empty part list");
  const auto height = parts.front().height();
  const auto width = parts.front().width();
  std::size_t channels = 0;
  for (const auto& p : parts) {
    if (p.height() != height || p.width() != width) {
      throw ShapeError("concat_channels: spatial mismatch " + parts.front().shape().str() + " vs " + p.shape().str());
    }
    channels += p.channels();
  }
  Tensor out = Tensor::zeros(channels, height, width);
  auto dst = out.data().begin();
  for (const auto& p : parts) dst = std::copy(p.data().begin(), p.data().end(), dst);
  return out;
}

Tensor concat_channels(std::initializer_list<Tensor> parts) {
  return concat_channels(std::span<const Tensor>(parts.begin(), parts.size()));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i])));
  }
  return worst;
}

double checksum(const Tensor& t) {
  double sum = 0.0;
  for (float v : t.data()) sum += v;
  return sum;
}

}  // namespace plksr
