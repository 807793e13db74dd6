// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace plksr {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when operand shapes or indices violate an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Allocation accounting
// ---------------------------------------------------------------------------

struct AllocStats {
  std::size_t live_bytes = 0;
  std::size_t peak_bytes = 0;
};

/// Process-global counters behind TrackingAllocator. Concurrent benchmark
/// runs must serialize around reset_peak().
AllocStats alloc_stats();
std::size_t peak_memory();
std::size_t live_memory();
void reset_peak();

namespace detail {
void note_alloc(std::size_t bytes);
void note_free(std::size_t bytes);
}  // namespace detail

/// std::allocator wrapper that feeds the global live/peak counters.
template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    if (n > std::numeric_limits<std::size_t>::max() / sizeof(T)) throw std::bad_array_new_length();
    T* p = std::allocator<T>{}.allocate(n);
    detail::note_alloc(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    detail::note_free(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using tracked_vector = std::vector<T, TrackingAllocator<T>>;

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

struct Shape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t plane() const { return height * width; }
  std::size_t numel() const { return channels * height * width; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense (channels, height, width) feature map of 32-bit reals stored
/// channel-major: element (c, y, x) lives at c*H*W + y*W + x.
class Tensor {
 public:
  /// Throws ShapeError on a zero dimension or when the element count overflows.
  static Tensor zeros(std::size_t channels, std::size_t height, std::size_t width);
  static Tensor zeros(const Shape& shape) { return zeros(shape.channels, shape.height, shape.width); }
  static Tensor filled(const Shape& shape, float value);
  static Tensor from_values(const Shape& shape, std::span<const float> values);
  static Tensor from_values(const Shape& shape, std::initializer_list<float> values) {
    return from_values(shape, std::span<const float>(values.begin(), values.size()));
  }

  const Shape& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::span<float> channel(std::size_t c) { return data().subspan(c * shape_.plane(), shape_.plane()); }
  std::span<const float> channel(std::size_t c) const {
    return data().subspan(c * shape_.plane(), shape_.plane());
  }

  float& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * shape_.height + y) * shape_.width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }

  bool operator==(const Tensor& other) const { return shape_ == other.shape_ && data_ == other.data_; }

 private:
  explicit Tensor(const Shape& shape);

  Shape shape_;
  tracked_vector<float> data_;
};

Tensor elementwise_add(const Tensor& a, const Tensor& b);
Tensor hadamard_mul(const Tensor& a, const Tensor& b);

/// Copy of channels [from, to).
Tensor slice_channels(const Tensor& t, std::size_t from, std::size_t to);
Tensor concat_channels(std::span<const Tensor> parts);
Tensor concat_channels(std::initializer_list<Tensor> parts);

/// Largest elementwise |a - b|; throws ShapeError on mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);
/// Sum of all elements, accumulated in double.
double checksum(const Tensor& t);

}  // namespace plksr
