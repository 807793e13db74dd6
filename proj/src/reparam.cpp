// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#include "plksr/reparam.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>
#include <tuple>

#include "plksr/atomic_file.hpp"

namespace plksr {

namespace {

constexpr char kContainerMagic[4] = {'P', 'L', 'K', 'T'};
constexpr std::uint32_t kContainerVersion = 1;

std::string dims(const RectKernel& k) {
  return "(" + std::to_string(k.out_channels) + "," + std::to_string(k.in_channels) + "," + std::to_string(k.kh) +
         "x" + std::to_string(k.kw) + ")";
}

void put_u32(std::vector<char>& buf, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  buf.insert(buf.end(), bytes, bytes + 4);
}

}  // namespace

RectKernel RectKernel::zeros(std::size_t out_channels, std::size_t in_channels, std::size_t kh, std::size_t kw) {
  RectKernel k;
  k.out_channels = out_channels;
  k.in_channels = in_channels;
  k.kh = kh;
  k.kw = kw;
  k.weights.assign(out_channels * in_channels * kh * kw, 0.0f);
  k.bias.assign(out_channels, 0.0f);
  k.validate();
  return k;
}

RectKernel RectKernel::from_square(const ConvKernel& k) {
  k.validate();
  return RectKernel{k.out_channels, k.in_channels, k.k, k.k, k.weights, k.bias};
}

ConvKernel RectKernel::to_square() const {
  validate();
  if (kh != kw) throw ReparamError("kernel " + dims(*this) + " is not square");
  return ConvKernel{out_channels, in_channels, kh, weights, bias};
}

void RectKernel::validate() const {
  if (out_channels == 0 || in_channels == 0) throw ReparamError("kernel channel counts must be >= 1");
  if (kh % 2 == 0 || kw % 2 == 0) throw ReparamError("kernel " + dims(*this) + " must have odd sides");
  if (weights.size() != out_channels * in_channels * kh * kw || bias.size() != out_channels) {
    throw ReparamError("kernel " + dims(*this) + " buffers do not match its shape");
  }
}

RectKernel expand_dilated(const RectKernel& kernel, std::size_t dilation) {
  kernel.validate();
  if (dilation == 0) throw ReparamError("dilation must be >= 1");
  if (dilation == 1) return kernel;
  RectKernel out = RectKernel::zeros(kernel.out_channels, kernel.in_channels, (kernel.kh - 1) * dilation + 1,
                                     (kernel.kw - 1) * dilation + 1);
  out.bias = kernel.bias;
  for (std::size_t o = 0; o < kernel.out_channels; ++o)
    for (std::size_t i = 0; i < kernel.in_channels; ++i)
      for (std::size_t y = 0; y < kernel.kh; ++y)
        for (std::size_t x = 0; x < kernel.kw; ++x) out.w(o, i, y * dilation, x * dilation) = kernel.w(o, i, y, x);
  return out;
}

ConvKernel expand_dilated(const ConvKernel& kernel, std::size_t dilation) {
  return expand_dilated(RectKernel::from_square(kernel), dilation).to_square();
}

ConvKernel merge_branches(std::span<const BranchSpec> branches, std::size_t target_k) {
  if (branches.empty()) throw ReparamError("merge_branches: no branches given");
  if (target_k % 2 == 0) throw ReparamError("merge_branches: target kernel size must be odd");
  const std::size_t out_channels = branches.front().kernel.out_channels;
  const std::size_t in_channels = branches.front().kernel.in_channels;

  std::vector<RectKernel> expanded;
  expanded.reserve(branches.size());
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const auto& br = branches[b];
    br.kernel.validate();
    if (br.kernel.out_channels != out_channels || br.kernel.in_channels != in_channels) {
      throw ReparamError("merge_branches: branch " + std::to_string(b) + " " + dims(br.kernel) +
                         " has different channel counts than branch 0 " + dims(branches.front().kernel));
    }
    if (br.dilation == 0) throw ReparamError("merge_branches: branch " + std::to_string(b) + " has dilation 0");
    if (br.effective_height() > target_k || br.effective_width() > target_k) {
      throw ReparamError("merge_branches: branch " + std::to_string(b) + " " + dims(br.kernel) + " at dilation " +
                         std::to_string(br.dilation) + " spans " + std::to_string(br.effective_height()) + "x" +
                         std::to_string(br.effective_width()) + ", larger than target " + std::to_string(target_k));
    }
    expanded.push_back(expand_dilated(br.kernel, br.dilation));
  }

  // Canonical order: shape first, then weight values.
  std::vector<std::size_t> order(expanded.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ka = expanded[a];
    const auto& kb = expanded[b];
    return std::tie(ka.kh, ka.kw, ka.weights, ka.bias) < std::tie(kb.kh, kb.kw, kb.weights, kb.bias);
  });

  ConvKernel merged = ConvKernel::zeros(out_channels, in_channels, target_k);
  for (std::size_t idx : order) {
    const auto& k = expanded[idx];
    const std::size_t oy = (target_k - k.kh) / 2;
    const std::size_t ox = (target_k - k.kw) / 2;
    for (std::size_t o = 0; o < out_channels; ++o) {
      merged.bias[o] += k.bias[o];
      for (std::size_t i = 0; i < in_channels; ++i)
        for (std::size_t y = 0; y < k.kh; ++y)
          for (std::size_t x = 0; x < k.kw; ++x) merged.w(o, i, oy + y, ox + x) += k.w(o, i, y, x);
    }
  }
  return merged;
}

Tensor branch_conv2d(const Tensor& input, const BranchSpec& branch) {
  const auto& k = branch.kernel;
  k.validate();
  if (input.channels() != k.in_channels) {
    throw ShapeError("branch_conv2d: input has " + std::to_string(input.channels()) + " channels, kernel expects " +
                     std::to_string(k.in_channels));
  }
  const auto H = static_cast<std::ptrdiff_t>(input.height());
  const auto W = static_cast<std::ptrdiff_t>(input.width());
  const auto d = static_cast<std::ptrdiff_t>(branch.dilation);
  const auto pad_y = static_cast<std::ptrdiff_t>(branch.effective_height() / 2);
  const auto pad_x = static_cast<std::ptrdiff_t>(branch.effective_width() / 2);
  Tensor out = Tensor::zeros(k.out_channels, input.height(), input.width());

  for (std::size_t o = 0; o < k.out_channels; ++o) {
    auto dst = out.channel(o);
    std::fill(dst.begin(), dst.end(), k.bias[o]);
    for (std::size_t i = 0; i < k.in_channels; ++i) {
      const auto src = input.channel(i);
      for (std::size_t ky = 0; ky < k.kh; ++ky) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) * d - pad_y;
        for (std::size_t kx = 0; kx < k.kw; ++kx) {
          const float w = k.w(o, i, ky, kx);
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) * d - pad_x;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
          for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, -dy); y < std::min<std::ptrdiff_t>(H, H - dy); ++y) {
            float* row = dst.data() + y * W;
            const float* s = src.data() + (y + dy) * W + dx;
            for (std::ptrdiff_t x = x0; x < x1; ++x) row[x] += w * s[x];
          }
        }
      }
    }
  }
  return out;
}

Tensor multi_branch_conv2d(const Tensor& input, std::span<const BranchSpec> branches) {
  if (branches.empty()) throw ReparamError("multi_branch_conv2d: no branches given");
  Tensor sum = branch_conv2d(input, branches.front());
  for (std::size_t b = 1; b < branches.size(); ++b) sum = elementwise_add(sum, branch_conv2d(input, branches[b]));
  return sum;
}

void save_kernel_container(const std::filesystem::path& path, std::span<const RectKernel> kernels) {
  std::vector<char> buf(kContainerMagic, kContainerMagic + 4);
  put_u32(buf, kContainerVersion);
  put_u32(buf, static_cast<std::uint32_t>(kernels.size()));
  for (const auto& k : kernels) {
    k.validate();
    put_u32(buf, static_cast<std::uint32_t>(k.out_channels));
    put_u32(buf, static_cast<std::uint32_t>(k.in_channels));
    put_u32(buf, static_cast<std::uint32_t>(k.kh));
    put_u32(buf, static_cast<std::uint32_t>(k.kw));
    for (const auto* v : {&k.weights, &k.bias}) {
      const char* bytes = reinterpret_cast<const char*>(v->data());
      buf.insert(buf.end(), bytes, bytes + v->size() * sizeof(float));
    }
  }
  write_file_atomic(path, buf);
}

std::vector<RectKernel> load_kernel_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReparamError("cannot open kernel file " + path.string());
  const std::vector<char> buf{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::size_t pos = 0;
  auto need = [&](std::size_t n, const std::string& what) {
    if (buf.size() - pos < n) throw ReparamError(path.string() + ": truncated in " + what);
  };
  auto u32 = [&](const std::string& what) {
    need(4, what);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  };
  if (buf.size() < 4 || std::memcmp(buf.data(), kContainerMagic, 4) != 0) {
    throw ReparamError(path.string() + ": bad magic (not a PLKT kernel file)");
  }
  pos = 4;
  if (const auto version = u32("header"); version != kContainerVersion) {
    throw ReparamError(path.string() + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = u32("header");
  std::vector<RectKernel> kernels;
  for (std::uint32_t n = 0; n < count; ++n) {
    const std::string name = "kernel " + std::to_string(n);
    RectKernel k;
    k.out_channels = u32(name);
    k.in_channels = u32(name);
    k.kh = u32(name);
    k.kw = u32(name);
    if (k.out_channels == 0 || k.in_channels == 0 || k.kh % 2 == 0 || k.kw % 2 == 0 || k.kh > 1023 ||
        k.kw > 1023 || k.out_channels > 65536 || k.in_channels > 65536) {
      throw ReparamError(path.string() + ": " + name + " has invalid shape " + dims(k));
    }
    const std::size_t n_weights = k.out_channels * k.in_channels * k.kh * k.kw;
    need((n_weights + k.out_channels) * sizeof(float), name);
    k.weights.resize(n_weights);
    k.bias.resize(k.out_channels);
    std::memcpy(k.weights.data(), buf.data() + pos, n_weights * sizeof(float));
    pos += n_weights * sizeof(float);
    std::memcpy(k.bias.data(), buf.data() + pos, k.out_channels * sizeof(float));
    pos += k.out_channels * sizeof(float);
    kernels.push_back(std::move(k));
  }
  if (pos != buf.size()) throw ReparamError(path.string() + ": trailing bytes after " + std::to_string(count) + " kernels");
  return kernels;
}

}  // namespace plksr
