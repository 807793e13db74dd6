// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "plksr/reparam.hpp"
#include "support.hpp"

using namespace plksr;
using plksr::testing::random_rect;
using plksr::testing::random_tensor;
using plksr::testing::reference_dilated_conv;
using plksr::testing::TempDir;

namespace {

// Sum of per-branch oracles, independent of merge_branches and branch_conv2d.
Tensor oracle_sum(const Tensor& x, const std::vector<BranchSpec>& branches) {
  Tensor acc = reference_dilated_conv(x, branches.front().kernel, branches.front().dilation);
  for (std::size_t b = 1; b < branches.size(); ++b)
    acc = elementwise_add(acc, reference_dilated_conv(x, branches[b].kernel, branches[b].dilation));
  return acc;
}

std::vector<BranchSpec> make_branches(const std::vector<plksr::testing::BranchShape>& layout, std::size_t out,
                                      std::size_t in, std::mt19937_64& rng) {
  std::vector<BranchSpec> branches;
  for (const auto& s : layout) {
    const float bound = static_cast<float>(1.0 / std::sqrt(static_cast<double>(in * s.kh * s.kw)));
    branches.push_back({random_rect(out, in, s.kh, s.kw, rng, bound), s.dilation});
  }
  return branches;
}

}  // namespace

TEST_CASE("expand_dilated") {
  std::mt19937_64 rng(40);
  const RectKernel k3 = random_rect(2, 3, 3, 3, rng);
  CHECK(expand_dilated(k3, 1) == k3);

  const RectKernel d2 = expand_dilated(k3, 2);
  CHECK(d2.kh == 5);
  CHECK(d2.kw == 5);
  CHECK(d2.bias == k3.bias);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 5; ++x) {
          if (y % 2 == 0 && x % 2 == 0)
            CHECK(d2.w(o, i, y, x) == k3.w(o, i, y / 2, x / 2));
          else
            CHECK(d2.w(o, i, y, x) == 0.0f);
        }

  const RectKernel d3 = expand_dilated(k3, 3);
  CHECK(d3.kh == 7);
  const Tensor x = random_tensor({3, 15, 14}, rng);
  CHECK(max_abs_diff(reference_dilated_conv(x, d3, 1), reference_dilated_conv(x, k3, 3)) <= 1e-5);
  CHECK(max_abs_diff(conv2d_naive(x, d3.to_square()), reference_dilated_conv(x, k3, 3)) <= 1e-5);

  // Non-zero taps and L1 mass are preserved.
  auto nonzero = [](const RectKernel& k) {
    std::vector<float> v;
    for (float w : k.weights)
      if (w != 0.0f) v.push_back(w);
    std::sort(v.begin(), v.end());
    return v;
  };
  auto l1 = [](const RectKernel& k) {
    double s = 0;
    for (float w : k.weights) s += std::abs(w);
    return s;
  };
  const RectKernel rect = random_rect(2, 2, 3, 5, rng);
  for (std::size_t d : {2, 3, 4}) {
    const RectKernel e = expand_dilated(rect, d);
    CHECK(e.kh == 2 * d + 1);
    CHECK(e.kw == 4 * d + 1);
    CHECK(nonzero(e) == nonzero(rect));
    CHECK(l1(e) == doctest::Approx(l1(rect)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(expand_dilated(k3, 0), ReparamError);

  const ConvKernel sq = k3.to_square();
  CHECK(RectKernel::from_square(expand_dilated(sq, 2)) == d2);
}

TEST_CASE("rect kernel validation") {
  CHECK_THROWS_AS(RectKernel::zeros(1, 1, 4, 3), ReparamError);
  CHECK_NOTHROW(RectKernel::zeros(1, 1, 3, 3).to_square());
  CHECK_THROWS_AS(RectKernel::zeros(1, 1, 3, 5).to_square(), ReparamError);
}

TEST_CASE("merge of a single branch is the branch") {
  std::mt19937_64 rng(41);
  const RectKernel k = random_rect(4, 4, 7, 7, rng);
  const std::vector<BranchSpec> one{{k, 1}};
  CHECK(merge_branches(one, 7) == k.to_square());

  // Absorbing a zero 5x5 branch leaves the merged kernel unchanged.
  const std::vector<BranchSpec> with_zero{{k, 1}, {RectKernel::zeros(4, 4, 5, 5), 1}};
  CHECK(merge_branches(with_zero, 7) == k.to_square());
}

TEST_CASE("merge matches the multi-branch sum") {
  std::mt19937_64 rng(42);
  for (const auto& layout : plksr::testing::reference_branch_layouts()) {
    const auto branches = make_branches(layout, 6, 5, rng);
    const ConvKernel merged = merge_branches(branches, 17);
    CHECK(merged.k == 17);
    const Tensor x = random_tensor({5, 32, 32}, rng);
    const Tensor expected = oracle_sum(x, branches);
    CHECK(max_abs_diff(conv2d_naive(x, merged), expected) <= 1e-4);
    CHECK(max_abs_diff(conv2d_fast(x, merged), expected) <= 1e-4);
    CHECK(max_abs_diff(multi_branch_conv2d(x, branches), expected) <= 1e-4);
  }

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<plksr::testing::BranchShape> layout;
    const std::size_t target = 5 + 2 * (rng() % 5);
    const std::size_t n = 1 + rng() % 4;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t d = 1 + rng() % 3;
      const std::size_t max_side = (target - 1) / d + 1;
      const std::size_t kh = 1 + 2 * (rng() % ((max_side + 1) / 2));
      const std::size_t kw = 1 + 2 * (rng() % ((max_side + 1) / 2));
      layout.push_back({kh, kw, d});
    }
    const std::size_t out = 1 + rng() % 6, in = 1 + rng() % 6;
    const auto branches = make_branches(layout, out, in, rng);
    const Tensor x = random_tensor({in, 20, 23}, rng);
    CHECK(max_abs_diff(conv2d_naive(x, merge_branches(branches, target)), oracle_sum(x, branches)) <= 1e-4);
  }
}

TEST_CASE("merge is independent of branch order") {
  std::mt19937_64 rng(43);
  const auto branches = make_branches(plksr::testing::reference_branch_layouts()[2], 3, 3, rng);
  const ConvKernel reference = merge_branches(branches, 17);
  std::vector<std::size_t> order(branches.size());
  std::iota(order.begin(), order.end(), 0);
  int permutations = 0;
  do {
    std::vector<BranchSpec> shuffled;
    for (std::size_t i : order) shuffled.push_back(branches[i]);
    CHECK(merge_branches(shuffled, 17) == reference);
    ++permutations;
  } while (std::next_permutation(order.begin(), order.end()));
  CHECK(permutations == 120);
}

TEST_CASE("merge errors") {
  std::mt19937_64 rng(44);
  const std::vector<BranchSpec> none;
  CHECK_THROWS_AS(merge_branches(none, 5), ReparamError);

  const std::vector<BranchSpec> oversize{{random_rect(2, 2, 5, 5, rng), 2}};
  CHECK_THROWS_AS(merge_branches(oversize, 7), ReparamError);
  CHECK_NOTHROW(merge_branches(oversize, 9));

  const std::vector<BranchSpec> mismatch{{random_rect(2, 2, 3, 3, rng), 1}, {random_rect(2, 3, 3, 3, rng), 1}};
  CHECK_THROWS_AS(merge_branches(mismatch, 5), ReparamError);

  const std::vector<BranchSpec> zero_dilation{{random_rect(2, 2, 3, 3, rng), 0}};
  CHECK_THROWS_AS(merge_branches(zero_dilation, 5), ReparamError);
  CHECK_THROWS_AS(merge_branches(oversize, 10), ReparamError);
}

TEST_CASE("kernel container round trip and malformed files") {
  TempDir dir;
  std::mt19937_64 rng(45);
  const std::vector<RectKernel> kernels{random_rect(2, 3, 17, 5, rng), random_rect(2, 3, 9, 9, rng)};
  save_kernel_container(dir / "k.plkt", kernels);
  CHECK(load_kernel_container(dir / "k.plkt") == kernels);

  std::ifstream in(dir / "k.plkt", std::ios::binary);
  std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  in.close();
  auto write = [&](const std::vector<char>& b) {
    std::ofstream out(dir / "bad.plkt", std::ios::binary);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };

  auto bad_magic = bytes;
  bad_magic[1] = 'Q';
  write(bad_magic);
  CHECK_THROWS_AS(load_kernel_container(dir / "bad.plkt"), Error);

  write(std::vector<char>(bytes.begin(), bytes.end() - 3));
  CHECK_THROWS_AS(load_kernel_container(dir / "bad.plkt"), Error);

  auto trailing = bytes;
  trailing.push_back(1);
  write(trailing);
  CHECK_THROWS_AS(load_kernel_container(dir / "bad.plkt"), Error);

  CHECK_THROWS_AS(load_kernel_container(dir / "absent.plkt"), Error);

  const std::vector<RectKernel> even{RectKernel{1, 1, 2, 2, std::vector<float>(4), std::vector<float>(1)}};
  CHECK_THROWS_AS(save_kernel_container(dir / "even.plkt", even), ReparamError);
  CHECK_FALSE(std::filesystem::exists(dir / "even.plkt"));
}
