// Copyright 2026 The PVLU Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pvlu/errors.hpp"
#include "pvlu/tensor.hpp"

namespace pvlu {
namespace {

TEST(Tensor, CreateZeros) {
  Tensor t = Tensor::create({2, 2}, fill::Zeros{});
  ASSERT_EQ(t.shape(), (Shape{2, 2}));
  for (double v : t.data()) EXPECT_EQ(v, 0.0);
}

TEST(Tensor, CreateConstant) {
  Tensor t = Tensor::create({3}, fill::Constant{1.5});
  ASSERT_EQ(t.size(), 3u);
  for (double v : t.data()) EXPECT_EQ(v, 1.5);
}

TEST(Tensor, SeededNormalIsDeterministic) {
  Tensor a = Tensor::create({4}, fill::SeededNormal{0.0, 1.0, 7});
  Tensor b = Tensor::create({4}, fill::SeededNormal{0.0, 1.0, 7});
  Tensor c = Tensor::create({4}, fill::SeededNormal{0.0, 1.0, 8});
  EXPECT_TRUE(a.bitwise_equal(b));
  EXPECT_FALSE(a.bitwise_equal(c));
}

TEST(Tensor, ZeroExtentRejected) {
  EXPECT_THROW(Tensor::create({2, 0}, fill::Zeros{}), ShapeError);
  EXPECT_THROW(Tensor({0}), ShapeError);
}

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, ScalarHasRankZero) {
  Tensor s = Tensor::scalar(2.5);
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(s.item(), 2.5);
}

TEST(Elementwise, Examples) {
  Tensor a({2}, {1, 2});
  Tensor b({2}, {3, 4});
  EXPECT_TRUE(add(a, b).bitwise_equal(Tensor({2}, {4, 6})));

  Tensor c({2}, {2, 3});
  EXPECT_TRUE(mul(c, c).bitwise_equal(Tensor({2}, {4, 9})));

  std::mt19937_64 rng(1);
  Tensor x = oracle::random_tensor({3, 4}, rng);
  EXPECT_TRUE(add(x, Tensor({3, 4})).bitwise_equal(x));
  EXPECT_TRUE(sub(x, x).bitwise_equal(Tensor({3, 4})));
}

TEST(Elementwise, IncompatibleShapes) {
  EXPECT_THROW(add(Tensor({2, 3}), Tensor({3, 2})), ShapeError);
  EXPECT_THROW(mul(Tensor({2, 3, 4, 4}), Tensor({4})), ShapeError);
}

TEST(Elementwise, ChannelBroadcastMatchesTiled) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t N = 1 + rng() % 3, C = 1 + rng() % 4, H = 1 + rng() % 5, W = 1 + rng() % 5;
    Tensor x = oracle::random_tensor({N, C, H, W}, rng);
    Tensor p = oracle::random_tensor({C}, rng);
    Tensor tiled({N, C, H, W});
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t w = 0; w < W; ++w) tiled.at(n, c, h, w) = p[c];
    for (EwOp op : {EwOp::Add, EwOp::Sub, EwOp::Mul}) {
      EXPECT_TRUE(ew(x, p, op).bitwise_equal(ew(x, tiled, op)));
    }
    // Keep-dims form [1,C,1,1] stretches the same way.
    EXPECT_TRUE(mul(x, p.reshaped({1, C, 1, 1})).bitwise_equal(mul(x, tiled)));
  }
}

TEST(Elementwise, ReduceToShapeInvertsBroadcast) {
  Tensor g({2, 3, 2, 2}, 1.0);
  Tensor r = reduce_to_shape(g, {3});
  ASSERT_EQ(r.shape(), (Shape{3}));
  for (double v : r.data()) EXPECT_EQ(v, 8.0);
}

TEST(Matmul, Examples) {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {1, 2, 3, 4});
  EXPECT_TRUE(matmul(eye, m).bitwise_equal(m));

  Tensor r = matmul(Tensor({1, 2}, {1, 2}), Tensor({2, 1}, {3, 4}));
  ASSERT_EQ(r.shape(), (Shape{1, 1}));
  EXPECT_EQ(r[0], 11.0);
}

TEST(Matmul, InnerMismatch) {
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST(Matmul, AgreesWithTripleLoop) {
  std::mt19937_64 rng(3);
  Tensor a = oracle::random_tensor({5, 4}, rng);
  Tensor b = oracle::random_tensor({4, 3}, rng);
  EXPECT_LT(max_abs_diff(matmul(a, b), oracle::matmul(a, b)), 1e-12);

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng() % 7, k = 1 + rng() % 7, n = 1 + rng() % 7;
    Tensor x = oracle::random_tensor({m, k}, rng);
    Tensor y = oracle::random_tensor({k, n}, rng);
    EXPECT_LT(max_abs_diff(matmul(x, y), oracle::matmul(x, y)), 1e-10);
  }
}

TEST(Matmul, TransposeFlags) {
  std::mt19937_64 rng(4);
  Tensor a = oracle::random_tensor({3, 5}, rng);
  Tensor b = oracle::random_tensor({3, 2}, rng);
  Tensor at({5, 3});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) at[j * 3 + i] = a[i * 5 + j];
  EXPECT_LT(max_abs_diff(matmul(a, b, true, false), oracle::matmul(at, b)), 1e-12);
}

TEST(Conv2d, IdentityKernelSumsChannels) {
  std::mt19937_64 rng(5);
  Tensor x = oracle::random_tensor({2, 3, 4, 4}, rng);
  Tensor k({1, 3, 1, 1}, 1.0);
  Tensor y = conv2d(x, k, 1, Padding::Same);
  ASSERT_EQ(y.shape(), (Shape{2, 1, 4, 4}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t h = 0; h < 4; ++h)
      for (std::size_t w = 0; w < 4; ++w) {
        const double expect = x.at(n, 0, h, w) + x.at(n, 1, h, w) + x.at(n, 2, h, w);
        EXPECT_NEAR(y.at(n, 0, h, w), expect, 1e-12);
      }
}

TEST(Conv2d, OnesKernelCounts) {
  Tensor y = conv2d(Tensor({1, 1, 5, 5}, 1.0), Tensor({1, 1, 3, 3}, 1.0), 1, Padding::Valid);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  for (double v : y.data()) EXPECT_EQ(v, 9.0);
}

TEST(Conv2d, KernelLargerThanInput) {
  EXPECT_THROW(conv2d(Tensor({1, 1, 2, 2}), Tensor({1, 1, 3, 3}), 1, Padding::Valid), ShapeError);
  EXPECT_THROW(conv2d(Tensor({1, 2, 4, 4}), Tensor({1, 3, 3, 3}), 1, Padding::Same), ShapeError);
}

TEST(Conv2d, AgreesWithNestedLoops) {
  std::mt19937_64 rng(6);
  Tensor x = oracle::random_tensor({1, 2, 6, 6}, rng);
  Tensor k = oracle::random_tensor({3, 2, 3, 3}, rng);
  EXPECT_LT(max_abs_diff(conv2d(x, k, 1, Padding::Valid), oracle::conv2d(x, k, 1, false)), 1e-10);

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t N = 1 + rng() % 2, C = 1 + rng() % 3, F = 1 + rng() % 3;
    const std::size_t H = 3 + rng() % 5, W = 3 + rng() % 5;
    const std::size_t kh = 1 + rng() % 3, kw = 1 + rng() % 3, stride = 1 + rng() % 2;
    const bool same = rng() % 2 == 0;
    Tensor xi = oracle::random_tensor({N, C, H, W}, rng);
    Tensor ki = oracle::random_tensor({F, C, kh, kw}, rng);
    Tensor got = conv2d(xi, ki, stride, same ? Padding::Same : Padding::Valid);
    Tensor want = oracle::conv2d(xi, ki, stride, same);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LT(max_abs_diff(got, want), 1e-10);
  }
}

TEST(Conv2d, SamePaddingExtraGoesBottomRight) {
  ConvGeometry g = conv_geometry(4, 4, 2, 2, 1, Padding::Same);
  EXPECT_EQ(g.out_h, 4u);
  EXPECT_EQ(g.pad_top, 0u);
  EXPECT_EQ(g.pad_left, 0u);
  ConvGeometry v = conv_geometry(7, 7, 3, 3, 2, Padding::Valid);
  EXPECT_EQ(v.out_h, 3u);
}

TEST(Maxpool2d, Examples) {
  PoolResult r = maxpool2d(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2);
  ASSERT_EQ(r.output.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(r.output[0], 4.0);
  EXPECT_EQ(r.argmax.at(0), 3u);

  PoolResult c = maxpool2d(Tensor({1, 2, 4, 4}, 0.7), 2, 2);
  for (double v : c.output.data()) EXPECT_EQ(v, 0.7);
}

TEST(Maxpool2d, WindowTooLarge) {
  EXPECT_THROW(maxpool2d(Tensor({1, 1, 2, 2}), 3, 1), ShapeError);
}

TEST(Maxpool2d, AgreesWithWindowScan) {
  std::mt19937_64 rng(7);
  Tensor x = oracle::random_tensor({1, 1, 4, 4}, rng);
  EXPECT_TRUE(maxpool2d(x, 2, 2).output.bitwise_equal(oracle::maxpool2d(x, 2, 2)));
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t window = 1 + rng() % 3, stride = 1 + rng() % 3;
    const std::size_t H = window + rng() % 5, W = window + rng() % 5;
    Tensor xi = oracle::random_tensor({1 + rng() % 2, 1 + rng() % 3, H, W}, rng);
    EXPECT_TRUE(maxpool2d(xi, window, stride).output.bitwise_equal(oracle::maxpool2d(xi, window, stride)));
  }
}

TEST(Maxpool2d, BackwardRoutesToArgmax) {
  Tensor x({1, 1, 2, 2}, {1, 5, 3, 4});
  PoolResult r = maxpool2d(x, 2, 2);
  Tensor g = maxpool2d_backward(Tensor({1, 1, 1, 1}, 2.0), r.argmax, x.shape());
  EXPECT_TRUE(g.bitwise_equal(Tensor({1, 1, 2, 2}, {0, 2, 0, 0})));
}

TEST(Tensor, OpsAreDeterministic) {
  std::mt19937_64 rng(8);
  Tensor x = oracle::random_tensor({2, 3, 7, 7}, rng);
  Tensor k = oracle::random_tensor({4, 3, 3, 3}, rng);
  Tensor a = oracle::random_tensor({9, 13}, rng);
  Tensor b = oracle::random_tensor({13, 6}, rng);
  EXPECT_TRUE(conv2d(x, k, 1, Padding::Same).bitwise_equal(conv2d(x, k, 1, Padding::Same)));
  EXPECT_TRUE(matmul(a, b).bitwise_equal(matmul(a, b)));
  EXPECT_TRUE(maxpool2d(x, 2, 2).output.bitwise_equal(maxpool2d(x, 2, 2).output));
  EXPECT_EQ(sum(x), sum(x));
}

TEST(Tensor, FiniteCheck) {
  Tensor t({2}, {1.0, std::nan("")});
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(check_finite(t, "test"), NumericError);
}

}  // namespace
}  // namespace pvlu
