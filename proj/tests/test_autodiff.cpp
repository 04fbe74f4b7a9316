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
#include "pvlu/activations.hpp"
#include "pvlu/autodiff.hpp"
#include "pvlu/errors.hpp"

namespace pvlu {
namespace {

double max_rel(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

TEST(Backward, SquareAtThree) {
  Graph g;
  NodeId x = g.leaf(Tensor::scalar(3.0));
  NodeId y = ad::mul(g, x, x);
  g.backward(y);
  EXPECT_EQ(g.grad(x).item(), 6.0);
}

TEST(Backward, SumOfRelu) {
  Graph g;
  NodeId x = g.leaf(Tensor({2}, {-1.0, 2.0}));
  NodeId y = ad::sum(g, ad::activate(g, act::Relu{}, x));
  g.backward(y);
  EXPECT_TRUE(g.grad(x).bitwise_equal(Tensor({2}, {0.0, 1.0})));
}

TEST(Backward, ReluSubgradientAtZeroIsZero) {
  Graph g;
  NodeId x = g.leaf(Tensor({1}, {0.0}));
  g.backward(ad::sum(g, ad::activate(g, act::Relu{}, x)));
  EXPECT_EQ(g.grad(x)[0], 0.0);
}

TEST(Backward, NonScalarLossRejected) {
  Graph g;
  NodeId x = g.leaf(Tensor({2}, 1.0));
  NodeId y = ad::mul(g, x, x);
  EXPECT_THROW(g.backward(y), ContractError);
}

TEST(Backward, EmptyGraphIsStateError) {
  Graph g;
  EXPECT_THROW(g.backward(0), StateError);
}

struct DenseNet {
  ParamPtr w1, b1, w2, b2;
  Tensor x;
  std::vector<int> labels;

  explicit DenseNet(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    w1 = make_parameter("w1", ParamRole::Weight, oracle::random_tensor({4, 6}, rng));
    b1 = make_parameter("b1", ParamRole::Bias, oracle::random_tensor({6}, rng));
    w2 = make_parameter("w2", ParamRole::Weight, oracle::random_tensor({6, 3}, rng));
    b2 = make_parameter("b2", ParamRole::Bias, oracle::random_tensor({3}, rng));
    x = oracle::random_tensor({5, 4}, rng);
    labels = {0, 2, 1, 1, 0};
  }

  double loss(Graph& g, NodeId& out) const {
    NodeId in = g.constant(x);
    NodeId h = ad::add(g, ad::matmul(g, in, g.parameter(w1)), g.parameter(b1));
    h = ad::activate(g, act::Elu{}, h);
    NodeId z = ad::add(g, ad::matmul(g, h, g.parameter(w2)), g.parameter(b2));
    out = ad::softmax_cross_entropy(g, z, labels);
    return g.value(out).item();
  }

  double loss() const {
    Graph g;
    NodeId out;
    return loss(g, out);
  }

  void zero() {
    for (auto* p : {&w1, &b1, &w2, &b2}) (*p)->zero_grad();
  }
};

TEST(Backward, TwoLayerDenseMatchesFiniteDifferences) {
  DenseNet net(11);
  Graph g;
  NodeId out;
  net.loss(g, out);
  g.backward(out);
  for (const ParamPtr& p : {net.w1, net.b1, net.w2, net.b2}) {
    Tensor numeric = finite_diff([&] { return net.loss(); }, *p);
    EXPECT_LT(max_rel(p->grad, numeric), 1e-6) << p->name;
  }
}

TEST(Backward, GradientTableMatchesParameterGrads) {
  DenseNet net(12);
  Graph g;
  NodeId out;
  net.loss(g, out);
  GradientTable table = g.backward(out);
  ASSERT_EQ(table.size(), 4u);
  EXPECT_TRUE(table.at(net.w1->id).bitwise_equal(net.w1->grad));
  EXPECT_TRUE(table.at(net.b2->id).bitwise_equal(net.b2->grad));
}

TEST(Backward, TwoPassesAccumulateExactlyTwice) {
  DenseNet net(13);
  Graph g;
  NodeId out;
  net.loss(g, out);
  g.backward(out);
  const Tensor once = net.w1->grad;
  g.backward(out);
  EXPECT_TRUE(net.w1->grad.bitwise_equal(scale(once, 2.0)));
}

TEST(Backward, ZeroThenBackwardReproducesBitwise) {
  DenseNet net(14);
  Graph g;
  NodeId out;
  net.loss(g, out);
  g.backward(out);
  const Tensor first_w1 = net.w1->grad, first_b2 = net.b2->grad;
  net.zero();
  for (double v : net.w1->grad.data()) EXPECT_EQ(v, 0.0);
  Graph g2;
  net.loss(g2, out);
  g2.backward(out);
  EXPECT_TRUE(net.w1->grad.bitwise_equal(first_w1));
  EXPECT_TRUE(net.b2->grad.bitwise_equal(first_b2));
}

TEST(Backward, FrozenParameterGetsNoGradient) {
  DenseNet net(15);
  net.w1->trainable = false;
  Graph g;
  NodeId out;
  net.loss(g, out);
  GradientTable table = g.backward(out);
  EXPECT_EQ(table.count(net.w1->id), 0u);
  for (double v : net.w1->grad.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(table.count(net.w2->id), 1u);
}

TEST(Backward, GradShapeMatchesValue) {
  DenseNet net(16);
  for (const ParamPtr& p : {net.w1, net.b1, net.w2, net.b2}) EXPECT_EQ(p->grad.shape(), p->value.shape());
}

TEST(Backward, DropoutMaskReplayedInBackward) {
  std::mt19937_64 rng(17);
  Graph g;
  NodeId x = g.leaf(Tensor({4, 8}, 1.0));
  NodeId y = ad::dropout(g, x, 0.5, rng);
  g.backward(ad::sum(g, y));
  const Tensor& out = g.value(y);
  const Tensor dx = g.grad(x);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(dx[i], out[i]);
    EXPECT_TRUE(out[i] == 0.0 || out[i] == 2.0);
  }
}

TEST(FiniteDiff, Examples) {
  auto sq = [](const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v * v;
    return s;
  };
  Tensor g = finite_diff(sq, Tensor({2}, {1.0, 2.0}));
  EXPECT_NEAR(g[0], 2.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);

  auto sines = [](const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += std::sin(v);
    return s;
  };
  EXPECT_NEAR(finite_diff(sines, Tensor({1}, {0.0}))[0], 1.0, 1e-8);
}

TEST(FiniteDiff, PvluScalarMatchesAnalytic) {
  const double x0 = 0.7, a = 0.5, b = 1.0;
  ActivationKind kind = act::Vlu{a, b};
  auto f = [&](const Tensor& x) { return act_forward(kind, x)[0]; };
  const double numeric = finite_diff(f, Tensor({1, 1}, {x0}))[0];
  const long double analytic = (long double)a * b * std::cos((long double)b * x0) + 1.0L;
  EXPECT_NEAR(numeric, double(analytic), 1e-8);
}

TEST(FiniteDiff, ParameterRestoredAfterwards) {
  ParamPtr p = make_parameter("p", ParamRole::Weight, Tensor({3}, {0.1, 0.2, 0.3}));
  const Tensor before = p->value;
  finite_diff([&] { return sum(mul(p->value, p->value)); }, *p);
  EXPECT_TRUE(p->value.bitwise_equal(before));
}

TEST(FiniteDiff, NonFiniteObjective) {
  auto f = [](const Tensor& x) { return std::log(x[0]); };
  EXPECT_THROW(finite_diff(f, Tensor({1}, {0.0})), NumericError);
}

TEST(Softmax, RowsSumToOne) {
  std::mt19937_64 rng(18);
  Tensor z = oracle::random_tensor({6, 5}, rng, -30.0, 30.0);
  Tensor p = softmax(z);
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) s += p[r * 5 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SoftmaxCrossEntropy, LabelOutOfRange) {
  Graph g;
  NodeId z = g.leaf(Tensor({2, 3}));
  EXPECT_THROW(ad::softmax_cross_entropy(g, z, {0, 3}), ContractError);
}

}  // namespace
}  // namespace pvlu
