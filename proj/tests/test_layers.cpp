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

#include <cstring>
#include <random>

#include "oracles.hpp"
#include "pvlu/checkpoint.hpp"
#include "pvlu/errors.hpp"
#include "pvlu/harness.hpp"
#include "pvlu/layers.hpp"
#include "pvlu/model_zoo.hpp"

namespace pvlu {
namespace {

Model tiny(const std::string& layers, const Shape& input, std::uint64_t seed = 1,
           ActivationSpec a = ActivationSpec::relu()) {
  return Model::build(parse_layers(layers, a), input, seed);
}

std::vector<ParamPtr> params_with(const Model& m, ParamRole role) {
  std::vector<ParamPtr> out;
  for (const ParamPtr& p : m.parameters())
    if (p->role == role) out.push_back(p);
  return out;
}

TEST(Build, DenseWeightShape) {
  Model m = tiny("dense:10,relu", {5});
  ASSERT_EQ(m.parameters().size(), 2u);
  EXPECT_EQ(m.parameters()[0]->value.shape(), (Shape{5, 10}));
  EXPECT_EQ(m.parameters()[1]->value.shape(), (Shape{10}));
  EXPECT_EQ(m.output_shape(), (Shape{10}));
}

TEST(Build, SameSeedSameParameters) {
  Model a = tiny("conv:4,relu,pool,flatten,dense:3,softmax", {1, 8, 8}, 42);
  Model b = tiny("conv:4,relu,pool,flatten,dense:3,softmax", {1, 8, 8}, 42);
  Model c = tiny("conv:4,relu,pool,flatten,dense:3,softmax", {1, 8, 8}, 43);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(pa[i]->value.bitwise_equal(pb[i]->value));
  EXPECT_FALSE(pa[0]->value.bitwise_equal(pc[0]->value));
}

TEST(Build, ShapeErrorNamesLayer) {
  try {
    tiny("conv:4,relu,dense:3", {1, 8, 8});
    FAIL() << "expected a build error";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(tiny("pool:16", {1, 8, 8}), ShapeError);
}

TEST(Build, DropoutRateRange) {
  EXPECT_THROW(Model::build({LayerSpec{layer::Dropout{1.0}}}, {4}, 0), std::exception);
}

TEST(Build, ResidualProjectionWhenChannelsChange) {
  Model m = tiny("conv:4,res(conv:8,relu,conv:8)", {2, 6, 6});
  EXPECT_EQ(m.output_shape(), (Shape{8, 6, 6}));
  bool has_projection = false;
  for (const ParamPtr& p : m.parameters()) has_projection |= p->name == "residual.projection";
  EXPECT_TRUE(has_projection);
}

TEST(Forward, ResidualWithZeroInnerIsIdentity) {
  Model m = tiny("res(conv:3,relu,conv:3)", {3, 5, 5});
  for (const ParamPtr& p : m.parameters()) p->value = Tensor(p->value.shape());
  std::mt19937_64 rng(2);
  Tensor x = oracle::random_tensor({2, 3, 5, 5}, rng);
  EXPECT_TRUE(m.logits(x).bitwise_equal(x));
}

TEST(Forward, HandSetDense) {
  Model m = tiny("dense:1", {2});
  m.parameters()[0]->value = Tensor({2, 1}, {1.0, 1.0});
  m.parameters()[1]->value = Tensor({1}, {0.0});
  Tensor out = m.logits(Tensor({1, 2}, {1.0, 2.0}));
  ASSERT_EQ(out.shape(), (Shape{1, 1}));
  EXPECT_EQ(out[0], 3.0);
}

TEST(Forward, EvalIsDeterministic) {
  Model m = Model::build(named_model("cifar6", ActivationSpec::pvlu(), 10, 4), {3, 16, 16}, 3);
  std::mt19937_64 rng(3);
  Tensor x = oracle::random_tensor({3, 3, 16, 16}, rng, 0.0, 1.0);
  EXPECT_TRUE(m.logits(x).bitwise_equal(m.logits(x)));
}

TEST(Forward, SoftmaxRowsSumToOne) {
  Model m = Model::build(named_model("tiny-cnn", ActivationSpec::relu(), 5), {1, 8, 8}, 4);
  std::mt19937_64 rng(4);
  Tensor p = softmax(m.logits(oracle::random_tensor({6, 1, 8, 8}, rng)));
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) s += p[r * 5 + c];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Forward, BatchShapeMismatch) {
  Model m = tiny("dense:3", {4});
  EXPECT_THROW(m.logits(Tensor({2, 5})), ShapeError);
}

TEST(Forward, NonFiniteNamesLayer) {
  Model m = tiny("dense:3,relu,dense:2", {2});
  m.parameters()[0]->value[0] = std::numeric_limits<double>::infinity();
  try {
    m.logits(Tensor({1, 2}, 1.0));
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("dense"), std::string::npos) << e.what();
  }
}

TEST(Forward, DropoutTrainVsEval) {
  Model m = tiny("dropout:0.5", {50});
  Tensor x({4, 50}, 1.0);
  EXPECT_TRUE(m.logits(x).bitwise_equal(x));
  std::mt19937_64 rng(5);
  ForwardPass fp = m.forward(x, Mode::Train, &rng);
  std::size_t zeros = 0;
  for (double v : fp.graph.value(fp.logits).data()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    zeros += v == 0.0;
  }
  EXPECT_GT(zeros, 0u);
  EXPECT_LT(zeros, 200u);
}

TEST(Forward, BatchNormEvalUsesRunningStats) {
  Model m = tiny("bn", {2, 3, 3});
  std::mt19937_64 rng(6);
  Tensor x = oracle::random_tensor({4, 2, 3, 3}, rng, 2.0, 3.0);
  // Fresh running stats are mean 0, var 1.
  Tensor eval = m.logits(x);
  EXPECT_LT(max_abs_diff(eval, scale(x, 1.0 / std::sqrt(1.0 + kBatchNormEpsilon))), 1e-12);
  m.forward(x, Mode::Train, &rng);
  EXPECT_GT(m.layers()[0].running_mean[0], 0.1);
}

TEST(Substitute, FinetuneInitIsBitwiseIdentical) {
  for (const char* name : {"tiny-cnn", "cifar6", "resnet-mini", "mlp"}) {
    Model m = Model::build(named_model(name, ActivationSpec::relu(), 10, 4), {3, 8, 8}, 7);
    Model s = substitute_pvlu(m, PvluInit::finetune());
    EXPECT_EQ(count_activation_layers(s, ActivationTag::Relu), 0u) << name;
    EXPECT_EQ(count_activation_layers(s, ActivationTag::Pvlu), count_activation_layers(m, ActivationTag::Relu));
    std::mt19937_64 rng(8);
    for (int b = 0; b < 10; ++b) {
      Tensor x = oracle::random_tensor({3, 3, 8, 8}, rng);
      EXPECT_TRUE(m.logits(x).bitwise_equal(s.logits(x))) << name;
    }
  }
}

TEST(Substitute, ChannelCounts) {
  Model m = tiny("conv:8,relu,conv:16,relu,conv:32,relu", {1, 4, 4});
  Model s = substitute_pvlu(m, PvluInit::finetune());
  std::vector<std::size_t> lengths;
  for (const ParamPtr& p : params_with(s, ParamRole::PvluAlpha)) lengths.push_back(p->value.size());
  EXPECT_EQ(lengths, (std::vector<std::size_t>{8, 16, 32}));
  for (const ParamPtr& p : params_with(s, ParamRole::PvluBeta)) {
    for (double v : p->value.data()) EXPECT_EQ(v, 1.0);
  }
}

TEST(Substitute, ScratchAlphaIsHalf) {
  Model s = substitute_pvlu(tiny("dense:6,relu,dense:2", {3}), PvluInit::scratch());
  for (const ParamPtr& p : params_with(s, ParamRole::PvluAlpha)) {
    for (double v : p->value.data()) EXPECT_EQ(v, 0.5);
  }
}

TEST(Substitute, OtherParametersKeepValuesAndIds) {
  Model m = tiny("conv:4,bn,relu,flatten,dense:2", {1, 4, 4});
  Model s = substitute_pvlu(m, PvluInit::finetune());
  auto before = m.parameters();
  std::vector<ParamPtr> after;
  for (const ParamPtr& p : s.parameters())
    if (p->role != ParamRole::PvluAlpha && p->role != ParamRole::PvluBeta) after.push_back(p);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i]->id, after[i]->id);
    EXPECT_TRUE(before[i]->value.bitwise_equal(after[i]->value));
  }
  // The original model is not aliased.
  after[0]->value[0] += 1.0;
  EXPECT_NE(before[0]->value[0], after[0]->value[0]);
}

TEST(Substitute, NoReluIsNoOp) {
  Model m = tiny("dense:3,elu,dense:2", {3});
  Model s = substitute_pvlu(m, PvluInit::finetune());
  EXPECT_EQ(s.parameters().size(), m.parameters().size());
}

TEST(SetTrainable, PvluAndBatchNormOnly) {
  Model s = substitute_pvlu(tiny("conv:4,bn,relu,flatten,dense:2", {1, 4, 4}), PvluInit::finetune());
  const std::size_t selected = set_trainable(s, pvlu_and_batchnorm());
  EXPECT_EQ(selected, 4u);
  for (const ParamPtr& p : s.parameters()) {
    const bool expect = p->role == ParamRole::PvluAlpha || p->role == ParamRole::PvluBeta ||
                        p->role == ParamRole::BatchNormScale || p->role == ParamRole::BatchNormShift;
    EXPECT_EQ(p->trainable, expect) << p->name;
  }
  set_trainable(s, policy::All{});
  for (const ParamPtr& p : s.parameters()) EXPECT_TRUE(p->trainable);
}

TEST(SetTrainable, HeadPolicy) {
  Model m = tiny("dense:4,relu,dense:3,relu,dense:2", {3});
  set_trainable(m, policy::Head{1});
  auto ps = m.parameters();
  for (std::size_t i = 0; i + 2 < ps.size(); ++i) EXPECT_FALSE(ps[i]->trainable);
  EXPECT_TRUE(ps[ps.size() - 2]->trainable);
  EXPECT_TRUE(ps.back()->trainable);
}

TEST(SetTrainable, EmptySelectionIsError) {
  Model m = tiny("dense:3,relu,dense:2", {3});
  EXPECT_THROW(set_trainable(m, pvlu_and_batchnorm()), ContractError);
}

TEST(SetTrainable, FrozenWeightsSurviveTraining) {
  Model m = substitute_pvlu(tiny("conv:4,relu,flatten,dense:2", {1, 4, 4}), PvluInit::scratch());
  set_trainable(m, policy::Only{{ParamRole::PvluAlpha, ParamRole::PvluBeta}});
  std::vector<Tensor> frozen;
  for (const ParamPtr& p : m.parameters())
    if (!p->trainable) frozen.push_back(p->value);
  const Tensor alpha0 = params_with(m, ParamRole::PvluAlpha)[0]->value;

  Optimizer opt(opt::Adam{1e-2}, m.parameters());
  std::mt19937_64 rng(9);
  for (int step = 0; step < 10; ++step) {
    opt.zero_grad();
    ForwardPass fp = m.forward(oracle::random_tensor({4, 1, 4, 4}, rng), Mode::Train, &rng);
    fp.graph.backward(ad::softmax_cross_entropy(fp.graph, fp.logits, {0, 1, 1, 0}));
    opt.step();
  }
  std::size_t k = 0;
  for (const ParamPtr& p : m.parameters()) {
    if (!p->trainable) {
      EXPECT_TRUE(p->value.bitwise_equal(frozen[k++])) << p->name;
    }
  }
  EXPECT_FALSE(params_with(m, ParamRole::PvluAlpha)[0]->value.bitwise_equal(alpha0));
}

TEST(Policy, Parse) {
  EXPECT_TRUE(std::holds_alternative<policy::All>(parse_policy("all")));
  EXPECT_THROW(parse_policy("bogus"), ContractError);
}

TEST(Checkpoint, RoundTripIsBitwiseStable) {
  Model m = Model::build(named_model("resnet-mini", ActivationSpec::pvlu(), 10, 4), {3, 8, 8}, 10);
  std::mt19937_64 rng(10);
  for (int b = 0; b < 3; ++b) m.forward(oracle::random_tensor({4, 3, 8, 8}, rng), Mode::Train, &rng);

  const std::string bytes = serialize_checkpoint(m);
  EXPECT_EQ(bytes.substr(0, 4), "PVLU");
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  EXPECT_EQ(version, kCheckpointVersion);

  Model loaded = deserialize_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(loaded), bytes);
  Model again = deserialize_checkpoint(serialize_checkpoint(loaded));
  Tensor x = oracle::random_tensor({2, 3, 8, 8}, rng);
  EXPECT_TRUE(loaded.logits(x).bitwise_equal(again.logits(x)));
  // Parameters are stored as 32-bit floats.
  EXPECT_LT(max_abs_diff(loaded.logits(x), m.logits(x)), 1e-3);
}

TEST(Checkpoint, FileRoundTrip) {
  Model m = tiny("conv:2,relu,flatten,dense:2", {1, 3, 3}, 11);
  const auto path = std::filesystem::temp_directory_path() / "pvlu_test_ckpt.bin";
  save_checkpoint(m, path);
  Model loaded = load_checkpoint(path);
  EXPECT_EQ(serialize_checkpoint(loaded), serialize_checkpoint(m));
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptInputIsFormatError) {
  Model m = tiny("dense:2", {3});
  std::string bytes = serialize_checkpoint(m);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad), FormatError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(deserialize_checkpoint(""), FormatError);
}

TEST(ModelZoo, ParseErrors) {
  EXPECT_THROW(parse_layers("conv", ActivationSpec::relu()), ConfigError);
  EXPECT_THROW(parse_layers("res(conv:2", ActivationSpec::relu()), ConfigError);
  EXPECT_THROW(named_model("nope", ActivationSpec::relu(), 10), ConfigError);
}

}  // namespace
}  // namespace pvlu
