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

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "pvlu/activations.hpp"
#include "pvlu/autodiff.hpp"
#include "pvlu/tensor.hpp"

namespace pvlu {

enum class ActivationTag { Relu, LeakyRelu, Elu, Prelu, SineRelu, Vlu, Pvlu };

/// Activation as written in a model description, before any parameters
/// exist. `p0`/`p1` carry the kind's hyperparameters or initial values:
/// leaky slope, ELU a, PReLU initial slope, SineReLU epsilon, VLU/PVLU
/// alpha and beta.
struct ActivationSpec {
  ActivationTag tag = ActivationTag::Relu;
  double p0 = 0.0;
  double p1 = 0.0;

  static ActivationSpec relu() { return {ActivationTag::Relu, 0.0, 0.0}; }
  static ActivationSpec leaky(double slope = 0.3) { return {ActivationTag::LeakyRelu, slope, 0.0}; }
  static ActivationSpec elu(double a = 1.0) { return {ActivationTag::Elu, a, 0.0}; }
  static ActivationSpec prelu(double slope = 0.25) { return {ActivationTag::Prelu, slope, 0.0}; }
  static ActivationSpec sinerelu(double epsilon = 0.0025) { return {ActivationTag::SineRelu, epsilon, 0.0}; }
  static ActivationSpec vlu(double alpha, double beta) { return {ActivationTag::Vlu, alpha, beta}; }
  static ActivationSpec pvlu(PvluInit init = PvluInit::scratch()) {
    return {ActivationTag::Pvlu, init.alpha, init.beta};
  }
};

/// Parses relu | leaky[:slope] | elu[:a] | prelu[:slope] | sinerelu[:eps] |
/// vlu[:alpha:beta] | pvlu[:alpha:beta].
ActivationSpec parse_activation(const std::string& text);
std::string activation_spec_name(const ActivationSpec& spec);

/// Instantiates the activation for a layer with `channels` channels.
ActivationKind instantiate_activation(const ActivationSpec& spec, std::size_t channels);

struct LayerSpec;

namespace layer {
struct Conv {
  std::size_t filters = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  Padding padding = Padding::Same;
};
struct Dense {
  std::size_t units = 1;
};
struct MaxPool {
  std::size_t window = 2;
  std::size_t stride = 2;
};
struct Dropout {
  double rate = 0.5;
};
struct BatchNorm {};
struct Activation {
  ActivationSpec act;
};
struct Flatten {};
/// Terminal marker: the preceding output is the logits of a softmax
/// classifier and training uses fused softmax cross-entropy.
struct SoftmaxClassifier {};
/// out = inner(x) + shortcut(x). The shortcut is a 1x1 convolution when
/// `projection` is set or when the inner output shape differs from x.
struct Residual {
  std::vector<LayerSpec> inner;
  bool projection = false;
};
}  // namespace layer

struct LayerSpec {
  std::variant<layer::Conv, layer::Dense, layer::MaxPool, layer::Dropout, layer::BatchNorm,
               layer::Activation, layer::Flatten, layer::SoftmaxClassifier, layer::Residual>
      kind;
  bool trainable = true;
};

std::string layer_name(const LayerSpec& spec);

/// One instantiated layer. Shapes exclude the batch axis.
struct Layer {
  LayerSpec spec;
  Shape in_shape;
  Shape out_shape;
  /// conv/dense: weight, bias. batchnorm: scale, shift. activation: its
  /// channel parameters. residual: projection weight, bias (if any).
  std::vector<ParamPtr> params;
  Tensor running_mean;
  Tensor running_var;
  std::optional<ActivationKind> activation;
  std::vector<Layer> inner;
};

enum class Mode { Train, Eval };

/// Activation layer visited during a forward pass.
struct ActivationSite {
  std::string layer;
  NodeId pre;
  ActivationKind kind;
};

struct ForwardPass {
  Graph graph;
  NodeId logits = 0;
  std::vector<ActivationSite> activations;
};

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEpsilon = 1e-5;

class Model {
 public:
  /// He-normal (fan-in) weights, zero biases; deterministic per seed.
  /// `input_shape` excludes the batch axis: [C,H,W] or [D].
  static Model build(const std::vector<LayerSpec>& specs, const Shape& input_shape, std::uint64_t seed);

  Model() = default;
  /// Deep copy: parameters are cloned with their ids preserved.
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  /// Records the forward computation. Train mode draws dropout masks from
  /// `rng` (required when the model has dropout) and updates batchnorm
  /// running statistics.
  ForwardPass forward(const Tensor& batch, Mode mode, std::mt19937_64* rng = nullptr);

  /// Eval-mode logits without keeping the tape.
  Tensor logits(const Tensor& batch);

  /// Registry order: depth-first over layers, parameters in layer order.
  std::vector<ParamPtr> parameters() const;
  std::vector<LayerSpec> specs() const;
  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept { return output_shape_; }

  void zero_grad();

 private:
  Shape input_shape_;
  Shape output_shape_;
  std::vector<Layer> layers_;
};

/// Calls `fn(layer)` on every layer, descending into residual blocks.
void for_each_layer(std::vector<Layer>& layers, const std::function<void(Layer&)>& fn);
void for_each_layer(const std::vector<Layer>& layers, const std::function<void(const Layer&)>& fn);

std::size_t count_activation_layers(const Model& model, ActivationTag tag);

/// Copy of `model` with every ReLU activation replaced by a PVLU with fresh
/// per-channel parameters. Other parameters keep their values and ids.
/// With PvluInit::finetune() the returned model computes exactly the same
/// function. A model without ReLU layers is returned unchanged with a warning.
Model substitute_pvlu(const Model& model, PvluInit init);

namespace policy {
struct All {};
struct Only {
  std::set<ParamRole> roles;
};
/// Parameters of the last `layers` weight-bearing (conv/dense) layers.
struct Head {
  std::size_t layers = 1;
};
struct Custom {
  std::function<bool(const Parameter&)> select;
};
}  // namespace policy

using TrainPolicy = std::variant<policy::All, policy::Only, policy::Head, policy::Custom>;

/// PVLU alpha/beta plus batchnorm scale/shift.
TrainPolicy pvlu_and_batchnorm();
/// Parses all | pvlu+batchnorm | pvlu | batchnorm | head[:n].
TrainPolicy parse_policy(const std::string& text);

/// Flags every parameter by `policy`. Returns the number of trainable
/// parameters; throws ContractError when the policy selects none.
std::size_t set_trainable(Model& model, const TrainPolicy& policy);

}  // namespace pvlu
