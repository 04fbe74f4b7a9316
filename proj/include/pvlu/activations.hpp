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

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "pvlu/autodiff.hpp"
#include "pvlu/tensor.hpp"

namespace pvlu {

/// Heaviside step with H(0) = 0. Used as the ReLU derivative, so the
/// subgradient chosen at the kink is 0.
inline double heaviside(double x) { return x > 0.0 ? 1.0 : 0.0; }

namespace act {

struct Relu {};

struct LeakyRelu {
  double slope = 0.3;
};

struct Elu {
  double a = 1.0;
};

/// One trainable negative-side slope per channel.
struct Prelu {
  ParamPtr slope;
};

/// x for x > 0, epsilon * (sin x - cos x) otherwise. Not continuous at 0:
/// the left limit is -epsilon.
struct SineRelu {
  double epsilon = 0.0025;
};

/// max(0, x) + alpha * sin(beta * x) with fixed alpha, beta.
struct Vlu {
  double alpha = 0.5;
  double beta = 1.0;
};

/// max(0, x) + alpha_c * sin(beta_c * x) with trainable per-channel alpha, beta.
struct Pvlu {
  ParamPtr alpha;
  ParamPtr beta;
};

}  // namespace act

using ActivationKind =
    std::variant<act::Relu, act::LeakyRelu, act::Elu, act::Prelu, act::SineRelu, act::Vlu, act::Pvlu>;

/// Short lowercase name: relu, leaky, elu, prelu, sinerelu, vlu, pvlu.
std::string activation_name(const ActivationKind& kind);

/// Length of the per-channel parameter vectors, or 0 for parameter-free kinds.
std::size_t activation_channels(const ActivationKind& kind);

/// Parameters owned by the activation, in registry order.
std::vector<ParamPtr> activation_parameters(const ActivationKind& kind);

/// Initial (alpha, beta) for newly created PVLU parameters.
struct PvluInit {
  double alpha;
  double beta;

  /// alpha = 0 makes PVLU coincide with ReLU, for substitution into trained models.
  static constexpr PvluInit finetune() { return {0.0, 1.0}; }
  static constexpr PvluInit scratch() { return {0.5, 1.0}; }
  static constexpr PvluInit custom(double alpha, double beta) { return {alpha, beta}; }
};

ActivationKind make_pvlu_params(std::size_t channels, PvluInit init);
ActivationKind make_prelu_params(std::size_t channels, double slope = 0.25);

/// Elementwise activation of z. Channel-wise kinds read the channel from
/// axis 1 of [N,C,...] (axis 0 for rank-1 input).
Tensor act_forward(const ActivationKind& kind, const Tensor& z);

struct ActivationGrad {
  Tensor dz;
  /// Per-channel gradients, parallel to activation_parameters(kind).
  std::vector<Tensor> dparams;
};

ActivationGrad act_backward(const ActivationKind& kind, const Tensor& z, const Tensor& upstream);

/// d act / dz evaluated elementwise.
Tensor act_derivative(const ActivationKind& kind, const Tensor& z);

namespace ad {
NodeId activate(Graph& g, const ActivationKind& kind, NodeId z);
}

/// Deliberate corruption of a backward formula, used to prove the gradient
/// checker catches errors.
enum class FaultInjection { None, PvluDz };
void set_fault_injection(FaultInjection fault);
FaultInjection fault_injection();

}  // namespace pvlu
