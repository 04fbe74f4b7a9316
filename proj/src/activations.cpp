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

#include "pvlu/activations.hpp"

#include <atomic>
#include <cmath>

#include "pvlu/errors.hpp"
#include "pvlu/overloaded.hpp"

namespace pvlu {

namespace {

std::atomic<FaultInjection> active_fault{FaultInjection::None};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Maps flat element index -> channel for [N,C,...] (or [C] at rank 1).
struct ChannelIndexer {
  std::size_t channels = 1;
  std::size_t inner = 1;

  explicit ChannelIndexer(const Shape& shape) {
    if (shape.size() == 1) {
      channels = shape[0];
    } else if (shape.size() >= 2) {
      channels = shape[1];
      inner = numel(shape) / (shape[0] * shape[1]);
    }
  }

  std::size_t operator()(std::size_t i) const { return (i / inner) % channels; }
};

void require_channels(const Tensor& z, const Tensor& params, const char* kind) {
  const ChannelIndexer idx(z.shape());
  if (params.size() != idx.channels) {
    throw ShapeError(std::string(kind) + ": " + std::to_string(params.size()) +
                     " channel parameters for input of shape " + to_string(z.shape()));
  }
}

}  // namespace

void set_fault_injection(FaultInjection fault) { active_fault.store(fault); }
FaultInjection fault_injection() { return active_fault.load(); }

std::string activation_name(const ActivationKind& kind) {
  return std::visit(Overloaded{
                        [](const act::Relu&) { return std::string("relu"); },
                        [](const act::LeakyRelu&) { return std::string("leaky"); },
                        [](const act::Elu&) { return std::string("elu"); },
                        [](const act::Prelu&) { return std::string("prelu"); },
                        [](const act::SineRelu&) { return std::string("sinerelu"); },
                        [](const act::Vlu&) { return std::string("vlu"); },
                        [](const act::Pvlu&) { return std::string("pvlu"); },
                    },
                    kind);
}

std::size_t activation_channels(const ActivationKind& kind) {
  if (const auto* p = std::get_if<act::Prelu>(&kind)) return p->slope->value.size();
  if (const auto* p = std::get_if<act::Pvlu>(&kind)) return p->alpha->value.size();
  return 0;
}

std::vector<ParamPtr> activation_parameters(const ActivationKind& kind) {
  if (const auto* p = std::get_if<act::Prelu>(&kind)) return {p->slope};
  if (const auto* p = std::get_if<act::Pvlu>(&kind)) return {p->alpha, p->beta};
  return {};
}

ActivationKind make_pvlu_params(std::size_t channels, PvluInit init) {
  if (channels == 0) throw ContractError("make_pvlu_params: channel count must be >= 1");
  return act::Pvlu{
      make_parameter("pvlu.alpha", ParamRole::PvluAlpha, Tensor(Shape{channels}, init.alpha)),
      make_parameter("pvlu.beta", ParamRole::PvluBeta, Tensor(Shape{channels}, init.beta)),
  };
}

ActivationKind make_prelu_params(std::size_t channels, double slope) {
  if (channels == 0) throw ContractError("make_prelu_params: channel count must be >= 1");
  return act::Prelu{make_parameter("prelu.slope", ParamRole::PreluSlope, Tensor(Shape{channels}, slope))};
}

Tensor act_forward(const ActivationKind& kind, const Tensor& z) {
  Tensor out(z.shape());
  auto src = z.data();
  auto dst = out.data();
  const ChannelIndexer channel(z.shape());
  std::visit(Overloaded{
                 [&](const act::Relu&) {
                   for (std::size_t i = 0; i < src.size(); ++i) dst[i] = relu(src[i]);
                 },
                 [&](const act::LeakyRelu& k) {
                   for (std::size_t i = 0; i < src.size(); ++i) {
                     dst[i] = src[i] > 0.0 ? src[i] : k.slope * src[i];
                   }
                 },
                 [&](const act::Elu& k) {
                   for (std::size_t i = 0; i < src.size(); ++i) {
                     dst[i] = src[i] > 0.0 ? src[i] : k.a * std::expm1(src[i]);
                   }
                 },
                 [&](const act::Prelu& k) {
                   const Tensor& slope = k.slope->value;
                   require_channels(z, slope, "prelu");
                   for (std::size_t i = 0; i < src.size(); ++i) {
                     dst[i] = src[i] > 0.0 ? src[i] : slope[channel(i)] * src[i];
                   }
                 },
                 [&](const act::SineRelu& k) {
                   for (std::size_t i = 0; i < src.size(); ++i) {
                     dst[i] = src[i] > 0.0 ? src[i] : k.epsilon * (std::sin(src[i]) - std::cos(src[i]));
                   }
                 },
                 [&](const act::Vlu& k) {
                   for (std::size_t i = 0; i < src.size(); ++i) {
                     dst[i] = relu(src[i]) + k.alpha * std::sin(k.beta * src[i]);
                   }
                 },
                 [&](const act::Pvlu& k) {
                   const Tensor& alpha = k.alpha->value;
                   const Tensor& beta = k.beta->value;
                   require_channels(z, alpha, "pvlu");
                   require_channels(z, beta, "pvlu");
                   for (std::size_t i = 0; i < src.size(); ++i) {
                     const std::size_t c = channel(i);
                     dst[i] = relu(src[i]) + alpha[c] * std::sin(beta[c] * src[i]);
                   }
                 },
             },
             kind);
  return out;
}

ActivationGrad act_backward(const ActivationKind& kind, const Tensor& z, const Tensor& upstream) {
  if (upstream.shape() != z.shape()) {
    throw ShapeError("act_backward: upstream " + to_string(upstream.shape()) + " vs input " +
                     to_string(z.shape()));
  }
  ActivationGrad result{Tensor(z.shape()), {}};
  auto x = z.data();
  auto up = upstream.data();
  auto dz = result.dz.data();
  const ChannelIndexer channel(z.shape());

  std::visit(Overloaded{
                 [&](const act::Relu&) {
                   for (std::size_t i = 0; i < x.size(); ++i) dz[i] = up[i] * heaviside(x[i]);
                 },
                 [&](const act::LeakyRelu& k) {
                   for (std::size_t i = 0; i < x.size(); ++i) dz[i] = up[i] * (x[i] > 0.0 ? 1.0 : k.slope);
                 },
                 [&](const act::Elu& k) {
                   for (std::size_t i = 0; i < x.size(); ++i) {
                     dz[i] = up[i] * (x[i] > 0.0 ? 1.0 : k.a * std::exp(x[i]));
                   }
                 },
                 [&](const act::Prelu& k) {
                   const Tensor& slope = k.slope->value;
                   require_channels(z, slope, "prelu");
                   Tensor dslope(slope.shape());
                   for (std::size_t i = 0; i < x.size(); ++i) {
                     const std::size_t c = channel(i);
                     if (x[i] > 0.0) {
                       dz[i] = up[i];
                     } else {
                       dz[i] = up[i] * slope[c];
                       dslope[c] += up[i] * x[i];
                     }
                   }
                   result.dparams.push_back(std::move(dslope));
                 },
                 [&](const act::SineRelu& k) {
                   for (std::size_t i = 0; i < x.size(); ++i) {
                     dz[i] = up[i] * (x[i] > 0.0 ? 1.0 : k.epsilon * (std::cos(x[i]) + std::sin(x[i])));
                   }
                 },
                 [&](const act::Vlu& k) {
                   const double ab = k.alpha * k.beta;
                   for (std::size_t i = 0; i < x.size(); ++i) {
                     dz[i] = up[i] * (ab * std::cos(k.beta * x[i]) + heaviside(x[i]));
                   }
                 },
                 [&](const act::Pvlu& k) {
                   const Tensor& alpha = k.alpha->value;
                   const Tensor& beta = k.beta->value;
                   require_channels(z, alpha, "pvlu");
                   require_channels(z, beta, "pvlu");
                   Tensor dalpha(alpha.shape());
                   Tensor dbeta(beta.shape());
                   const double skew = fault_injection() == FaultInjection::PvluDz ? 1.01 : 1.0;
                   for (std::size_t i = 0; i < x.size(); ++i) {
                     const std::size_t c = channel(i);
                     const double s = std::sin(beta[c] * x[i]);
                     const double co = std::cos(beta[c] * x[i]);
                     dz[i] = up[i] * (alpha[c] * beta[c] * co * skew + heaviside(x[i]));
                     dalpha[c] += up[i] * s;
                     dbeta[c] += up[i] * alpha[c] * x[i] * co;
                   }
                   result.dparams.push_back(std::move(dalpha));
                   result.dparams.push_back(std::move(dbeta));
                 },
             },
             kind);
  return result;
}

Tensor act_derivative(const ActivationKind& kind, const Tensor& z) {
  return act_backward(kind, z, Tensor(z.shape(), 1.0)).dz;
}

namespace ad {

NodeId activate(Graph& g, const ActivationKind& kind, NodeId z) {
  std::vector<NodeId> inputs{z};
  std::vector<NodeId> param_nodes;
  for (const auto& p : activation_parameters(kind)) {
    param_nodes.push_back(g.parameter(p));
    inputs.push_back(param_nodes.back());
  }
  Tensor out = act_forward(kind, g.value(z));
  return g.record("activation:" + activation_name(kind), std::move(inputs), std::move(out),
                  [kind, z, param_nodes](Graph& gr, const Tensor& up) {
                    auto grads = act_backward(kind, gr.value(z), up);
                    gr.accumulate(z, grads.dz);
                    for (std::size_t i = 0; i < param_nodes.size(); ++i) {
                      gr.accumulate(param_nodes[i], grads.dparams[i]);
                    }
                  });
}

}  // namespace ad

}  // namespace pvlu
