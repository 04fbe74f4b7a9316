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

#include "pvlu/layers.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <sstream>

#include "pvlu/errors.hpp"
#include "pvlu/overloaded.hpp"

namespace pvlu {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct InitStream {
  std::uint64_t seed;
  std::uint64_t counter = 0;

  std::uint64_t next() { return splitmix64(seed ^ splitmix64(++counter)); }
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, sep)) parts.push_back(part);
  return parts;
}

double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ContractError("cannot parse number '" + s + "' in " + context);
  }
}

ShapeError build_error(const std::string& where, const std::string& what) {
  return ShapeError("build error at layer " + where + ": " + what);
}

ParamPtr he_normal(const std::string& name, Shape shape, std::size_t fan_in, InitStream& stream) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  return make_parameter(name, ParamRole::Weight,
                        Tensor::create(std::move(shape), fill::SeededNormal{0.0, stddev, stream.next()}));
}

std::vector<Layer> build_layers(const std::vector<LayerSpec>& specs, Shape shape, InitStream& stream,
                                const std::string& prefix);

Layer build_layer(const LayerSpec& spec, const Shape& in, InitStream& stream, const std::string& where) {
  Layer layer;
  layer.spec = spec;
  layer.in_shape = in;
  auto require_image = [&](const char* what) {
    if (in.size() != 3) {
      throw build_error(where, std::string(what) + " needs [C,H,W] input, got " + to_string(in));
    }
  };

  std::visit(
      Overloaded{
          [&](const layer::Conv& c) {
            require_image("conv");
            if (c.filters == 0 || c.kernel == 0 || c.stride == 0) {
              throw build_error(where, "conv filters, kernel and stride must be positive");
            }
            ConvGeometry g{};
            try {
              g = conv_geometry(in[1], in[2], c.kernel, c.kernel, c.stride, c.padding);
            } catch (const std::exception& e) {
              throw build_error(where, e.what());
            }
            const std::size_t fan_in = in[0] * c.kernel * c.kernel;
            layer.params.push_back(he_normal("conv.weight", {c.filters, in[0], c.kernel, c.kernel}, fan_in, stream));
            layer.params.push_back(make_parameter("conv.bias", ParamRole::Bias, Tensor(Shape{c.filters})));
            layer.out_shape = {c.filters, g.out_h, g.out_w};
          },
          [&](const layer::Dense& d) {
            if (in.size() != 1) throw build_error(where, "dense needs flat input, got " + to_string(in));
            if (d.units == 0) throw build_error(where, "dense units must be positive");
            layer.params.push_back(he_normal("dense.weight", {in[0], d.units}, in[0], stream));
            layer.params.push_back(make_parameter("dense.bias", ParamRole::Bias, Tensor(Shape{d.units})));
            layer.out_shape = {d.units};
          },
          [&](const layer::MaxPool& p) {
            require_image("maxpool");
            if (p.window == 0 || p.stride == 0) throw build_error(where, "maxpool window/stride must be positive");
            if (p.window > in[1] || p.window > in[2]) {
              throw build_error(where, "maxpool window " + std::to_string(p.window) + " exceeds input " +
                                           to_string(in));
            }
            layer.out_shape = {in[0], (in[1] - p.window) / p.stride + 1, (in[2] - p.window) / p.stride + 1};
          },
          [&](const layer::Dropout& d) {
            if (d.rate < 0.0 || d.rate >= 1.0) throw build_error(where, "dropout rate must lie in [0,1)");
            layer.out_shape = in;
          },
          [&](const layer::BatchNorm&) {
            if (in.size() != 1 && in.size() != 3) {
              throw build_error(where, "batchnorm needs [C,H,W] or [D] input, got " + to_string(in));
            }
            const std::size_t channels = in[0];
            layer.params.push_back(make_parameter("bn.scale", ParamRole::BatchNormScale, Tensor(Shape{channels}, 1.0)));
            layer.params.push_back(make_parameter("bn.shift", ParamRole::BatchNormShift, Tensor(Shape{channels})));
            layer.running_mean = Tensor(Shape{channels}, 0.0);
            layer.running_var = Tensor(Shape{channels}, 1.0);
            layer.out_shape = in;
          },
          [&](const layer::Activation& a) {
            if (in.empty()) throw build_error(where, "activation needs non-scalar input");
            layer.activation = instantiate_activation(a.act, in[0]);
            layer.params = activation_parameters(*layer.activation);
            layer.out_shape = in;
          },
          [&](const layer::Flatten&) { layer.out_shape = {numel(in)}; },
          [&](const layer::SoftmaxClassifier&) {
            if (in.size() != 1) throw build_error(where, "softmax classifier needs flat logits, got " + to_string(in));
            layer.out_shape = in;
          },
          [&](const layer::Residual& r) {
            if (r.inner.empty()) throw build_error(where, "residual block has no inner layers");
            layer.inner = build_layers(r.inner, in, stream, where + ".");
            const Shape& out = layer.inner.back().out_shape;
            layer.out_shape = out;
            if (!r.projection && out == in) return;
            require_image("residual projection");
            if (out.size() != 3 || out[1] == 0 || in[1] % out[1] != 0 || in[2] % out[2] != 0 ||
                in[1] / out[1] != in[2] / out[2]) {
              throw build_error(where, "residual shortcut cannot map " + to_string(in) + " to " + to_string(out));
            }
            const std::size_t stride = in[1] / out[1];
            if ((in[1] - 1) / stride + 1 != out[1] || (in[2] - 1) / stride + 1 != out[2]) {
              throw build_error(where, "residual shortcut stride does not reproduce " + to_string(out));
            }
            layer.params.push_back(he_normal("residual.projection", {out[0], in[0], 1, 1}, in[0], stream));
            layer.params.push_back(make_parameter("residual.bias", ParamRole::Bias, Tensor(Shape{out[0]})));
          },
      },
      spec.kind);

  for (auto& p : layer.params) p->trainable = spec.trainable;
  return layer;
}

std::vector<Layer> build_layers(const std::vector<LayerSpec>& specs, Shape shape, InitStream& stream,
                                const std::string& prefix) {
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::string where = prefix + std::to_string(i) + " (" + layer_name(specs[i]) + ")";
    layers.push_back(build_layer(specs[i], shape, stream, where));
    shape = layers.back().out_shape;
  }
  return layers;
}

void rebind_activation(Layer& layer) {
  if (!layer.activation) return;
  if (auto* p = std::get_if<act::Prelu>(&*layer.activation)) {
    p->slope = layer.params.at(0);
  } else if (auto* v = std::get_if<act::Pvlu>(&*layer.activation)) {
    v->alpha = layer.params.at(0);
    v->beta = layer.params.at(1);
  }
}

struct LayerOutput {
  std::string where;
  NodeId node;
};

NodeId run_layers(std::vector<Layer>& layers, Graph& g, NodeId x, Mode mode, std::mt19937_64* rng,
                  ForwardPass& pass, std::vector<LayerOutput>& outputs, const std::string& prefix);

NodeId run_layer(Layer& layer, Graph& g, NodeId x, Mode mode, std::mt19937_64* rng, ForwardPass& pass,
                 std::vector<LayerOutput>& outputs, const std::string& where) {
  return std::visit(
      Overloaded{
          [&](const layer::Conv& c) {
            const NodeId w = g.parameter(layer.params[0]);
            const NodeId b = g.parameter(layer.params[1]);
            return ad::add(g, ad::conv2d(g, x, w, c.stride, c.padding), b);
          },
          [&](const layer::Dense&) {
            const NodeId w = g.parameter(layer.params[0]);
            const NodeId b = g.parameter(layer.params[1]);
            return ad::add(g, ad::matmul(g, x, w), b);
          },
          [&](const layer::MaxPool& p) { return ad::maxpool2d(g, x, p.window, p.stride); },
          [&](const layer::Dropout& d) {
            if (mode == Mode::Eval || d.rate == 0.0) return x;
            if (rng == nullptr) throw StateError("train-mode forward with dropout needs an rng");
            return ad::dropout(g, x, d.rate, *rng);
          },
          [&](const layer::BatchNorm&) {
            const NodeId scale = g.parameter(layer.params[0]);
            const NodeId shift = g.parameter(layer.params[1]);
            // Frozen batchnorm layers run in inference mode.
            const bool batch_stats = mode == Mode::Train && layer.params[0]->trainable;
            return ad::batchnorm(g, x, scale, shift,
                                 {layer.running_mean, layer.running_var, kBatchNormMomentum, kBatchNormEpsilon},
                                 batch_stats);
          },
          [&](const layer::Activation&) {
            pass.activations.push_back({where, x, *layer.activation});
            return ad::activate(g, *layer.activation, x);
          },
          [&](const layer::Flatten&) {
            const Tensor& v = g.value(x);
            return ad::reshape(g, x, {v.extent(0), v.size() / v.extent(0)});
          },
          [&](const layer::SoftmaxClassifier&) { return x; },
          [&](const layer::Residual& r) {
            const NodeId body = run_layers(layer.inner, g, x, mode, rng, pass, outputs, where + ".");
            NodeId shortcut = x;
            if (!layer.params.empty()) {
              const NodeId w = g.parameter(layer.params[0]);
              const NodeId b = g.parameter(layer.params[1]);
              const std::size_t stride = layer.in_shape[1] / layer.out_shape[1];
              shortcut = ad::add(g, ad::conv2d(g, x, w, stride, Padding::Valid), b);
            }
            (void)r;
            return ad::add(g, body, shortcut);
          },
      },
      layer.spec.kind);
}

NodeId run_layers(std::vector<Layer>& layers, Graph& g, NodeId x, Mode mode, std::mt19937_64* rng,
                  ForwardPass& pass, std::vector<LayerOutput>& outputs, const std::string& prefix) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = prefix + std::to_string(i) + " (" + layer_name(layers[i].spec) + ")";
    x = run_layer(layers[i], g, x, mode, rng, pass, outputs, where);
    outputs.push_back({where, x});
  }
  return x;
}

}  // namespace

ActivationSpec parse_activation(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.empty()) throw ContractError("empty activation name");
  const std::string& name = parts[0];
  auto arg = [&](std::size_t i, double fallback) {
    return parts.size() > i ? parse_number(parts[i], "activation '" + text + "'") : fallback;
  };
  if (name == "relu") return ActivationSpec::relu();
  if (name == "leaky" || name == "leakyrelu") return ActivationSpec::leaky(arg(1, 0.3));
  if (name == "elu") return ActivationSpec::elu(arg(1, 1.0));
  if (name == "prelu") return ActivationSpec::prelu(arg(1, 0.25));
  if (name == "sinerelu") return ActivationSpec::sinerelu(arg(1, 0.0025));
  if (name == "vlu") return ActivationSpec::vlu(arg(1, 0.5), arg(2, 1.0));
  if (name == "pvlu") return ActivationSpec::pvlu(PvluInit::custom(arg(1, 0.5), arg(2, 1.0)));
  throw ContractError("unknown activation '" + text + "'");
}

std::string activation_spec_name(const ActivationSpec& spec) {
  switch (spec.tag) {
    case ActivationTag::Relu: return "relu";
    case ActivationTag::LeakyRelu: return "leaky";
    case ActivationTag::Elu: return "elu";
    case ActivationTag::Prelu: return "prelu";
    case ActivationTag::SineRelu: return "sinerelu";
    case ActivationTag::Vlu: return "vlu";
    case ActivationTag::Pvlu: return "pvlu";
  }
  return "unknown";
}

ActivationKind instantiate_activation(const ActivationSpec& spec, std::size_t channels) {
  switch (spec.tag) {
    case ActivationTag::Relu: return act::Relu{};
    case ActivationTag::LeakyRelu: return act::LeakyRelu{spec.p0};
    case ActivationTag::Elu: return act::Elu{spec.p0};
    case ActivationTag::Prelu: return make_prelu_params(channels, spec.p0);
    case ActivationTag::SineRelu: return act::SineRelu{spec.p0};
    case ActivationTag::Vlu: return act::Vlu{spec.p0, spec.p1};
    case ActivationTag::Pvlu: return make_pvlu_params(channels, PvluInit::custom(spec.p0, spec.p1));
  }
  throw ContractError("unknown activation tag");
}

std::string layer_name(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const layer::Conv&) { return std::string("conv"); },
                        [](const layer::Dense&) { return std::string("dense"); },
                        [](const layer::MaxPool&) { return std::string("maxpool"); },
                        [](const layer::Dropout&) { return std::string("dropout"); },
                        [](const layer::BatchNorm&) { return std::string("batchnorm"); },
                        [](const layer::Activation& a) { return activation_spec_name(a.act); },
                        [](const layer::Flatten&) { return std::string("flatten"); },
                        [](const layer::SoftmaxClassifier&) { return std::string("softmax"); },
                        [](const layer::Residual&) { return std::string("residual"); },
                    },
                    spec.kind);
}

Model Model::build(const std::vector<LayerSpec>& specs, const Shape& input_shape, std::uint64_t seed) {
  if (specs.empty()) throw ShapeError("build error: model has no layers");
  for (auto e : input_shape) {
    if (e == 0) throw ShapeError("build error: input extents must be >= 1");
  }
  Model m;
  InitStream stream{seed};
  m.input_shape_ = input_shape;
  m.layers_ = build_layers(specs, input_shape, stream, "");
  m.output_shape_ = m.layers_.back().out_shape;
  return m;
}

Model::Model(const Model& other)
    : input_shape_(other.input_shape_), output_shape_(other.output_shape_), layers_(other.layers_) {
  std::map<const Parameter*, ParamPtr> clones;
  for_each_layer(layers_, [&](Layer& layer) {
    for (auto& p : layer.params) {
      auto [it, inserted] = clones.try_emplace(p.get());
      if (inserted) it->second = std::make_shared<Parameter>(*p);
      p = it->second;
    }
    rebind_activation(layer);
  });
}

Model& Model::operator=(const Model& other) {
  if (this != &other) *this = Model(other);
  return *this;
}

ForwardPass Model::forward(const Tensor& batch, Mode mode, std::mt19937_64* rng) {
  if (batch.rank() != input_shape_.size() + 1 ||
      !std::equal(input_shape_.begin(), input_shape_.end(), batch.shape().begin() + 1)) {
    throw ShapeError("forward: batch shape " + to_string(batch.shape()) + " does not match model input " +
                     to_string(input_shape_));
  }
  ForwardPass pass;
  std::vector<LayerOutput> outputs;
  const NodeId x = pass.graph.constant(batch);
  pass.logits = run_layers(layers_, pass.graph, x, mode, rng, pass, outputs, "");
  if (!pass.graph.value(pass.logits).all_finite()) {
    for (const auto& out : outputs) {
      if (!pass.graph.value(out.node).all_finite()) {
        throw NumericError("non-finite values first produced by layer " + out.where);
      }
    }
    throw NumericError("non-finite logits");
  }
  return pass;
}

Tensor Model::logits(const Tensor& batch) {
  auto pass = forward(batch, Mode::Eval);
  return pass.graph.value(pass.logits);
}

std::vector<ParamPtr> Model::parameters() const {
  std::vector<ParamPtr> out;
  for_each_layer(layers_, [&](const Layer& layer) {
    out.insert(out.end(), layer.params.begin(), layer.params.end());
  });
  return out;
}

std::vector<LayerSpec> Model::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l.spec);
  return out;
}

void Model::zero_grad() {
  for (auto& p : parameters()) p->zero_grad();
}

void for_each_layer(std::vector<Layer>& layers, const std::function<void(Layer&)>& fn) {
  for (auto& layer : layers) {
    // Inner layers come first: their parameters precede the projection in registry order.
    for_each_layer(layer.inner, fn);
    fn(layer);
  }
}

void for_each_layer(const std::vector<Layer>& layers, const std::function<void(const Layer&)>& fn) {
  for (const auto& layer : layers) {
    for_each_layer(layer.inner, fn);
    fn(layer);
  }
}

std::size_t count_activation_layers(const Model& model, ActivationTag tag) {
  std::size_t count = 0;
  for_each_layer(model.layers(), [&](const Layer& layer) {
    if (const auto* a = std::get_if<layer::Activation>(&layer.spec.kind); a && a->act.tag == tag) ++count;
  });
  return count;
}

namespace {

// Residual specs embed copies of their inner specs; keep them in sync with
// the instantiated inner layers after surgery.
void refresh_residual_specs(std::vector<Layer>& layers) {
  for (auto& layer : layers) {
    refresh_residual_specs(layer.inner);
    if (auto* r = std::get_if<layer::Residual>(&layer.spec.kind)) {
      for (std::size_t i = 0; i < layer.inner.size(); ++i) r->inner[i] = layer.inner[i].spec;
    }
  }
}

}  // namespace

Model substitute_pvlu(const Model& model, PvluInit init) {
  Model out(model);
  std::size_t replaced = 0;
  for_each_layer(out.layers(), [&](Layer& layer) {
    auto* a = std::get_if<layer::Activation>(&layer.spec.kind);
    if (a == nullptr || a->act.tag != ActivationTag::Relu) return;
    a->act = ActivationSpec::pvlu(init);
    layer.activation = make_pvlu_params(layer.in_shape.at(0), init);
    layer.params = activation_parameters(*layer.activation);
    for (auto& p : layer.params) p->trainable = layer.spec.trainable;
    ++replaced;
  });
  refresh_residual_specs(out.layers());
  if (replaced == 0) std::cerr << "warning: substitute_pvlu found no ReLU activation layers\n";
  return out;
}

TrainPolicy pvlu_and_batchnorm() {
  return policy::Only{{ParamRole::PvluAlpha, ParamRole::PvluBeta, ParamRole::BatchNormScale,
                       ParamRole::BatchNormShift}};
}

TrainPolicy parse_policy(const std::string& text) {
  if (text == "all") return policy::All{};
  if (text == "pvlu+batchnorm" || text == "pvlu+bn") return pvlu_and_batchnorm();
  if (text == "pvlu") return policy::Only{{ParamRole::PvluAlpha, ParamRole::PvluBeta}};
  if (text == "batchnorm" || text == "bn") {
    return policy::Only{{ParamRole::BatchNormScale, ParamRole::BatchNormShift}};
  }
  if (text.rfind("head", 0) == 0) {
    const auto parts = split(text, ':');
    const double n = parts.size() > 1 ? parse_number(parts[1], "policy '" + text + "'") : 1.0;
    if (n < 1.0) throw ContractError("head policy needs at least one layer");
    return policy::Head{static_cast<std::size_t>(n)};
  }
  throw ContractError("unknown freeze policy '" + text + "'");
}

std::size_t set_trainable(Model& model, const TrainPolicy& policy) {
  std::set<const Parameter*> head;
  if (const auto* h = std::get_if<policy::Head>(&policy)) {
    std::vector<const Layer*> weighted;
    for_each_layer(model.layers(), [&](const Layer& layer) {
      if (std::holds_alternative<layer::Conv>(layer.spec.kind) ||
          std::holds_alternative<layer::Dense>(layer.spec.kind)) {
        weighted.push_back(&layer);
      }
    });
    const std::size_t first = weighted.size() > h->layers ? weighted.size() - h->layers : 0;
    for (std::size_t i = first; i < weighted.size(); ++i) {
      for (const auto& p : weighted[i]->params) head.insert(p.get());
    }
  }

  auto selected = [&](const Parameter& p) {
    return std::visit(Overloaded{
                          [](const policy::All&) { return true; },
                          [&](const policy::Only& o) { return o.roles.count(p.role) > 0; },
                          [&](const policy::Head&) { return head.count(&p) > 0; },
                          [&](const policy::Custom& c) { return c.select(p); },
                      },
                      policy);
  };

  std::size_t count = 0;
  for (const auto& p : model.parameters()) count += selected(*p) ? 1 : 0;
  if (count == 0) throw ContractError("set_trainable: policy selects no parameters");

  for_each_layer(model.layers(), [&](Layer& layer) {
    bool any = false;
    for (auto& p : layer.params) {
      p->trainable = selected(*p);
      any = any || p->trainable;
    }
    if (!layer.params.empty()) layer.spec.trainable = any;
  });
  refresh_residual_specs(model.layers());
  return count;
}

}  // namespace pvlu
