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

#include "pvlu/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

#include "pvlu/activations.hpp"
#include "pvlu/autodiff.hpp"
#include "pvlu/layers.hpp"
#include "pvlu/model_zoo.hpp"

namespace pvlu {

namespace {

using Rng = std::mt19937_64;

Tensor uniform(const Shape& shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

// Uniform in [-limit, limit] but never within `margin` of 0.
Tensor away_from_zero(const Shape& shape, double limit, double margin, Rng& rng) {
  std::uniform_real_distribution<double> mag(margin * 2, limit);
  std::bernoulli_distribution sign(0.5);
  Tensor t(shape);
  for (auto& v : t.data()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

void compare(GradcheckCase& c, const Tensor& analytic, const Tensor& numeric) {
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    c.max_rel_err = std::max(c.max_rel_err, relative_error(analytic[i], numeric[i]));
  }
  c.samples += analytic.size();
}

double weighted_sum(const Tensor& y, const Tensor& u) { return sum(mul(y, u)); }

void set_uniform(Parameter& p, double lo, double hi, Rng& rng) { p.value = uniform(p.value.shape(), lo, hi, rng); }

constexpr std::size_t kChannels = 4;

// Fresh activation of each kind with randomized per-channel parameters.
ActivationKind random_kind(const std::string& name, Rng& rng) {
  if (name == "relu") return act::Relu{};
  if (name == "leaky") return act::LeakyRelu{0.3};
  if (name == "elu") return act::Elu{1.0};
  if (name == "sinerelu") return act::SineRelu{0.0025};
  if (name == "vlu") return act::Vlu{0.5, 1.0};
  if (name == "prelu") {
    auto kind = make_prelu_params(kChannels);
    set_uniform(*std::get<act::Prelu>(kind).slope, 0.0, 0.5, rng);
    return kind;
  }
  auto kind = make_pvlu_params(kChannels, PvluInit::scratch());
  set_uniform(*std::get<act::Pvlu>(kind).alpha, -1.0, 1.0, rng);
  set_uniform(*std::get<act::Pvlu>(kind).beta, 0.5, 2.0, rng);
  return kind;
}

GradcheckCase activation_input_case(const std::string& name, const GradcheckOptions& o, Rng& rng) {
  GradcheckCase c{name + "-dz"};
  while (c.samples < o.points) {
    const ActivationKind kind = random_kind(name, rng);
    const Tensor z = away_from_zero(Shape{250, kChannels}, 3.0, o.kink_margin, rng);
    const Tensor u = uniform(z.shape(), -1.0, 1.0, rng);
    const Tensor analytic = act_backward(kind, z, u).dz;
    // Subtracting the unperturbed output keeps untouched elements at exactly
    // 0, so rounding in the sum does not swamp small derivatives.
    const Tensor base = act_forward(kind, z);
    const Tensor numeric =
        finite_diff([&](const Tensor& x) { return weighted_sum(sub(act_forward(kind, x), base), u); }, z, o.h);
    compare(c, analytic, numeric);
  }
  return c;
}

// Gradient of the index-th activation parameter (prelu slope, pvlu alpha/beta).
GradcheckCase activation_param_case(const std::string& name, const std::string& suffix, std::size_t index,
                                    const GradcheckOptions& o, Rng& rng) {
  GradcheckCase c{name + "-" + suffix};
  while (c.samples < o.points) {
    const ActivationKind kind = random_kind(name, rng);
    const Tensor z = away_from_zero(Shape{8, kChannels, 3}, 3.0, o.kink_margin, rng);
    const Tensor u = uniform(z.shape(), -1.0, 1.0, rng);
    const Tensor analytic = act_backward(kind, z, u).dparams.at(index);
    Parameter& p = *activation_parameters(kind).at(index);
    const Tensor base = act_forward(kind, z);
    const Tensor numeric = finite_diff([&] { return weighted_sum(sub(act_forward(kind, z), base), u); }, p, o.h);
    compare(c, analytic, numeric);
  }
  return c;
}

// Generic op check: `build` records the op on leaves created from `inputs`
// and returns its output node; loss = sum(output * u).
using OpBuilder = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

GradcheckCase op_case(const std::string& name, const std::function<std::vector<Tensor>(Rng&)>& make_inputs,
                      const OpBuilder& build, const GradcheckOptions& o, Rng& rng) {
  GradcheckCase c{"op-" + name};
  while (c.samples < o.points) {
    const std::vector<Tensor> inputs = make_inputs(rng);
    Tensor u;
    bool have_u = false;
    auto evaluate = [&](const std::vector<Tensor>& xs, Graph& g, std::vector<NodeId>& leaves) {
      leaves.clear();
      for (const auto& x : xs) leaves.push_back(g.leaf(x));
      const NodeId out = build(g, leaves);
      if (!have_u) {
        u = uniform(g.value(out).shape(), -1.0, 1.0, rng);
        have_u = true;
      }
      return ad::sum(g, ad::mul(g, out, g.constant(u)));
    };
    Graph g;
    std::vector<NodeId> leaves;
    const NodeId loss = evaluate(inputs, g, leaves);
    if (g.value(loss).rank() != 0) return c;
    g.backward(loss);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const Tensor analytic = g.grad(leaves[i]);
      const Tensor numeric = finite_diff(
          [&](const Tensor& x) {
            std::vector<Tensor> xs = inputs;
            xs[i] = x;
            Graph g2;
            std::vector<NodeId> l2;
            return g2.value(evaluate(xs, g2, l2)).item();
          },
          inputs[i], o.h);
      compare(c, analytic, numeric);
    }
  }
  return c;
}

bool clear_of_kinks(const ForwardPass& pass, double margin) {
  for (const auto& site : pass.activations) {
    for (double v : pass.graph.value(site.pre).data()) {
      if (std::abs(v) < margin) return false;
    }
  }
  return true;
}

void randomize_parameters(Model& model, Rng& rng) {
  for (auto& p : model.parameters()) {
    switch (p->role) {
      case ParamRole::Bias: set_uniform(*p, -0.1, 0.1, rng); break;
      case ParamRole::PvluAlpha: set_uniform(*p, -1.0, 1.0, rng); break;
      case ParamRole::PvluBeta: set_uniform(*p, 0.5, 2.0, rng); break;
      case ParamRole::PreluSlope: set_uniform(*p, 0.0, 0.5, rng); break;
      case ParamRole::BatchNormScale: set_uniform(*p, 0.5, 1.5, rng); break;
      case ParamRole::BatchNormShift: set_uniform(*p, -0.2, 0.2, rng); break;
      case ParamRole::Weight: break;
    }
  }
}

GradcheckCase model_case(const std::string& name, const std::vector<LayerSpec>& specs, const Shape& input,
                         std::size_t classes, const GradcheckOptions& o, Rng& rng) {
  GradcheckCase c{name};
  std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
  while (c.samples < o.points) {
    Model model = Model::build(specs, input, rng());
    randomize_parameters(model, rng);
    Shape batch_shape{4};
    batch_shape.insert(batch_shape.end(), input.begin(), input.end());
    Tensor x;
    std::vector<int> labels(4);
    // Resample until no pre-activation sits near a kink.
    for (int attempt = 0;; ++attempt) {
      x = uniform(batch_shape, -1.0, 1.0, rng);
      for (auto& l : labels) l = label(rng);
      if (clear_of_kinks(model.forward(x, Mode::Train), o.kink_margin) || attempt > 50) break;
    }
    auto loss_of = [&]() {
      ForwardPass pass = model.forward(x, Mode::Train);
      return pass.graph.value(ad::softmax_cross_entropy(pass.graph, pass.logits, labels)).item();
    };
    model.zero_grad();
    ForwardPass pass = model.forward(x, Mode::Train);
    pass.graph.backward(ad::softmax_cross_entropy(pass.graph, pass.logits, labels));
    for (auto& p : model.parameters()) {
      const Tensor analytic = p->grad;
      compare(c, analytic, finite_diff(loss_of, *p, o.h));
    }
  }
  return c;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

bool GradcheckReport::passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const GradcheckCase& c) { return c.passed; });
}

std::vector<std::string> GradcheckReport::failing() const {
  std::vector<std::string> out;
  for (const auto& c : cases) {
    if (!c.passed) out.push_back(c.name);
  }
  return out;
}

GradcheckReport run_gradcheck(const GradcheckOptions& o) {
  Rng rng(o.seed);
  GradcheckReport report;
  report.options = o;
  auto& cases = report.cases;

  for (const char* name : {"relu", "leaky", "elu", "prelu", "sinerelu", "vlu", "pvlu"}) {
    cases.push_back(activation_input_case(name, o, rng));
  }
  cases.push_back(activation_param_case("prelu", "dslope", 0, o, rng));
  cases.push_back(activation_param_case("pvlu", "dalpha", 0, o, rng));
  cases.push_back(activation_param_case("pvlu", "dbeta", 1, o, rng));

  cases.push_back(op_case(
      "matmul", [](Rng& r) { return std::vector<Tensor>{uniform({5, 4}, -1, 1, r), uniform({4, 3}, -1, 1, r)}; },
      [](Graph& g, const std::vector<NodeId>& in) { return ad::matmul(g, in[0], in[1]); }, o, rng));
  cases.push_back(op_case(
      "conv2d-same",
      [](Rng& r) { return std::vector<Tensor>{uniform({2, 2, 5, 5}, -1, 1, r), uniform({3, 2, 3, 3}, -1, 1, r)}; },
      [](Graph& g, const std::vector<NodeId>& in) { return ad::conv2d(g, in[0], in[1], 1, Padding::Same); }, o,
      rng));
  cases.push_back(op_case(
      "conv2d-valid-stride2",
      [](Rng& r) { return std::vector<Tensor>{uniform({2, 2, 7, 7}, -1, 1, r), uniform({3, 2, 3, 3}, -1, 1, r)}; },
      [](Graph& g, const std::vector<NodeId>& in) { return ad::conv2d(g, in[0], in[1], 2, Padding::Valid); }, o,
      rng));
  cases.push_back(op_case(
      "maxpool2d", [](Rng& r) { return std::vector<Tensor>{uniform({2, 3, 6, 6}, -1, 1, r)}; },
      [](Graph& g, const std::vector<NodeId>& in) { return ad::maxpool2d(g, in[0], 2, 2); }, o, rng));
  cases.push_back(op_case(
      "broadcast-add",
      [](Rng& r) { return std::vector<Tensor>{uniform({2, 3, 4, 4}, -1, 1, r), uniform({3}, -1, 1, r)}; },
      [](Graph& g, const std::vector<NodeId>& in) { return ad::add(g, in[0], in[1]); }, o, rng));
  cases.push_back(op_case(
      "broadcast-mul",
      [](Rng& r) { return std::vector<Tensor>{uniform({2, 3, 4, 4}, -1, 1, r), uniform({3}, -1, 1, r)}; },
      [](Graph& g, const std::vector<NodeId>& in) { return ad::mul(g, in[0], in[1]); }, o, rng));
  cases.push_back(op_case(
      "batchnorm",
      [](Rng& r) {
        return std::vector<Tensor>{uniform({4, 3, 3, 3}, -1, 1, r), uniform({3}, 0.5, 1.5, r),
                                   uniform({3}, -0.5, 0.5, r)};
      },
      [](Graph& g, const std::vector<NodeId>& in) {
        Tensor mean(Shape{3}), var(Shape{3}, 1.0);
        return ad::batchnorm(g, in[0], in[1], in[2], {mean, var, kBatchNormMomentum, kBatchNormEpsilon}, true);
      },
      o, rng));
  {
    std::vector<int> labels;
    cases.push_back(op_case(
        "softmax-cross-entropy",
        [&labels](Rng& r) {
          labels.clear();
          for (int i = 0; i < 6; ++i) labels.push_back(static_cast<int>(r() % 5));
          return std::vector<Tensor>{uniform({6, 5}, -2, 2, r)};
        },
        [&labels](Graph& g, const std::vector<NodeId>& in) { return ad::softmax_cross_entropy(g, in[0], labels); },
        o, rng));
  }

  const auto pvlu = ActivationSpec::pvlu();
  cases.push_back(model_case("dense-net-pvlu", parse_layers("dense:8,act,dense:3,softmax", pvlu), {6}, 3, o, rng));
  cases.push_back(model_case("tiny-cnn-relu", named_model("tiny-cnn", ActivationSpec::relu(), 3), {1, 6, 6}, 3, o,
                             rng));
  cases.push_back(model_case("tiny-cnn-pvlu", named_model("tiny-cnn", pvlu, 3), {1, 6, 6}, 3, o, rng));
  cases.push_back(model_case("tiny-cnn-bn-prelu-pvlu",
                             parse_layers("conv:3,bn,prelu,conv:3:3:2,bn,pvlu,flatten,dense:3,softmax", pvlu),
                             {2, 6, 6}, 3, o, rng));
  cases.push_back(model_case("resnet-block-pvlu",
                             parse_layers("conv:3,act,res(conv:3,act,conv:3),act,flatten,dense:2,softmax", pvlu),
                             {1, 5, 5}, 2, o, rng));

  for (auto& c : cases) c.passed = c.samples > 0 && c.max_rel_err < o.tolerance;
  return report;
}

void print_report(const GradcheckReport& report, std::ostream& out) {
  const auto& o = report.options;
  out << "gradient check: float64, central differences h=" << o.h << ", tolerance " << o.tolerance << "\n";
  out << "kink exclusion: pre-activations with |z| < " << o.kink_margin << " are not sampled\n";
  out << std::left << std::setw(28) << "case" << std::setw(10) << "samples" << std::setw(14) << "max_rel_err"
      << "result\n";
  for (const auto& c : report.cases) {
    std::ostringstream err;
    err << std::scientific << std::setprecision(3) << c.max_rel_err;
    out << std::left << std::setw(28) << c.name << std::setw(10) << c.samples << std::setw(14) << err.str()
        << (c.passed ? "PASS" : "FAIL") << "\n";
  }
  if (report.passed()) {
    out << "all " << report.cases.size() << " cases passed\n";
  } else {
    out << "FAILED:";
    for (const auto& name : report.failing()) out << " " << name;
    out << "\n";
  }
}

}  // namespace pvlu
