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

#include "pvlu/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "pvlu/errors.hpp"

namespace pvlu {

namespace {

std::atomic<std::uint64_t> next_parameter_id{1};

// Channel count and the number of elements per (sample, channel) slice.
struct ChannelLayout {
  std::size_t batch;
  std::size_t channels;
  std::size_t inner;
};

ChannelLayout channel_layout(const Shape& shape) {
  if (shape.size() < 2) throw ShapeError("expected [N,C,...] tensor, got " + to_string(shape));
  const std::size_t inner = numel(shape) / (shape[0] * shape[1]);
  return {shape[0], shape[1], inner};
}

}  // namespace

std::string to_string(ParamRole role) {
  switch (role) {
    case ParamRole::Weight: return "weight";
    case ParamRole::Bias: return "bias";
    case ParamRole::PvluAlpha: return "pvlu_alpha";
    case ParamRole::PvluBeta: return "pvlu_beta";
    case ParamRole::PreluSlope: return "prelu_slope";
    case ParamRole::BatchNormScale: return "bn_scale";
    case ParamRole::BatchNormShift: return "bn_shift";
  }
  return "unknown";
}

void Parameter::zero_grad() { grad = Tensor(value.shape()); }

ParamPtr make_parameter(std::string name, ParamRole role, Tensor value) {
  auto p = std::make_shared<Parameter>();
  p->id = next_parameter_id.fetch_add(1);
  p->name = std::move(name);
  p->role = role;
  p->grad = Tensor(value.shape());
  p->value = std::move(value);
  return p;
}

NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

NodeId Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

NodeId Graph::parameter(const ParamPtr& param) {
  Node n;
  n.value = param->value;
  n.requires_grad = param->trainable;
  n.param = param;
  return push(std::move(n));
}

NodeId Graph::record(std::string kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](NodeId id) { return nodes_.at(id).requires_grad; });
  if (n.requires_grad) n.backward = std::move(backward);
  const NodeId id = push(std::move(n));
  records_.push_back(Record{std::move(kind), std::move(inputs), id});
  return id;
}

Tensor Graph::grad(NodeId id) const {
  const auto& n = nodes_.at(id);
  return n.has_grad ? n.grad : Tensor(n.value.shape());
}

void Graph::accumulate(NodeId id, const Tensor& grad) {
  auto& n = nodes_.at(id);
  if (!n.requires_grad) return;
  if (grad.shape() != n.value.shape()) {
    throw ShapeError("gradient shape " + to_string(grad.shape()) + " does not match node shape " +
                     to_string(n.value.shape()));
  }
  if (!n.has_grad) {
    n.grad = grad;
    n.has_grad = true;
    return;
  }
  auto dst = n.grad.data();
  auto src = grad.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

GradientTable Graph::backward(NodeId loss) {
  if (nodes_.empty() || loss >= nodes_.size()) {
    throw StateError("backward called before a forward pass was recorded");
  }
  if (nodes_[loss].value.rank() != 0) {
    throw ContractError("backward requires a rank-0 loss, got shape " +
                        to_string(nodes_[loss].value.shape()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  GradientTable table;
  if (!nodes_[loss].requires_grad) return table;

  nodes_[loss].grad = Tensor::scalar(1.0);
  nodes_[loss].has_grad = true;
  for (NodeId id = loss + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (!n.has_grad) continue;
    if (n.backward) {
      const Tensor upstream = n.grad;
      n.backward(*this, upstream);
    } else if (n.param && n.param->trainable) {
      auto dst = n.param->grad.data();
      auto src = n.grad.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      auto [it, inserted] = table.try_emplace(n.param->id, n.grad);
      if (!inserted) {
        for (std::size_t i = 0; i < it->second.size(); ++i) it->second[i] += n.grad[i];
      }
    }
  }
  return table;
}

namespace ad {

NodeId add(Graph& g, NodeId a, NodeId b) {
  const Shape b_shape = g.value(b).shape();
  return g.record("add", {a, b}, pvlu::add(g.value(a), g.value(b)),
                  [a, b, b_shape](Graph& gr, const Tensor& up) {
                    gr.accumulate(a, up);
                    if (gr.requires_grad(b)) gr.accumulate(b, reduce_to_shape(up, b_shape));
                  });
}

NodeId sub(Graph& g, NodeId a, NodeId b) {
  const Shape b_shape = g.value(b).shape();
  return g.record("sub", {a, b}, pvlu::sub(g.value(a), g.value(b)),
                  [a, b, b_shape](Graph& gr, const Tensor& up) {
                    gr.accumulate(a, up);
                    if (gr.requires_grad(b)) gr.accumulate(b, reduce_to_shape(scale(up, -1.0), b_shape));
                  });
}

NodeId mul(Graph& g, NodeId a, NodeId b) {
  const Shape b_shape = g.value(b).shape();
  return g.record("mul", {a, b}, pvlu::mul(g.value(a), g.value(b)),
                  [a, b, b_shape](Graph& gr, const Tensor& up) {
                    if (gr.requires_grad(a)) gr.accumulate(a, pvlu::mul(up, gr.value(b)));
                    if (gr.requires_grad(b)) {
                      gr.accumulate(b, reduce_to_shape(pvlu::mul(up, gr.value(a)), b_shape));
                    }
                  });
}

NodeId sum(Graph& g, NodeId a) {
  return g.record("sum", {a}, Tensor::scalar(pvlu::sum(g.value(a))),
                  [a](Graph& gr, const Tensor& up) {
                    gr.accumulate(a, Tensor(gr.value(a).shape(), up.item()));
                  });
}

NodeId matmul(Graph& g, NodeId a, NodeId b) {
  return g.record("matmul", {a, b}, pvlu::matmul(g.value(a), g.value(b)),
                  [a, b](Graph& gr, const Tensor& up) {
                    if (gr.requires_grad(a)) gr.accumulate(a, pvlu::matmul(up, gr.value(b), false, true));
                    if (gr.requires_grad(b)) gr.accumulate(b, pvlu::matmul(gr.value(a), up, true, false));
                  });
}

NodeId reshape(Graph& g, NodeId a, Shape shape) {
  const Shape original = g.value(a).shape();
  return g.record("reshape", {a}, g.value(a).reshaped(std::move(shape)),
                  [a, original](Graph& gr, const Tensor& up) { gr.accumulate(a, up.reshaped(original)); });
}

NodeId conv2d(Graph& g, NodeId input, NodeId kernel, std::size_t stride, Padding padding) {
  return g.record("conv2d", {input, kernel},
                  pvlu::conv2d(g.value(input), g.value(kernel), stride, padding),
                  [input, kernel, stride, padding](Graph& gr, const Tensor& up) {
                    const Tensor& x = gr.value(input);
                    const Tensor& k = gr.value(kernel);
                    if (gr.requires_grad(input)) {
                      gr.accumulate(input, conv2d_backward_input(up, k, x.shape(), stride, padding));
                    }
                    if (gr.requires_grad(kernel)) {
                      gr.accumulate(kernel, conv2d_backward_kernel(up, x, k.shape(), stride, padding));
                    }
                  });
}

NodeId maxpool2d(Graph& g, NodeId input, std::size_t window, std::size_t stride) {
  auto pooled = pvlu::maxpool2d(g.value(input), window, stride);
  const Shape in_shape = g.value(input).shape();
  return g.record("maxpool2d", {input}, std::move(pooled.output),
                  [input, in_shape, argmax = std::move(pooled.argmax)](Graph& gr, const Tensor& up) {
                    gr.accumulate(input, maxpool2d_backward(up, argmax, in_shape));
                  });
}

NodeId dropout(Graph& g, NodeId input, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must lie in [0,1)");
  const Tensor& x = g.value(input);
  Tensor mask(x.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution keep(1.0 - rate);
  for (auto& m : mask.data()) m = keep(rng) ? keep_scale : 0.0;
  Tensor out = pvlu::mul(x, mask);
  return g.record("dropout", {input}, std::move(out),
                  [input, mask = std::move(mask)](Graph& gr, const Tensor& up) {
                    gr.accumulate(input, pvlu::mul(up, mask));
                  });
}

NodeId batchnorm(Graph& g, NodeId input, NodeId scale, NodeId shift, BatchNormState state,
                 bool use_batch_stats) {
  const Tensor& x = g.value(input);
  const auto [batch, channels, inner] = channel_layout(x.shape());
  const Tensor& gamma = g.value(scale);
  const Tensor& beta = g.value(shift);
  if (gamma.size() != channels || beta.size() != channels) {
    throw ShapeError("batchnorm: parameter length does not match " + std::to_string(channels) +
                     " channels");
  }
  const double count = static_cast<double>(batch * inner);

  std::vector<double> mean(channels, 0.0), inv_std(channels, 0.0);
  if (use_batch_stats) {
    std::vector<double> var(channels, 0.0);
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double* p = x.data().data() + (n * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) mean[c] += p[i];
      }
    }
    for (auto& m : mean) m /= count;
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double* p = x.data().data() + (n * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) var[c] += (p[i] - mean[c]) * (p[i] - mean[c]);
      }
    }
    for (std::size_t c = 0; c < channels; ++c) {
      var[c] /= count;
      inv_std[c] = 1.0 / std::sqrt(var[c] + state.epsilon);
      state.running_mean[c] = state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mean[c];
      state.running_var[c] = state.momentum * state.running_var[c] + (1.0 - state.momentum) * var[c];
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.epsilon);
    }
  }

  Tensor normalized(x.shape());
  Tensor out(x.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (n * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double xh = (x[base + i] - mean[c]) * inv_std[c];
        normalized[base + i] = xh;
        out[base + i] = gamma[c] * xh + beta[c];
      }
    }
  }

  return g.record(
      "batchnorm", {input, scale, shift}, std::move(out),
      [=, normalized = std::move(normalized), inv_std = std::move(inv_std)](Graph& gr, const Tensor& up) {
        const Tensor& gam = gr.value(scale);
        std::vector<double> sum_up(channels, 0.0), sum_up_xh(channels, 0.0);
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (n * channels + c) * inner;
            for (std::size_t i = 0; i < inner; ++i) {
              sum_up[c] += up[base + i];
              sum_up_xh[c] += up[base + i] * normalized[base + i];
            }
          }
        }
        if (gr.requires_grad(scale)) gr.accumulate(scale, Tensor(Shape{channels}, sum_up_xh));
        if (gr.requires_grad(shift)) gr.accumulate(shift, Tensor(Shape{channels}, sum_up));
        if (!gr.requires_grad(input)) return;
        Tensor dx(up.shape());
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (n * channels + c) * inner;
            const double k = gam[c] * inv_std[c];
            for (std::size_t i = 0; i < inner; ++i) {
              dx[base + i] = use_batch_stats
                                 ? k * (up[base + i] - sum_up[c] / count -
                                        normalized[base + i] * sum_up_xh[c] / count)
                                 : k * up[base + i];
            }
          }
        }
        gr.accumulate(input, dx);
      });
}

NodeId softmax_cross_entropy(Graph& g, NodeId logits, const std::vector<int>& labels) {
  const Tensor& z = g.value(logits);
  if (z.rank() != 2 || z.extent(0) != labels.size()) {
    throw ShapeError("softmax_cross_entropy: logits " + to_string(z.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t classes = z.extent(1);
  Tensor probs = softmax(z);
  double loss = 0.0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto label = static_cast<std::size_t>(labels[n]);
    if (labels[n] < 0 || label >= classes) throw ContractError("label out of range");
    // log-softmax with max shift
    const double* row = z.data().data() + n * classes;
    const double top = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t k = 0; k < classes; ++k) denom += std::exp(row[k] - top);
    loss -= (row[label] - top) - std::log(denom);
  }
  const double batch = static_cast<double>(labels.size());
  return g.record("softmax_cross_entropy", {logits}, Tensor::scalar(loss / batch),
                  [logits, labels, classes, batch, probs = std::move(probs)](Graph& gr, const Tensor& up) {
                    Tensor d = probs;
                    for (std::size_t n = 0; n < labels.size(); ++n) {
                      d[n * classes + static_cast<std::size_t>(labels[n])] -= 1.0;
                    }
                    gr.accumulate(logits, scale(d, up.item() / batch));
                  });
}

}  // namespace ad

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects [N,K], got " + to_string(logits.shape()));
  const std::size_t rows = logits.extent(0), cols = logits.extent(1);
  Tensor out(logits.shape());
  for (std::size_t n = 0; n < rows; ++n) {
    const double* row = logits.data().data() + n * cols;
    const double top = *std::max_element(row, row + cols);
    double denom = 0.0;
    for (std::size_t k = 0; k < cols; ++k) {
      out[n * cols + k] = std::exp(row[k] - top);
      denom += out[n * cols + k];
    }
    for (std::size_t k = 0; k < cols; ++k) out[n * cols + k] /= denom;
  }
  return out;
}

Tensor finite_diff(const std::function<double()>& f, Parameter& p, double h) {
  Tensor result(p.value.shape());
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double original = p.value[i];
    p.value[i] = original + h;
    const double up = f();
    p.value[i] = original - h;
    const double down = f();
    p.value[i] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff: objective is not finite near element " + std::to_string(i) +
                         " of " + p.name);
    }
    result[i] = (up - down) / (2.0 * h);
  }
  return result;
}

Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor probe = x;
  Tensor result(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff: objective is not finite near element " + std::to_string(i));
    }
    result[i] = (up - down) / (2.0 * h);
  }
  return result;
}

}  // namespace pvlu
