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
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pvlu/tensor.hpp"

namespace pvlu {

/// What a Parameter is for. Freeze policies select on this.
enum class ParamRole { Weight, Bias, PvluAlpha, PvluBeta, PreluSlope, BatchNormScale, BatchNormShift };

std::string to_string(ParamRole role);

/// Trainable leaf. `grad` always has the shape of `value`.
struct Parameter {
  std::uint64_t id = 0;
  std::string name;
  ParamRole role = ParamRole::Weight;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad();
};

using ParamPtr = std::shared_ptr<Parameter>;

/// Creates a parameter with a fresh process-unique id and a zeroed gradient.
ParamPtr make_parameter(std::string name, ParamRole role, Tensor value);

/// Parameter id -> gradient produced by one backward pass.
using GradientTable = std::map<std::uint64_t, Tensor>;

using NodeId = std::size_t;

/// Tape of one forward computation. Nodes are appended in execution order,
/// which is a topological order, so backward is a single reverse sweep.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

  struct Record {
    std::string kind;
    std::vector<NodeId> inputs;
    NodeId output;
  };

  /// Value that never receives a gradient (data, labels, masks).
  NodeId constant(Tensor value);
  /// Free leaf that receives a gradient; read it with grad() after backward.
  NodeId leaf(Tensor value);
  /// Leaf bound to a Parameter; backward accumulates into Parameter::grad
  /// when the parameter is trainable.
  NodeId parameter(const ParamPtr& param);

  /// Appends an op node. `backward` receives d(loss)/d(output) and must
  /// push gradients into inputs via accumulate().
  NodeId record(std::string kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  /// Gradient after backward(); zeros for nodes the loss does not reach.
  Tensor grad(NodeId id) const;
  void accumulate(NodeId id, const Tensor& grad);

  const std::vector<Record>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a rank-0 loss. Adds into Parameter::grad.
  GradientTable backward(NodeId loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    ParamPtr param;
    BackwardFn backward;
  };

  NodeId push(Node node);

  std::vector<Node> nodes_;
  std::vector<Record> records_;
};

namespace ad {

NodeId add(Graph& g, NodeId a, NodeId b);
NodeId sub(Graph& g, NodeId a, NodeId b);
NodeId mul(Graph& g, NodeId a, NodeId b);
NodeId sum(Graph& g, NodeId a);
NodeId matmul(Graph& g, NodeId a, NodeId b);
NodeId reshape(Graph& g, NodeId a, Shape shape);
NodeId conv2d(Graph& g, NodeId input, NodeId kernel, std::size_t stride, Padding padding);
NodeId maxpool2d(Graph& g, NodeId input, std::size_t window, std::size_t stride);

/// Inverted dropout. The mask is drawn from `rng` and kept on the tape.
NodeId dropout(Graph& g, NodeId input, double rate, std::mt19937_64& rng);

struct BatchNormState {
  Tensor& running_mean;
  Tensor& running_var;
  double momentum;
  double epsilon;
};

/// Per-channel normalization over axis 1. With `use_batch_stats` the batch
/// mean/variance normalize the input and the running statistics are updated;
/// otherwise the running statistics are used as constants.
NodeId batchnorm(Graph& g, NodeId input, NodeId scale, NodeId shift, BatchNormState state,
                 bool use_batch_stats);

/// Mean softmax cross-entropy over the batch, computed with a max shift.
NodeId softmax_cross_entropy(Graph& g, NodeId logits, const std::vector<int>& labels);

}  // namespace ad

/// Row-wise softmax of [N,K] logits.
Tensor softmax(const Tensor& logits);

/// Central differences (f(p+h) - f(p-h)) / 2h for every element of p.
/// `f` reads the parameter's current value; p is restored afterwards.
Tensor finite_diff(const std::function<double()>& f, Parameter& p, double h = 1e-5);

/// Same, for a function of a free tensor.
Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x,
                   double h = 1e-5);

}  // namespace pvlu
