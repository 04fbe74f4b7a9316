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
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pvlu/data.hpp"
#include "pvlu/layers.hpp"

namespace pvlu {

namespace opt {
/// v <- momentum * v + g;  w <- w - lr * v
struct Sgd {
  double lr = 1e-3;
  double momentum = 0.9;
};
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};
}  // namespace opt

using OptimizerConfig = std::variant<opt::Sgd, opt::Adam>;

std::string to_string(const OptimizerConfig& cfg);
/// sgd[:lr[:momentum]] | adam[:lr[:beta1[:beta2[:eps]]]]
OptimizerConfig parse_optimizer(const std::string& text);

/// Updates the trainable parameters it was given; frozen ones are skipped
/// (checked at every step, so freezing after construction is honoured).
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::vector<ParamPtr> params);
  void step();
  void zero_grad();
  const OptimizerConfig& config() const noexcept { return cfg_; }

 private:
  struct Slot {
    Tensor m;
    Tensor v;
  };
  OptimizerConfig cfg_;
  std::vector<ParamPtr> params_;
  std::map<std::uint64_t, Slot> slots_;
  std::uint64_t steps_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  OptimizerConfig optimizer = opt::Adam{};
  std::vector<std::uint64_t> seeds{0};
  AugmentConfig augment;
  TrainPolicy freeze = policy::All{};
  ActivationSpec activation = ActivationSpec::relu();
  /// Epoch index (0-based) before which ReLU layers become PVLU, if any.
  std::optional<std::size_t> substitute_at;
  PvluInit substitute_init = PvluInit::finetune();
  /// Test samples used for the per-epoch dead-unit probe.
  std::size_t probe_size = 256;
  std::size_t eval_batch = 250;
  bool verbose = false;

  /// Throws ConfigError when epochs, batch size or seeds are empty.
  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double dead_frac = 0.0;
};

struct TrialResult {
  std::uint64_t seed = 0;
  /// One row per trained epoch, numbered from 1.
  std::vector<EpochMetrics> epochs;
  double peak_test_acc = 0.0;
  double wall_seconds = 0.0;
};

struct Summary {
  std::string activation;
  double mean_peak = 0.0;
  /// Sample standard deviation / sqrt(n); 0 when n == 1.
  double std_err = 0.0;
  std::size_t n = 0;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Eval-mode mean loss and accuracy.
Evaluation evaluate(Model& model, const Dataset& data, std::size_t batch = 250);

/// Trains in place, evaluating on `test` after every epoch. Deterministic in
/// (model, data, cfg, seed). A non-finite loss or one above 1e4 throws
/// NumericError naming the epoch and batch.
TrialResult train(Model& model, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                  std::uint64_t seed);

struct FinetuneResult {
  /// Pretrained model on the test set before any change.
  Evaluation before;
  /// Substituted model before training, as epoch 0 (train metrics from an
  /// eval-mode pass over the training set). test_acc equals before.accuracy.
  EpochMetrics initial;
  /// Last epoch, or `initial` when no epochs ran.
  Evaluation after;
  TrialResult trial;
  Model model;
};

/// ReLU -> PVLU(alpha 0, beta 1) substitution, then `cfg.freeze` (use
/// pvlu_and_batchnorm() for the usual protocol) and `cfg.epochs` epochs of
/// training, which may be 0.
FinetuneResult finetune(const Model& pretrained, const Dataset& train_set, const Dataset& test_set,
                        const TrainConfig& cfg, std::uint64_t seed);

/// ((1 - before) - (1 - after)) / (1 - before). Throws ContractError unless
/// both lie in [0,1] and before < 1.
double rel_error_decrease(double acc_before, double acc_after);

/// Mean and standard error of the given peaks. Throws ContractError when
/// empty.
Summary summarize(const std::string& activation, const std::vector<double>& peaks);
Summary summarize(const std::string& activation, const std::vector<TrialResult>& trials);

struct DeadUnits {
  std::string layer;
  std::size_t units = 0;
  std::size_t dead = 0;
  double fraction = 0.0;
};

/// Per activation layer, the fraction of units whose local derivative is
/// exactly 0 for every sample of `probe` (eval mode).
std::vector<DeadUnits> dying_neuron_report(Model& model, const Tensor& probe);
/// Dead units over all activation layers / all units (0 with none).
double dead_fraction(const std::vector<DeadUnits>& report);

/// Runs `trial(seed)` for every seed on up to `jobs` threads. Results follow
/// the order of `seeds`; the first exception is rethrown after all workers
/// stop.
std::vector<TrialResult> run_trials(const std::vector<std::uint64_t>& seeds, std::size_t jobs,
                                    const std::function<TrialResult(std::uint64_t)>& trial);

}  // namespace pvlu
