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

#include "pvlu/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "pvlu/errors.hpp"
#include "pvlu/overloaded.hpp"

namespace pvlu {

namespace {

std::vector<std::string> split_colon(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ':')) parts.push_back(part);
  if (parts.empty()) parts.emplace_back();
  return parts;
}

double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in '" + context + "'");
  }
}

struct BatchStats {
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;
};

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t k = logits.extent(1);
  const double* p = logits.data().data() + row * k;
  return static_cast<std::size_t>(std::max_element(p, p + k) - p);
}

// Summed cross-entropy and correct count for one batch of logits.
void score(const Tensor& logits, const std::vector<int>& labels, BatchStats& stats) {
  const std::size_t k = logits.extent(1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* p = logits.data().data() + i * k;
    const double m = *std::max_element(p, p + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(p[j] - m);
    stats.loss_sum += std::log(z) + m - p[labels[i]];
    if (argmax_row(logits, i) == static_cast<std::size_t>(labels[i])) ++stats.correct;
  }
  stats.count += labels.size();
}

std::vector<std::size_t> iota_indices(std::size_t n, std::size_t start = 0) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), start);
  return idx;
}

void check_compatible(const Model& model, const Dataset& data, const char* which) {
  data.validate();
  if (data.sample_shape() != model.input_shape()) {
    throw ContractError(std::string(which) + " samples are " + to_string(data.sample_shape()) +
                        " but the model expects " + to_string(model.input_shape()));
  }
  if (model.output_shape() != Shape{data.classes}) {
    throw ContractError(std::string(which) + " has " + std::to_string(data.classes) +
                        " classes but the model emits " + to_string(model.output_shape()));
  }
}

// Trains `epochs` epochs, appending to result.epochs.
void run_epochs(Model& model, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                std::uint64_t seed, std::size_t first_epoch, TrialResult& result) {
  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
  Optimizer optimizer(cfg.optimizer, model.parameters());
  const std::size_t n = train_set.size();
  const std::size_t probe_n = std::min(cfg.probe_size, test_set.size());
  const Tensor probe = test_set.gather_images(iota_indices(probe_n));

  for (std::size_t e = first_epoch; e < first_epoch + cfg.epochs; ++e) {
    if (cfg.substitute_at && *cfg.substitute_at == e) {
      model = substitute_pvlu(model, cfg.substitute_init);
      set_trainable(model, cfg.freeze);
      optimizer = Optimizer(cfg.optimizer, model.parameters());
    }
    std::vector<std::size_t> order = iota_indices(n);
    std::shuffle(order.begin(), order.end(), rng);
    BatchStats stats;
    for (std::size_t start = 0, batch = 0; start < n; start += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      Tensor images = train_set.gather_images(idx);
      const std::vector<int> labels = train_set.gather_labels(idx);
      if (!cfg.augment.is_identity()) images = augment_batch(images, cfg.augment, rng);

      ForwardPass pass;
      try {
        pass = model.forward(images, Mode::Train, &rng);
      } catch (const NumericError& err) {
        throw NumericError("epoch " + std::to_string(e + 1) + " batch " + std::to_string(batch + 1) + ": " +
                           err.what());
      }
      const NodeId loss = ad::softmax_cross_entropy(pass.graph, pass.logits, labels);
      const double loss_value = pass.graph.value(loss).item();
      if (!std::isfinite(loss_value) || loss_value > 1e4) {
        std::ostringstream msg;
        msg << "training aborted at epoch " << e + 1 << " batch " << batch + 1 << ": loss = " << loss_value;
        throw NumericError(msg.str());
      }
      optimizer.zero_grad();
      pass.graph.backward(loss);
      optimizer.step();

      stats.loss_sum += loss_value * static_cast<double>(labels.size());
      const Tensor& logits = pass.graph.value(pass.logits);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (argmax_row(logits, i) == static_cast<std::size_t>(labels[i])) ++stats.correct;
      }
      stats.count += labels.size();
    }

    EpochMetrics m;
    m.epoch = e + 1;
    m.train_loss = stats.loss_sum / static_cast<double>(stats.count);
    m.train_acc = static_cast<double>(stats.correct) / static_cast<double>(stats.count);
    const Evaluation test = evaluate(model, test_set, cfg.eval_batch);
    m.test_loss = test.loss;
    m.test_acc = test.accuracy;
    m.dead_frac = dead_fraction(dying_neuron_report(model, probe));
    result.epochs.push_back(m);
    result.peak_test_acc = std::max(result.peak_test_acc, m.test_acc);
    if (cfg.verbose) {
      std::ostringstream line;
      line << "seed " << seed << " epoch " << m.epoch << " train_loss " << m.train_loss << " train_acc "
           << m.train_acc << " test_acc " << m.test_acc << "\n";
      std::cerr << line.str();
    }
  }
}

}  // namespace

std::string to_string(const OptimizerConfig& cfg) {
  std::ostringstream out;
  std::visit(Overloaded{
                 [&](const opt::Sgd& s) { out << "sgd:" << s.lr << ":" << s.momentum; },
                 [&](const opt::Adam& a) {
                   out << "adam:" << a.lr << ":" << a.beta1 << ":" << a.beta2 << ":" << a.epsilon;
                 },
             },
             cfg);
  return out.str();
}

OptimizerConfig parse_optimizer(const std::string& text) {
  const auto parts = split_colon(text);
  auto num = [&](std::size_t i, double fallback) {
    return parts.size() > i ? parse_number(parts[i], text) : fallback;
  };
  OptimizerConfig cfg;
  if (parts[0] == "sgd") {
    if (parts.size() > 3) throw ConfigError("sgd takes at most lr and momentum: '" + text + "'");
    opt::Sgd s;
    cfg = opt::Sgd{num(1, s.lr), num(2, s.momentum)};
  } else if (parts[0] == "adam") {
    if (parts.size() > 5) throw ConfigError("adam takes at most lr, beta1, beta2, eps: '" + text + "'");
    opt::Adam a;
    cfg = opt::Adam{num(1, a.lr), num(2, a.beta1), num(3, a.beta2), num(4, a.epsilon)};
  } else {
    throw ConfigError("unknown optimizer '" + text + "' (expected sgd or adam)");
  }
  std::visit(Overloaded{
                 [](const opt::Sgd& s) {
                   if (s.lr < 0 || s.momentum < 0 || s.momentum >= 1) throw ConfigError("sgd needs lr >= 0, 0 <= momentum < 1");
                 },
                 [](const opt::Adam& a) {
                   if (a.lr < 0 || a.beta1 < 0 || a.beta1 >= 1 || a.beta2 < 0 || a.beta2 >= 1 || a.epsilon <= 0) {
                     throw ConfigError("adam needs lr >= 0, betas in [0,1), eps > 0");
                   }
                 },
             },
             cfg);
  return cfg;
}

Optimizer::Optimizer(OptimizerConfig cfg, std::vector<ParamPtr> params) : cfg_(cfg), params_(std::move(params)) {
  for (const auto& p : params_) slots_[p->id] = Slot{Tensor(p->value.shape()), Tensor(p->value.shape())};
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void Optimizer::step() {
  ++steps_;
  for (auto& p : params_) {
    if (!p->trainable) continue;
    Slot& slot = slots_.at(p->id);
    auto w = p->value.data();
    auto g = p->grad.data();
    auto m = slot.m.data();
    auto v = slot.v.data();
    std::visit(Overloaded{
                   [&](const opt::Sgd& s) {
                     for (std::size_t i = 0; i < w.size(); ++i) {
                       m[i] = s.momentum * m[i] + g[i];
                       w[i] -= s.lr * m[i];
                     }
                   },
                   [&](const opt::Adam& a) {
                     const double t = static_cast<double>(steps_);
                     const double c1 = 1.0 - std::pow(a.beta1, t);
                     const double c2 = 1.0 - std::pow(a.beta2, t);
                     for (std::size_t i = 0; i < w.size(); ++i) {
                       m[i] = a.beta1 * m[i] + (1.0 - a.beta1) * g[i];
                       v[i] = a.beta2 * v[i] + (1.0 - a.beta2) * g[i] * g[i];
                       w[i] -= a.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + a.epsilon);
                     }
                   },
               },
               cfg_);
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (eval_batch < 1) throw ConfigError("eval batch must be >= 1");
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ConfigError("seeds must be distinct");
}

Evaluation evaluate(Model& model, const Dataset& data, std::size_t batch) {
  if (batch == 0) throw ContractError("evaluate: batch must be >= 1");
  BatchStats stats;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    const auto idx = iota_indices(std::min(batch, data.size() - start), start);
    score(model.logits(data.gather_images(idx)), data.gather_labels(idx), stats);
  }
  if (stats.count == 0) throw ContractError("evaluate: empty dataset");
  return {stats.loss_sum / static_cast<double>(stats.count),
          static_cast<double>(stats.correct) / static_cast<double>(stats.count)};
}

TrialResult train(Model& model, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                  std::uint64_t seed) {
  cfg.validate();
  check_compatible(model, train_set, "training set");
  check_compatible(model, test_set, "test set");
  const auto t0 = std::chrono::steady_clock::now();
  if (!cfg.substitute_at && !std::holds_alternative<policy::All>(cfg.freeze)) set_trainable(model, cfg.freeze);
  TrialResult result;
  result.seed = seed;
  run_epochs(model, train_set, test_set, cfg, seed, 0, result);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

FinetuneResult finetune(const Model& pretrained, const Dataset& train_set, const Dataset& test_set,
                        const TrainConfig& cfg, std::uint64_t seed) {
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  check_compatible(pretrained, train_set, "training set");
  check_compatible(pretrained, test_set, "test set");
  const auto t0 = std::chrono::steady_clock::now();

  Model original = pretrained;
  FinetuneResult out;
  out.before = evaluate(original, test_set, cfg.eval_batch);
  out.model = substitute_pvlu(pretrained, PvluInit::finetune());
  set_trainable(out.model, cfg.freeze);
  const Evaluation initial_test = evaluate(out.model, test_set, cfg.eval_batch);
  const Evaluation initial_train = evaluate(out.model, train_set, cfg.eval_batch);
  const std::size_t probe_n = std::min(cfg.probe_size, test_set.size());
  out.initial = {0,
                 initial_train.loss,
                 initial_train.accuracy,
                 initial_test.loss,
                 initial_test.accuracy,
                 dead_fraction(dying_neuron_report(out.model, test_set.gather_images(iota_indices(probe_n))))};

  TrainConfig inner = cfg;
  inner.substitute_at.reset();
  out.trial.seed = seed;
  run_epochs(out.model, train_set, test_set, inner, seed, 0, out.trial);
  const EpochMetrics& last = out.trial.epochs.empty() ? out.initial : out.trial.epochs.back();
  out.after = {last.test_loss, last.test_acc};
  out.trial.peak_test_acc = std::max(out.trial.peak_test_acc, out.initial.test_acc);
  out.trial.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

double rel_error_decrease(double acc_before, double acc_after) {
  if (!(acc_before >= 0.0 && acc_before <= 1.0) || !(acc_after >= 0.0 && acc_after <= 1.0)) {
    throw ContractError("rel_error_decrease: accuracies must lie in [0,1]");
  }
  if (acc_before >= 1.0) throw ContractError("rel_error_decrease: initial error is zero");
  const double e_i = 1.0 - acc_before;
  const double e_f = 1.0 - acc_after;
  return (e_i - e_f) / e_i;
}

Summary summarize(const std::string& activation, const std::vector<double>& peaks) {
  if (peaks.empty()) throw ContractError("summarize: no trials");
  // Sorted summation keeps the result independent of trial order.
  std::vector<double> sorted = peaks;
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double total = 0.0;
  for (double p : sorted) total += p;
  // Identical peaks give exactly that peak and zero error, free of rounding.
  const double mean = sorted.front() == sorted.back() ? sorted.front() : total / n;
  double ss = 0.0;
  for (double p : sorted) ss += (p - mean) * (p - mean);
  const double se = sorted.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
  return {activation, mean, se, sorted.size()};
}

Summary summarize(const std::string& activation, const std::vector<TrialResult>& trials) {
  std::vector<double> peaks;
  peaks.reserve(trials.size());
  for (const auto& t : trials) peaks.push_back(t.peak_test_acc);
  return summarize(activation, peaks);
}

std::vector<DeadUnits> dying_neuron_report(Model& model, const Tensor& probe) {
  ForwardPass pass = model.forward(probe, Mode::Eval);
  std::vector<DeadUnits> report;
  for (const auto& site : pass.activations) {
    const Tensor& z = pass.graph.value(site.pre);
    const Tensor d = act_derivative(site.kind, z);
    const std::size_t batch = z.extent(0);
    const std::size_t units = z.size() / batch;
    DeadUnits row{site.layer, units, 0, 0.0};
    for (std::size_t u = 0; u < units; ++u) {
      bool dead = true;
      for (std::size_t b = 0; b < batch && dead; ++b) dead = d[b * units + u] == 0.0;
      if (dead) ++row.dead;
    }
    row.fraction = static_cast<double>(row.dead) / static_cast<double>(units);
    report.push_back(row);
  }
  return report;
}

double dead_fraction(const std::vector<DeadUnits>& report) {
  std::size_t units = 0, dead = 0;
  for (const auto& r : report) {
    units += r.units;
    dead += r.dead;
  }
  return units ? static_cast<double>(dead) / static_cast<double>(units) : 0.0;
}

std::vector<TrialResult> run_trials(const std::vector<std::uint64_t>& seeds, std::size_t jobs,
                                    const std::function<TrialResult(std::uint64_t)>& trial) {
  std::vector<TrialResult> results(seeds.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, seeds.size()));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= seeds.size()) return;
      try {
        results[i] = trial(seeds[i]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace pvlu
