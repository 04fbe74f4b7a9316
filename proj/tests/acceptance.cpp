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

// Acceptance checks, one per criterion. Usage: pvlu_acceptance [N ...]
// Prints one "criterion N: PASS|FAIL ..." line per selected criterion and
// exits non-zero if any of them failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pvlu/cli.hpp"
#include "pvlu/data.hpp"
#include "pvlu/fixtures.hpp"
#include "pvlu/gradcheck.hpp"
#include "pvlu/harness.hpp"
#include "pvlu/metrics_io.hpp"
#include "pvlu/model_zoo.hpp"

namespace fs = std::filesystem;
using namespace pvlu;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << v;
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("pvlu_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  GradcheckReport report = run_gradcheck(GradcheckOptions{});
  const double secs = seconds_since(t0);
  print_report(report, std::cout);
  std::size_t fewest = report.cases.empty() ? 0 : report.cases.front().samples;
  double worst = 0.0;
  for (const auto& c : report.cases) {
    fewest = std::min(fewest, c.samples);
    worst = std::max(worst, c.max_rel_err);
  }
  const bool ok = report.passed() && fewest >= 1000 && secs < 60.0;
  return {ok, std::to_string(report.cases.size()) + " cases, >= " + std::to_string(fewest) +
                  " points each, worst rel err " + sci(worst) + ", " + fmt(secs, 1) + " s"};
}

Outcome substitution_identity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  std::size_t equal = 0, total = 0;
  for (const char* name : {"cifar6", "resnet-mini"}) {
    Model m = Model::build(named_model(name, ActivationSpec::relu(), 10), {3, 32, 32}, 2);
    // Move batchnorm running statistics away from their initial values.
    for (int i = 0; i < 3; ++i) m.forward(oracle::random_tensor({16, 3, 32, 32}, rng, 0.0, 1.0), Mode::Train, &rng);
    Model s = substitute_pvlu(m, PvluInit::finetune());
    for (int b = 0; b < 50; ++b) {
      Tensor x = oracle::random_tensor({4, 3, 32, 32}, rng, -1.0, 2.0);
      equal += m.logits(x).bitwise_equal(s.logits(x));
      ++total;
    }
  }
  const double secs = seconds_since(t0);
  return {equal == total && total == 100 && secs < 10.0,
          std::to_string(equal) + "/" + std::to_string(total) + " batches bitwise equal, " + fmt(secs, 1) + " s"};
}

struct DyingProbe {
  double dz_norm = 0.0;
  double weight_grad_norm = 0.0;
  double bias_grad_norm = 0.0;
  bool all_negative = true;
};

DyingProbe dying_probe(const ActivationSpec& act) {
  Model m = Model::build(parse_layers("dense:12,act,dense:3,softmax", act), {5}, 3);
  std::mt19937_64 rng(3);
  auto ps = m.parameters();
  ps[0]->value = oracle::random_tensor({5, 12}, rng, -1.0, -0.1);
  ps[1]->value = Tensor({12}, -0.05);
  Tensor x = oracle::random_tensor({16, 5}, rng, 0.1, 1.0);
  m.zero_grad();
  ForwardPass fp = m.forward(x, Mode::Eval);
  fp.graph.backward(ad::softmax_cross_entropy(fp.graph, fp.logits, {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0}));
  DyingProbe out;
  const NodeId pre = fp.activations.at(0).pre;
  for (double v : fp.graph.value(pre).data()) out.all_negative &= v < 0.0;
  for (double v : fp.graph.grad(pre).data()) out.dz_norm += v * v;
  for (double v : ps[0]->grad.data()) out.weight_grad_norm += v * v;
  for (double v : ps[1]->grad.data()) out.bias_grad_norm += v * v;
  out.dz_norm = std::sqrt(out.dz_norm);
  out.weight_grad_norm = std::sqrt(out.weight_grad_norm);
  out.bias_grad_norm = std::sqrt(out.bias_grad_norm);
  return out;
}

Outcome dying_neurons() {
  const DyingProbe relu = dying_probe(ActivationSpec::relu());
  const DyingProbe pvlu = dying_probe(ActivationSpec::pvlu(PvluInit::scratch()));
  const bool ok = relu.all_negative && pvlu.all_negative && relu.dz_norm == 0.0 && relu.weight_grad_norm == 0.0 &&
                  relu.bias_grad_norm == 0.0 && pvlu.dz_norm > 0.0 && pvlu.weight_grad_norm > 0.0 &&
                  pvlu.bias_grad_norm > 0.0;
  std::ostringstream d;
  d << "relu |dz|=" << relu.dz_norm << " |dW|=" << relu.weight_grad_norm << " |db|=" << relu.bias_grad_norm
    << "; pvlu |dz|=" << pvlu.dz_norm << " |dW|=" << pvlu.weight_grad_norm << " |db|=" << pvlu.bias_grad_norm;
  return {ok, d.str()};
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

Outcome statistics_reproduction() {
  struct Column {
    std::string name;
    std::vector<double> peaks;
    double mean, std_err;
  };
  const std::vector<Column> table = {
      {"relu", {0.7, 49.7, 0.8, 48.7, 47.2}, 48.5, 0.7},
      {"leaky", {50.1, 50.5, 50.5, 50.7, 50.3}, 50.4, 0.1},
      {"prelu", {56.0, 55.5, 55.6, 54.9, 55.0}, 55.5, 0.2},
      {"pvlu", {56.6, 56.6, 57.8, 56.7, 56.7}, 56.9, 0.2},
  };
  std::size_t cells = 0, matched = 0;
  std::vector<std::string> misses;
  for (const auto& col : table) {
    const Summary s = summarize(col.name, col.peaks);
    const bool mean_ok = round1(s.mean_peak) == col.mean;
    const bool err_ok = round1(s.std_err) == col.std_err;
    std::cout << "  " << std::left << std::setw(7) << col.name << "mean " << fmt(s.mean_peak, 2) << " (printed "
              << fmt(col.mean, 1) << ") " << (mean_ok ? "ok" : "MISMATCH") << "   std err " << fmt(s.std_err, 3)
              << " (printed " << fmt(col.std_err, 1) << ") " << (err_ok ? "ok" : "MISMATCH") << "\n";
    cells += 2;
    matched += mean_ok + err_ok;
    if (!mean_ok) misses.push_back(col.name + " mean");
    if (!err_ok) misses.push_back(col.name + " std err");
  }
  {
    // The printed relu cells match the three seeds that did not collapse to chance.
    const Summary s = summarize("relu", std::vector<double>{49.7, 48.7, 47.2});
    std::cout << "  note: relu without the collapsed seeds 0 and 2 gives mean " << fmt(s.mean_peak, 2)
              << ", std err " << fmt(s.std_err, 3) << "\n";
  }

  struct Pair {
    std::string name;
    double before, after, printed;
  };
  const std::vector<Pair> pairs = {
      {"vgg16 clean", 86.95, 88.19, 9.5},  {"vgg19 clean", 89.98, 91.06, 10.7},
      {"vgg16 noisy", 84.89, 86.30, 9.3},  {"vgg19 noisy", 82.34, 84.05, 9.7},
      {"r50 c10", 95.46, 95.82, 7.9},      {"r101v2 c10", 95.71, 96.20, 11.2},
      {"r152v2 c10", 96.39, 96.49, 2.8},   {"r50 c100", 79.9, 80.7, 4.1},
      {"r101v2 c100", 80.66, 81.29, 3.3},  {"r152v2 c100", 81.66, 82.52, 4.7},
  };
  for (const auto& p : pairs) {
    const double pct = 100.0 * rel_error_decrease(p.before / 100.0, p.after / 100.0);
    const bool ok = std::abs(pct - p.printed) <= 0.15 + 1e-9;
    std::cout << "  " << std::left << std::setw(13) << p.name << fmt(pct, 3) << "% (printed " << fmt(p.printed, 1)
              << "%) " << (ok ? "ok" : "MISMATCH") << "\n";
    ++cells;
    matched += ok;
    if (!ok) misses.push_back(p.name + " rel error decrease");
  }
  std::string detail = std::to_string(matched) + "/" + std::to_string(cells) + " cells reproduced";
  if (!misses.empty()) {
    detail += "; mismatched:";
    for (const auto& m : misses) detail += " [" + m + "]";
  }
  return {misses.empty(), detail};
}

Outcome gaussian_pipeline() {
  const double ksum = sum(gaussian_kernel(1.0));
  std::mt19937_64 rng(5);
  double const_err = 0.0;
  for (double c : {0.0, 0.3, 1.0}) {
    Tensor img({3, 32, 32}, c);
    const_err = std::max(const_err, max_abs_diff(gaussian_filter(img, 1.0), img));
  }
  double oracle_err = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t h = 4 + rng() % 13, w = 4 + rng() % 13;
    Tensor img = oracle::random_tensor({1 + rng() % 3, h, w}, rng, 0.0, 1.0);
    oracle_err = std::max(oracle_err, max_abs_diff(gaussian_filter(img, 1.0), oracle::gaussian_filter(img, 1.0)));
  }
  const bool ok = std::abs(ksum - 1.0) < 1e-12 && const_err < 1e-6 && oracle_err < 1e-10;
  std::ostringstream d;
  d << "|sum-1|=" << std::abs(ksum - 1.0) << ", constant err " << const_err << ", oracle err " << oracle_err
    << " over 50 images";
  return {ok, d.str()};
}

TrainConfig desk_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  cfg.optimizer = opt::Adam{};
  cfg.verbose = true;
  return cfg;
}

Outcome training_smoke() {
  const auto t0 = Clock::now();
  const fs::path dir = scratch_dir("c6");
  fixtures::FixtureSizes sizes;
  sizes.shapes_train = sizes.shapes_test = 10;
  const auto files = fixtures::write_all(dir, sizes, 0);
  const Dataset train_set = load_idx(files.digits_train_images, files.digits_train_labels, Split::Train, 10);
  const Dataset test_set = load_idx(files.digits_test_images, files.digits_test_labels, Split::Test, 10);

  std::map<std::string, double> acc;
  for (const auto& act : {ActivationSpec::relu(), ActivationSpec::pvlu()}) {
    Model m = Model::build(named_model("mnist-cnn", act, 10), train_set.sample_shape(), 0);
    TrialResult r = train(m, train_set, test_set, desk_config(5), 0);
    acc[activation_spec_name(act)] = r.epochs.back().test_acc;
  }
  fs::remove_all(dir);
  const double secs = seconds_since(t0);
  const bool ok = acc["relu"] >= 0.95 && acc["pvlu"] >= 0.95 && secs < 600.0;
  return {ok, std::to_string(train_set.size()) + " train images, final test acc relu " + fmt(acc["relu"]) +
                  " pvlu " + fmt(acc["pvlu"]) + ", " + fmt(secs, 0) + " s"};
}

struct CifarSubset {
  Dataset train, test;
};

CifarSubset cifar_subset(const std::string& tag) {
  const fs::path dir = scratch_dir(tag);
  fixtures::FixtureSizes sizes;
  sizes.digits_train = sizes.digits_test = 10;
  const auto files = fixtures::write_all(dir, sizes, 0);
  CifarSubset out{load_cifar(files.shapes_train, Split::Train), load_cifar(files.shapes_test, Split::Test)};
  fs::remove_all(dir);
  return out;
}

Outcome directional_deep() {
  const auto t0 = Clock::now();
  const CifarSubset data = cifar_subset("c7");
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  std::map<std::string, Summary> summary;
  for (const auto& act : {ActivationSpec::relu(), ActivationSpec::pvlu()}) {
    const auto specs = named_model("cifar6", act, 10);
    std::vector<TrialResult> trials;
    for (std::uint64_t seed : seeds) {
      Model m = Model::build(specs, data.train.sample_shape(), seed);
      TrainConfig cfg = desk_config(15);
      cfg.augment = AugmentConfig::standard();
      trials.push_back(train(m, data.train, data.test, cfg, seed));
      std::cout << "  " << activation_spec_name(act) << " seed " << seed << " peak " << fmt(trials.back().peak_test_acc)
                << "\n";
    }
    summary[activation_spec_name(act)] = summarize(activation_spec_name(act), trials);
  }
  const double secs = seconds_since(t0);
  const Summary& relu = summary["relu"];
  const Summary& pvlu = summary["pvlu"];
  const bool ok = pvlu.mean_peak >= relu.mean_peak && secs < 7200.0;
  return {ok, "mean peak relu " + fmt(relu.mean_peak) + " +- " + fmt(relu.std_err) + ", pvlu " + fmt(pvlu.mean_peak) +
                  " +- " + fmt(pvlu.std_err) + " over 3 paired seeds, " + fmt(secs, 0) + " s"};
}

Outcome finetune_noise() {
  const auto t0 = Clock::now();
  CifarSubset data = cifar_subset("c8");
  Model pretrained = Model::build(named_model("cifar6", ActivationSpec::relu(), 10), data.train.sample_shape(), 0);
  const TrialResult pre = train(pretrained, data.train, data.test, desk_config(8), 0);

  Dataset noisy_train = data.train, noisy_test = data.test;
  noisy_train.images = gaussian_filter_batch(data.train.images, 1.0);
  noisy_test.images = gaussian_filter_batch(data.test.images, 1.0);

  TrainConfig cfg = desk_config(5);
  cfg.optimizer = opt::Sgd{1e-3, 0.9};
  cfg.freeze = pvlu_and_batchnorm();
  const FinetuneResult r = finetune(pretrained, noisy_train, noisy_test, cfg, 0);
  const double red = rel_error_decrease(r.before.accuracy, r.after.accuracy);
  const double secs = seconds_since(t0);
  const bool ok = r.after.accuracy > r.before.accuracy && red > 0.0 && secs < 1800.0;
  return {ok, "clean test acc " + fmt(pre.epochs.back().test_acc) + "; filtered test acc frozen " +
                  fmt(r.before.accuracy) + " -> finetuned " + fmt(r.after.accuracy) + ", rel error decrease " +
                  fmt(100.0 * red, 2) + "%, " + fmt(secs, 0) + " s"};
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cout << "  pvlu " << args.front() << " exited " << code << ": " << err.str();
  return code;
}

Outcome determinism() {
  const fs::path dir = scratch_dir("c9");
  write_text(dir / "toy.ini",
             "[data]\nformat = fixture\nfixture = separable\nfixture_train = 160\nfixture_test = 80\n"
             "[model]\nname = tiny-cnn\nactivation = relu\n"
             "[train]\nepochs = 3\nseeds = 0, 1\n"
             "[augment]\nflip = 0.5\nshift = 2\ncutout = 3\n"
             "[compare]\nactivations = relu, pvlu, prelu\n"
             "[finetune]\nepochs = 2\n");
  const std::string cfg = (dir / "toy.ini").string();
  for (const char* run : {"a", "b"}) {
    const fs::path o = dir / run;
    if (cli({"train", "--config", cfg, "--out", (o / "train").string()}) != 0) return {false, "train failed"};
    if (cli({"compare", "--config", cfg, "--out", (o / "compare").string(), "--jobs", "2"}) != 0) {
      return {false, "compare failed"};
    }
    if (cli({"finetune", "--config", cfg, "--checkpoint", (dir / "a" / "train" / "relu-seed0.ckpt").string(), "--out",
             (o / "finetune").string()}) != 0) {
      return {false, "finetune failed"};
    }
    if (cli({"plot", (o / "compare" / "relu-seed0.csv").string(), (o / "compare" / "pvlu-seed0.csv").string(),
             (o / "compare" / "prelu-seed1.csv").string(), "--out", (o / "plot.svg").string()}) != 0) {
      return {false, "plot failed"};
    }
  }
  std::size_t files = 0, identical = 0;
  std::map<std::string, std::size_t> kinds;
  std::vector<std::string> differing;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dir / "a");
    ++files;
    ++kinds[e.path().extension().string()];
    const fs::path twin = dir / "b" / rel;
    if (fs::exists(twin) && read_text(e.path()) == read_text(twin)) {
      ++identical;
    } else {
      differing.push_back(rel.string());
    }
  }
  fs::remove_all(dir);
  std::string detail = std::to_string(identical) + "/" + std::to_string(files) + " files byte-identical (";
  for (const auto& [ext, n] : kinds) detail += std::to_string(n) + " " + ext + " ";
  detail.back() = ')';
  for (const auto& d : differing) detail += " differs: " + d;
  const bool ok = files > 0 && identical == files && kinds[".csv"] > 0 && kinds[".ckpt"] > 0 && kinds[".svg"] > 0;
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"gradient fidelity", gradient_fidelity}},
      {2, {"substitution identity", substitution_identity}},
      {3, {"dying-neuron demonstration", dying_neurons}},
      {4, {"statistics reproduction", statistics_reproduction}},
      {5, {"gaussian pipeline", gaussian_pipeline}},
      {6, {"desk-scale training smoke", training_smoke}},
      {7, {"directional deep test", directional_deep}},
      {8, {"fine-tune noise adaptation", finetune_noise}},
      {9, {"determinism", determinism}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::stoi(argv[i]));
  if (selected.empty()) {
    for (const auto& [n, _] : criteria) selected.push_back(n);
  }

  bool all = true;
  for (int n : selected) {
    auto it = criteria.find(n);
    if (it == criteria.end()) {
      std::cerr << "no criterion " << n << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << n << " (" << it->second.first << "): " << (o.passed ? "PASS" : "FAIL") << "  "
              << o.detail << std::endl;
    all &= o.passed;
  }
  return all ? 0 : 1;
}
