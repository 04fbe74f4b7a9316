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

#include "pvlu/cli.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "pvlu/activations.hpp"
#include "pvlu/checkpoint.hpp"
#include "pvlu/config.hpp"
#include "pvlu/errors.hpp"
#include "pvlu/fixtures.hpp"
#include "pvlu/gradcheck.hpp"
#include "pvlu/metrics_io.hpp"

namespace pvlu::cli {

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> jobs;
  std::string out;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_jobs = true) {
  cmd->add_option("--config", f.config, "experiment configuration file")->required();
  cmd->add_option("--seed", f.seed, "run a single seed instead of the configured list");
  cmd->add_option("--epochs", f.epochs, "override the epoch count");
  if (with_jobs) cmd->add_option("--jobs", f.jobs, "maximum concurrent trials")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "output directory (overrides [output] dir)");
  cmd->add_flag("-v,--verbose", f.verbose, "print per-epoch progress to stderr");
}

ExperimentConfig configure(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f.config);
  if (f.seed) {
    cfg.train.seeds = {*f.seed};
    cfg.finetune.seeds = {*f.seed};
  }
  if (f.epochs) {
    cfg.train.epochs = *f.epochs;
    cfg.finetune.epochs = *f.epochs;
  }
  if (f.jobs) cfg.jobs = *f.jobs;
  if (!f.out.empty()) cfg.out_dir = f.out;
  cfg.train.verbose = cfg.finetune.verbose = f.verbose;
  validate_inputs(cfg);
  return cfg;
}

// Loads data and finishes the parts of the config that depend on it.
DataSplits prepare(ExperimentConfig& cfg) {
  DataSplits data = load_data(cfg.data);
  auto& aug = cfg.train.augment;
  aug.cutout_fill = data.train.pixel_mean();
  const Shape sample = data.train.sample_shape();
  if (cfg.default_augment && (sample.size() != 3 || std::min(sample[1], sample[2]) <= 2 * aug.max_shift)) {
    aug = AugmentConfig{};
  }
  if (!aug.is_identity()) {
    if (sample.size() != 3) throw ConfigError("[augment] needs image data");
    try {
      aug.validate(sample[1], sample[2]);
    } catch (const ContractError& e) {
      throw ConfigError(std::string("[augment] ") + e.what());
    }
  }
  return data;
}

// Relative error decrease, or "undefined" when the baseline makes no errors.
std::string red_text(double before, double after) {
  return before < 1.0 ? format_number(rel_error_decrease(before, after)) : "undefined";
}

std::string label_of(const ActivationSpec& a) { return activation_spec_name(a); }

std::string trial_stem(const std::string& label, std::uint64_t seed) {
  return label + "-seed" + std::to_string(seed);
}

struct TrainedTrials {
  std::vector<TrialResult> results;
  std::vector<Model> models;
};

TrainedTrials run_activation(const ExperimentConfig& cfg, const DataSplits& data, const ActivationSpec& act) {
  const auto specs = model_specs(cfg.model, act, data.train.classes);
  // Build once up front so shape errors surface before any training.
  Model::build(specs, data.train.sample_shape(), 0);
  TrainedTrials out;
  out.models.resize(cfg.train.seeds.size());
  std::map<std::uint64_t, std::size_t> slot;
  for (std::size_t i = 0; i < cfg.train.seeds.size(); ++i) slot[cfg.train.seeds[i]] = i;
  TrainConfig tc = cfg.train;
  tc.activation = act;
  out.results = run_trials(cfg.train.seeds, cfg.jobs, [&](std::uint64_t seed) {
    Model model = Model::build(specs, data.train.sample_shape(), seed);
    TrialResult r = train(model, data.train, data.test, tc, seed);
    out.models[slot.at(seed)] = std::move(model);
    return r;
  });
  return out;
}

void print_summary_table(std::ostream& out, const std::vector<Summary>& rows) {
  out << std::left << std::setw(12) << "activation" << std::setw(12) << "mean_peak" << std::setw(12) << "std_err"
      << "n\n";
  for (const auto& s : rows) {
    out << std::left << std::setw(12) << s.activation << std::setw(12) << format_number(s.mean_peak)
        << std::setw(12) << format_number(s.std_err) << s.n << "\n";
  }
}

int cmd_train(const CommonFlags& f, std::ostream& out) {
  ExperimentConfig cfg = configure(f);
  if (cfg.train.epochs == 0) throw ConfigError("epochs must be >= 1");
  DataSplits data = prepare(cfg);
  const std::string label = label_of(cfg.model.activation);
  TrainedTrials trials = run_activation(cfg, data, cfg.model.activation);

  fs::create_directories(cfg.out_dir);
  for (std::size_t i = 0; i < trials.results.size(); ++i) {
    const auto& r = trials.results[i];
    const std::string stem = trial_stem(label, r.seed);
    write_text(cfg.out_dir / (stem + ".csv"), trial_csv(r.epochs));
    save_checkpoint(trials.models[i], cfg.out_dir / (stem + ".ckpt"));
    out << stem << ": peak test accuracy " << format_number(r.peak_test_acc) << "\n";
  }
  const Summary s = summarize(label, trials.results);
  write_text(cfg.out_dir / "summary.csv", summary_csv({s}));
  print_summary_table(out, {s});
  return kSuccess;
}

int cmd_compare(const CommonFlags& f, std::ostream& out) {
  ExperimentConfig cfg = configure(f);
  if (cfg.train.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (cfg.compare.size() < 2) throw ConfigError("[compare] activations needs at least two entries");
  std::set<std::string> labels;
  for (const auto& a : cfg.compare) {
    if (!labels.insert(label_of(a)).second) throw ConfigError("[compare] activation listed twice: " + label_of(a));
  }
  DataSplits data = prepare(cfg);

  std::vector<std::vector<TrialResult>> all;
  std::vector<Summary> summaries;
  for (const auto& a : cfg.compare) {
    all.push_back(run_activation(cfg, data, a).results);
    summaries.push_back(summarize(label_of(a), all.back()));
  }

  fs::create_directories(cfg.out_dir);
  for (std::size_t k = 0; k < cfg.compare.size(); ++k) {
    for (const auto& r : all[k]) {
      write_text(cfg.out_dir / (trial_stem(label_of(cfg.compare[k]), r.seed) + ".csv"), trial_csv(r.epochs));
    }
  }
  write_text(cfg.out_dir / "summary.csv", summary_csv(summaries));

  // Per-seed peaks, then mean / standard error / best rows and the relative
  // error decrease of each activation's best peak against the first one's.
  std::ostringstream table;
  table << "seed";
  for (const auto& s : summaries) table << "," << s.activation;
  table << "\n";
  for (std::size_t i = 0; i < cfg.train.seeds.size(); ++i) {
    table << cfg.train.seeds[i];
    for (const auto& trials : all) table << "," << format_number(trials[i].peak_test_acc);
    table << "\n";
  }
  table << "mean";
  for (const auto& s : summaries) table << "," << format_number(s.mean_peak);
  table << "\nstd_err";
  for (const auto& s : summaries) table << "," << format_number(s.std_err);
  std::vector<double> best;
  for (const auto& trials : all) {
    double b = 0.0;
    for (const auto& r : trials) b = std::max(b, r.peak_test_acc);
    best.push_back(b);
  }
  table << "\nbest";
  for (double b : best) table << "," << format_number(b);
  table << "\nrel_error_decrease";
  for (std::size_t k = 0; k < summaries.size(); ++k) {
    table << "," << (k == 0 ? "" : red_text(best[0], best[k]));
  }
  table << "\n";
  write_text(cfg.out_dir / "comparison.csv", table.str());
  out << table.str();
  return kSuccess;
}

int cmd_finetune(const CommonFlags& f, const std::string& checkpoint, std::ostream& out) {
  ExperimentConfig cfg = configure(f);
  if (!fs::is_regular_file(checkpoint)) throw ConfigError("no such checkpoint " + checkpoint);
  Model pretrained = load_checkpoint(checkpoint);
  if (count_activation_layers(pretrained, ActivationTag::Relu) == 0) {
    throw ConfigError("checkpoint " + checkpoint + " has no ReLU activations to replace");
  }
  DataSplits data = prepare(cfg);
  TrainConfig tc = cfg.finetune;
  tc.augment = cfg.train.augment;
  const std::uint64_t seed = cfg.train.seeds.front();
  FinetuneResult r = finetune(pretrained, data.train, data.test, tc, seed);

  std::vector<EpochMetrics> rows{r.initial};
  rows.insert(rows.end(), r.trial.epochs.begin(), r.trial.epochs.end());
  fs::create_directories(cfg.out_dir);
  const std::string stem = "finetune-seed" + std::to_string(seed);
  write_text(cfg.out_dir / (stem + ".csv"), trial_csv(rows));
  save_checkpoint(r.model, cfg.out_dir / "finetuned.ckpt");

  std::ostringstream report;
  report << "test data: " << (cfg.data.gaussian_sigma > 0 ? "gaussian filtered, sigma " + format_number(cfg.data.gaussian_sigma) : "unfiltered")
         << "\n";
  report << "trainable: " << tc.epochs << " epochs, optimizer " << to_string(tc.optimizer) << "\n";
  report << "before_accuracy " << format_number(r.before.accuracy) << "\n";
  report << "epoch0_accuracy " << format_number(r.initial.test_acc) << "\n";
  report << "after_accuracy " << format_number(r.after.accuracy) << "\n";
  report << "peak_accuracy " << format_number(r.trial.peak_test_acc) << "\n";
  report << "rel_error_decrease " << red_text(r.before.accuracy, r.after.accuracy) << "\n";
  write_text(cfg.out_dir / (stem + ".txt"), report.str());
  out << report.str();
  return kSuccess;
}

int cmd_gradcheck(std::size_t points, std::uint64_t seed, const std::string& fault, std::ostream& out,
                  std::ostream& err) {
  if (fault == "pvlu-dz") {
    set_fault_injection(FaultInjection::PvluDz);
  } else if (!fault.empty()) {
    throw ConfigError("unknown fault '" + fault + "'");
  }
  GradcheckOptions o;
  o.points = points;
  o.seed = seed;
  GradcheckReport report;
  try {
    report = run_gradcheck(o);
  } catch (...) {
    set_fault_injection(FaultInjection::None);
    throw;
  }
  set_fault_injection(FaultInjection::None);
  print_report(report, out);
  if (report.passed()) return kSuccess;
  err << "gradcheck failed:";
  for (const auto& name : report.failing()) err << " " << name;
  err << "\n";
  return kVerificationFailed;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& svg, const std::string& title,
             std::ostream& out) {
  std::vector<PlotSeries> series;
  for (const auto& path : csvs) series.push_back({fs::path(path).stem().string(), read_trial_csv(path)});
  write_text(svg, accuracy_svg(series, title));
  out << "wrote " << svg << " (" << series.size() << " series)\n";
  return kSuccess;
}

int cmd_fixtures(const std::string& dir, std::uint64_t seed, bool small, std::ostream& out) {
  fixtures::FixtureSizes sizes;
  if (small) sizes = {40, 40, 100, 50, 60, 30};
  const auto files = fixtures::write_all(dir, sizes, seed);
  for (const auto& p : {files.separable_train_images, files.separable_train_labels, files.separable_test_images,
                        files.separable_test_labels, files.digits_train_images, files.digits_train_labels,
                        files.digits_test_images, files.digits_test_labels, files.shapes_train, files.shapes_test}) {
    out << p.string() << "\n";
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PVLU activation experiments", "pvlu"};
  app.require_subcommand(1);

  CommonFlags train_flags, compare_flags, finetune_flags;
  add_common(app.add_subcommand("train", "train one model per seed"), train_flags);
  add_common(app.add_subcommand("compare", "paired-seed comparison of activations"), compare_flags);
  auto* finetune = app.add_subcommand("finetune", "replace ReLU with PVLU in a checkpoint and fine-tune");
  add_common(finetune, finetune_flags, false);
  std::string checkpoint;
  finetune->add_option("--checkpoint", checkpoint, "pretrained checkpoint")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::size_t points = 1000;
  std::uint64_t gc_seed = 0;
  std::string fault;
  gradcheck->add_option("--points", points, "minimum samples per case")->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", gc_seed, "sampling seed");
  gradcheck->add_option("--inject-fault", fault)->group("");

  auto* plot = app.add_subcommand("plot", "plot test accuracy curves from trial CSVs");
  std::vector<std::string> csvs;
  std::string svg, title = "Test accuracy vs. epochs trained";
  plot->add_option("csv", csvs, "trial CSV files")->required();
  plot->add_option("--out", svg, "output SVG path")->required();
  plot->add_option("--title", title, "plot title");

  auto* fix = app.add_subcommand("fixtures", "write synthetic IDX and CIFAR-binary datasets");
  std::string fix_dir;
  std::uint64_t fix_seed = 0;
  bool small = false;
  fix->add_option("--out", fix_dir, "output directory")->required();
  fix->add_option("--seed", fix_seed, "generator seed");
  fix->add_flag("--small", small, "a few dozen samples per split");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    if (app.got_subcommand("train")) return cmd_train(train_flags, out);
    if (app.got_subcommand("compare")) return cmd_compare(compare_flags, out);
    if (app.got_subcommand("finetune")) return cmd_finetune(finetune_flags, checkpoint, out);
    if (app.got_subcommand("gradcheck")) return cmd_gradcheck(points, gc_seed, fault, out, err);
    if (app.got_subcommand("plot")) return cmd_plot(csvs, svg, title, out);
    if (app.got_subcommand("fixtures")) return cmd_fixtures(fix_dir, fix_seed, small, out);
  } catch (const NumericError& e) {
    err << "numeric abort: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace pvlu::cli
