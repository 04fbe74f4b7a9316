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

#include "pvlu/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pvlu/errors.hpp"
#include "pvlu/fixtures.hpp"
#include "pvlu/model_zoo.hpp"

namespace pvlu {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"data",
       {"format", "fixture", "fixture_train", "fixture_test", "fixture_seed", "train_images", "train_labels",
        "test_images", "test_labels", "train", "test", "classes", "train_limit", "test_limit", "gaussian_sigma"}},
      {"model", {"name", "layers", "width", "activation"}},
      {"train",
       {"epochs", "batch_size", "optimizer", "seeds", "freeze", "substitute_at", "probe_size", "eval_batch", "jobs"}},
      {"augment", {"flip", "shift", "cutout"}},
      {"compare", {"activations"}},
      {"finetune", {"epochs", "batch_size", "optimizer", "freeze"}},
      {"output", {"dir"}},
  };
  return keys;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string text(const std::string& key) const { return trim(tree_->get<std::string>(key)); }

  std::uint64_t count(const std::string& key, bool allow_zero = false) const {
    const std::string v = text(key);
    try {
      std::size_t used = 0;
      if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
      const auto n = std::stoull(v, &used);
      if (used != v.size() || (!allow_zero && n == 0)) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": expected a " + (allow_zero ? "non-negative" : "positive") +
                        " integer, got '" + v + "'");
    }
  }

  double real(const std::string& key) const {
    const std::string v = text(key);
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": expected a number, got '" + v + "'");
    }
  }

  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

 private:
  std::string name_;
  const pt::ptree* tree_;
};

// Re-throws errors from value parsers with the offending key attached.
template <typename F>
auto keyed(const Section& s, const std::string& key, F&& parse) {
  try {
    return parse(s.text(key));
  } catch (const ConfigError& e) {
    throw ConfigError(s.where(key) + ": " + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(s.where(key) + ": " + e.what());
  }
}

void read_train_common(const Section& s, TrainConfig& t) {
  if (s.has("epochs")) t.epochs = s.count("epochs", true);
  if (s.has("batch_size")) t.batch_size = s.count("batch_size");
  if (s.has("optimizer")) t.optimizer = keyed(s, "optimizer", parse_optimizer);
  if (s.has("freeze")) t.freeze = keyed(s, "freeze", parse_policy);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void require_file(const std::filesystem::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError("[data] " + what + " is not set");
  if (!std::filesystem::is_regular_file(p)) throw ConfigError("[data] " + what + ": no such file " + p.string());
}

Dataset limit(Dataset d, std::size_t n) { return n ? d.head(n) : d; }

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) {
      if (body.empty()) throw ConfigError("config: key '" + section + "' outside any section");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
    }
  }
  auto section = [&](const std::string& name) {
    const auto child = tree.find(name);
    return Section(name, child == tree.not_found() ? nullptr : &child->second);
  };

  ExperimentConfig cfg;
  cfg.finetune.optimizer = opt::Sgd{1e-3, 0.9};
  cfg.finetune.freeze = pvlu_and_batchnorm();

  const Section data = section("data");
  if (data.has("format")) cfg.data.format = data.text("format");
  if (cfg.data.format != "idx" && cfg.data.format != "cifar" && cfg.data.format != "fixture") {
    throw ConfigError("[data] format must be idx, cifar or fixture, got '" + cfg.data.format + "'");
  }
  for (auto [key, field] : {std::pair{"train_images", &cfg.data.train_images},
                            std::pair{"train_labels", &cfg.data.train_labels},
                            std::pair{"test_images", &cfg.data.test_images},
                            std::pair{"test_labels", &cfg.data.test_labels}, std::pair{"train", &cfg.data.train},
                            std::pair{"test", &cfg.data.test}}) {
    if (data.has(key)) *field = resolve(base_dir, data.text(key));
  }
  if (data.has("fixture")) cfg.data.fixture = data.text("fixture");
  if (cfg.data.fixture != "separable" && cfg.data.fixture != "digits" && cfg.data.fixture != "shapes") {
    throw ConfigError("[data] fixture must be separable, digits or shapes");
  }
  if (data.has("fixture_train")) cfg.data.fixture_train = data.count("fixture_train");
  if (data.has("fixture_test")) cfg.data.fixture_test = data.count("fixture_test");
  if (data.has("fixture_seed")) cfg.data.fixture_seed = data.count("fixture_seed", true);
  if (data.has("classes")) cfg.data.classes = data.count("classes");
  if (data.has("train_limit")) cfg.data.train_limit = data.count("train_limit", true);
  if (data.has("test_limit")) cfg.data.test_limit = data.count("test_limit", true);
  if (data.has("gaussian_sigma")) {
    cfg.data.gaussian_sigma = data.real("gaussian_sigma");
    if (cfg.data.gaussian_sigma < 0) throw ConfigError("[data] gaussian_sigma must be >= 0");
  }

  const Section model = section("model");
  if (model.has("name")) cfg.model.name = model.text("name");
  if (model.has("layers")) {
    cfg.model.layers = model.text("layers");
    if (!model.has("name")) cfg.model.name.clear();
  }
  if (!cfg.model.name.empty() && !cfg.model.layers.empty()) {
    throw ConfigError("[model] name and layers are mutually exclusive");
  }
  if (!cfg.model.name.empty() && !is_named_model(cfg.model.name)) {
    throw ConfigError("[model] unknown model '" + cfg.model.name + "'");
  }
  if (model.has("width")) cfg.model.width = model.count("width");
  if (model.has("activation")) cfg.model.activation = keyed(model, "activation", parse_activation);
  if (!cfg.model.layers.empty()) parse_layers(cfg.model.layers, cfg.model.activation);

  const Section train = section("train");
  read_train_common(train, cfg.train);
  if (train.has("seeds")) {
    cfg.train.seeds.clear();
    for (const auto& s : split_list(train.text("seeds"))) {
      try {
        std::size_t used = 0;
        if (s[0] == '-') throw std::invalid_argument(s);
        cfg.train.seeds.push_back(std::stoull(s, &used));
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw ConfigError("[train] seeds: bad seed '" + s + "'");
      }
    }
  }
  if (train.has("substitute_at")) {
    if (train.text("substitute_at") == "never") {
      cfg.train.substitute_at.reset();
    } else {
      cfg.train.substitute_at = train.count("substitute_at", true);
    }
  }
  if (train.has("probe_size")) cfg.train.probe_size = train.count("probe_size");
  if (train.has("eval_batch")) cfg.train.eval_batch = train.count("eval_batch");
  if (train.has("jobs")) cfg.jobs = train.count("jobs");
  cfg.train.activation = cfg.model.activation;
  try {
    cfg.train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("[train] ") + e.what());
  }

  const Section augment = section("augment");
  if (tree.find("augment") == tree.not_found()) {
    cfg.train.augment = AugmentConfig::standard();
    cfg.default_augment = true;
  }
  if (augment.has("flip")) cfg.train.augment.flip_probability = augment.real("flip");
  if (augment.has("shift")) cfg.train.augment.max_shift = augment.count("shift", true);
  if (augment.has("cutout")) cfg.train.augment.cutout = augment.count("cutout", true);
  if (cfg.train.augment.flip_probability < 0 || cfg.train.augment.flip_probability > 1) {
    throw ConfigError("[augment] flip must lie in [0,1]");
  }

  const Section compare = section("compare");
  if (compare.has("activations")) {
    for (const auto& a : split_list(compare.text("activations"))) {
      try {
        cfg.compare.push_back(parse_activation(a));
      } catch (const std::exception& e) {
        throw ConfigError("[compare] activations: " + std::string(e.what()));
      }
    }
  }

  const Section finetune = section("finetune");
  read_train_common(finetune, cfg.finetune);
  cfg.finetune.seeds = cfg.train.seeds;
  cfg.finetune.probe_size = cfg.train.probe_size;
  cfg.finetune.eval_batch = cfg.train.eval_batch;
  if (!finetune.has("batch_size")) cfg.finetune.batch_size = cfg.train.batch_size;
  if (!finetune.has("epochs")) cfg.finetune.epochs = cfg.train.epochs;

  const Section output = section("output");
  if (output.has("dir")) cfg.out_dir = resolve(base_dir, output.text("dir"));
  else cfg.out_dir = resolve(base_dir, "out");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

void validate_inputs(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  if (d.format == "idx") {
    require_file(d.train_images, "train_images");
    require_file(d.train_labels, "train_labels");
    require_file(d.test_images, "test_images");
    require_file(d.test_labels, "test_labels");
  } else if (d.format == "cifar") {
    require_file(d.train, "train");
    require_file(d.test, "test");
  }
}

DataSplits load_data(const DataConfig& cfg) {
  DataSplits out;
  if (cfg.format == "idx") {
    out.train = load_idx(cfg.train_images, cfg.train_labels, Split::Train, cfg.classes);
    out.test = load_idx(cfg.test_images, cfg.test_labels, Split::Test, cfg.classes ? cfg.classes : out.train.classes);
    if (out.test.classes != out.train.classes) {
      throw ConfigError("[data] train and test splits disagree on the class count");
    }
  } else if (cfg.format == "cifar") {
    const std::size_t classes = cfg.classes ? cfg.classes : 10;
    out.train = load_cifar(cfg.train, Split::Train, classes, cfg.train_limit);
    out.test = load_cifar(cfg.test, Split::Test, classes, cfg.test_limit);
  } else {
    auto make = [&](std::size_t n, Split split) {
      if (cfg.fixture == "digits") return fixtures::digits(n, cfg.fixture_seed, split);
      if (cfg.fixture == "shapes") return fixtures::shapes(n, cfg.fixture_seed, split);
      return fixtures::separable(n, cfg.fixture_seed, split);
    };
    out.train = make(cfg.fixture_train, Split::Train);
    out.test = make(cfg.fixture_test, Split::Test);
  }
  out.train = limit(std::move(out.train), cfg.train_limit);
  out.test = limit(std::move(out.test), cfg.test_limit);
  if (cfg.gaussian_sigma > 0.0) {
    out.train.images = gaussian_filter_batch(out.train.images, cfg.gaussian_sigma);
    out.test.images = gaussian_filter_batch(out.test.images, cfg.gaussian_sigma);
  }
  return out;
}

std::vector<LayerSpec> model_specs(const ModelConfig& cfg, const ActivationSpec& activation, std::size_t classes) {
  if (!cfg.layers.empty()) return parse_layers(cfg.layers, activation);
  return named_model(cfg.name, activation, classes, cfg.width);
}

}  // namespace pvlu
