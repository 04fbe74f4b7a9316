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
#include <filesystem>
#include <string>
#include <vector>

#include "pvlu/data.hpp"
#include "pvlu/harness.hpp"
#include "pvlu/layers.hpp"

namespace pvlu {

/// Where the data comes from.
///   format = idx      train_images, train_labels, test_images, test_labels
///   format = cifar    train, test (CIFAR binary records)
///   format = fixture  fixture = separable | digits | shapes, generated in memory
struct DataConfig {
  std::string format = "fixture";
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::filesystem::path train, test;
  std::string fixture = "separable";
  std::size_t fixture_train = 200;
  std::size_t fixture_test = 200;
  std::uint64_t fixture_seed = 0;
  /// 0 infers the class count (IDX) or uses 10 (CIFAR).
  std::size_t classes = 0;
  /// 0 keeps every sample.
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  /// Gaussian filter applied to both splits at load time; 0 disables it.
  double gaussian_sigma = 0.0;
};

struct ModelConfig {
  /// A built-in name, or empty when `layers` is given.
  std::string name = "tiny-cnn";
  std::string layers;
  std::size_t width = 0;
  ActivationSpec activation = ActivationSpec::relu();
};

struct ExperimentConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  /// Fine-tuning defaults: SGD(1e-3, 0.9), PVLU + batchnorm trainable.
  TrainConfig finetune;
  std::vector<ActivationSpec> compare;
  std::size_t jobs = 1;
  std::filesystem::path out_dir = "out";
  /// True when the text has no [augment] section. The standard recipe then
  /// applies to images large enough for it and nothing applies otherwise.
  bool default_augment = false;
};

/// INI-style text:
///
///   [data]      format fixture fixture_train fixture_test fixture_seed
///               train_images train_labels test_images test_labels train test
///               classes train_limit test_limit gaussian_sigma
///   [model]     name layers width activation
///   [train]     epochs batch_size optimizer seeds freeze substitute_at
///               probe_size eval_batch jobs
///   [augment]   flip shift cutout
///   [compare]   activations
///   [finetune]  epochs batch_size optimizer freeze
///   [output]    dir
///
/// Seeds and activations are comma separated. Relative paths resolve against
/// `base_dir`. Unknown sections or keys throw ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError naming the first referenced input file that is missing.
void validate_inputs(const ExperimentConfig& cfg);

struct DataSplits {
  Dataset train;
  Dataset test;
};

/// Loads (or generates) both splits, applies limits and the load-time filter.
DataSplits load_data(const DataConfig& cfg);

/// Layer list for `cfg` with `activation` in every activation slot.
std::vector<LayerSpec> model_specs(const ModelConfig& cfg, const ActivationSpec& activation, std::size_t classes);

}  // namespace pvlu
