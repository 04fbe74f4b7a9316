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
#include <string>
#include <vector>

#include "pvlu/layers.hpp"

namespace pvlu {

/// Built-in architectures. `width` scales channel counts (0 = default).
///
///   tiny-cnn     2 conv + dense; small enough for whole-model gradient checks
///   mlp          flatten, dense(64), dense(classes)
///   mnist-cnn    2 conv/pool stages, dense(64), dense(classes)
///   cifar6       3 stages of [conv, bn, act] x2 + pool + dropout, then dense
///                head; six convolutions each followed by its activation
///   resnet-mini  stem conv + two residual blocks (second one downsamples)
///
/// Every `act` slot uses `activation`.
std::vector<LayerSpec> named_model(const std::string& name, const ActivationSpec& activation,
                                   std::size_t classes, std::size_t width = 0);

bool is_named_model(const std::string& name);

/// Inline layer list, comma separated:
///   conv:F[:k[:stride[:same|valid]]]  dense:U  pool[:w[:s]]  dropout:r  bn
///   flatten  softmax  act  <activation name, e.g. relu or pvlu:0.5:1>
///   res(<layers>)  resproj(<layers>)
/// `act` expands to `activation`.
std::vector<LayerSpec> parse_layers(const std::string& text, const ActivationSpec& activation);

}  // namespace pvlu
