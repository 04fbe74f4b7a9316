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
#include <filesystem>
#include <string>
#include <string_view>

#include "pvlu/layers.hpp"

namespace pvlu {

/// Checkpoint layout, all integers little-endian:
///
///   "PVLU"  u32 version  u32 rank  u32 dims[rank]          model input shape
///   u32 layer_count  layer records                        architecture table
///   u32 param_count  { u8 role  u8 trainable  u32 rank  u32 dims[rank]
///                      f32 values[] }                     registry order
///   u32 buffer_count { u32 length  f32 values[] }         batchnorm running
///                                                         mean, var per layer
///
/// A layer record is u8 kind, u8 trainable, then the kind's fields:
///   0 conv      u32 filters, u32 kernel, u32 stride, u8 padding (0 same, 1 valid)
///   1 dense     u32 units
///   2 maxpool   u32 window, u32 stride
///   3 dropout   f64 rate
///   4 batchnorm -
///   5 activation u8 tag, f64 p0, f64 p1
///   6 flatten   -
///   7 softmax   -
///   8 residual  u8 projection, u32 inner_count, inner records
///
/// Parameter values are stored as 32-bit floats, so a loaded model holds
/// the float-rounded weights; save(load(x)) reproduces x byte for byte.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace pvlu
