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

#include "pvlu/data.hpp"

namespace pvlu::fixtures {

/// Two-class [1,8,8] images: class 0 is brighter on the left half, class 1 on
/// the right half, plus pixel noise. Linearly separable.
Dataset separable(std::size_t count, std::uint64_t seed, Split split = Split::Train);

/// Ten-class [1,28,28] digit glyphs rendered from a 5x7 bitmap font with
/// random scale, offset, shear, stroke intensity and pixel noise.
Dataset digits(std::size_t count, std::uint64_t seed, Split split = Split::Train);

/// Ten-class [3,32,32] colour scenes. The class is the shape of the main
/// object (disc, ring, square, frame, triangle, plus, cross, two bar layouts,
/// diamond). Its colour, size, position and rotation are random, as is the
/// background; a thin clutter stroke and pixel noise are added.
Dataset shapes(std::size_t count, std::uint64_t seed, Split split = Split::Train);

struct FixtureFiles {
  std::filesystem::path separable_train_images, separable_train_labels;
  std::filesystem::path separable_test_images, separable_test_labels;
  std::filesystem::path digits_train_images, digits_train_labels;
  std::filesystem::path digits_test_images, digits_test_labels;
  std::filesystem::path shapes_train, shapes_test;
};

struct FixtureSizes {
  std::size_t separable_train = 200, separable_test = 200;
  std::size_t digits_train = 8000, digits_test = 2000;
  std::size_t shapes_train = 10000, shapes_test = 2000;
};

/// Writes every fixture under `dir` (IDX for the single-channel sets, CIFAR
/// binary for the colour set) and returns the paths.
FixtureFiles write_all(const std::filesystem::path& dir, const FixtureSizes& sizes, std::uint64_t seed);

}  // namespace pvlu::fixtures
