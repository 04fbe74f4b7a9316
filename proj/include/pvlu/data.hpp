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
#include <random>
#include <span>
#include <vector>

#include "pvlu/tensor.hpp"

namespace pvlu {

enum class Split { Train, Test };

/// Images [N,C,H,W] with pixels in [0,1] and integer labels in [0, classes).
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  Split split = Split::Train;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  /// Per-sample shape [C,H,W].
  Shape sample_shape() const;
  /// Mean over all pixels.
  double pixel_mean() const;

  Tensor gather_images(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
  /// First `count` samples (all if count >= size()).
  Dataset head(std::size_t count) const;

  /// Throws ContractError unless labels/images agree and every label < classes.
  void validate() const;
};

/// Reads an IDX image file (magic 0x00000803, u8 pixels) and label file
/// (magic 0x00000801). Pixels are scaled by 1/255. `classes` = 0 infers
/// max(label) + 1. Errors are FormatError with the failing byte offset.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 Split split = Split::Train, std::size_t classes = 0);

/// Writes single-channel images as IDX (pixels rounded to the nearest byte).
void write_idx(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels);

/// CIFAR binary records: 1 label byte followed by 3072 pixel bytes
/// (1024 red, 1024 green, 1024 blue; each plane row-major 32x32).
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;

Dataset load_cifar(const std::filesystem::path& path, Split split = Split::Train, std::size_t classes = 10,
                   std::size_t limit = 0);
void write_cifar(const Dataset& data, const std::filesystem::path& path);

/// Samples G(x,y) = exp(-(x^2 + y^2) / sigma^2) / (2 pi sigma^2) at integer
/// offsets, k = 2 ceil(3 sigma) + 1. With `normalize` the k x k kernel is
/// rescaled to sum to 1.
Tensor gaussian_kernel(double sigma, bool normalize = true);

/// Blurs each channel of [C,H,W] with gaussian_kernel(sigma), reflecting
/// at the borders (the edge pixel is repeated: d c b a | a b c d).
/// Runs as two 1-D passes; the kernel is separable.
Tensor gaussian_filter(const Tensor& image, double sigma);

/// Applies gaussian_filter to every image of a [N,C,H,W] batch.
Tensor gaussian_filter_batch(const Tensor& batch, double sigma);

/// Sets one size x size square of every channel to `fill`. The square lies
/// inside the image; its top-left corner is uniform over valid positions.
Tensor cutout(const Tensor& image, std::size_t size, double fill, std::mt19937_64& rng);

/// Mirrors every row of [C,H,W].
Tensor flip_horizontal(const Tensor& image);

/// Translates [C,H,W] by (dy, dx) pixels; vacated pixels become 0.
Tensor shift_image(const Tensor& image, long dy, long dx);

struct AugmentConfig {
  double flip_probability = 0.0;
  std::size_t max_shift = 0;
  /// Cutout square size; 0 disables cutout.
  std::size_t cutout = 0;
  /// Value cutout writes, conventionally the training-set pixel mean.
  double cutout_fill = 0.0;
  /// Gaussian filter sigma; 0 disables the filter.
  double gaussian_sigma = 0.0;

  /// Flip with p=0.5 and shift by up to 4 pixels.
  static AugmentConfig standard() {
    AugmentConfig a;
    a.flip_probability = 0.5;
    a.max_shift = 4;
    return a;
  }

  bool is_identity() const {
    return flip_probability == 0.0 && max_shift == 0 && cutout == 0 && gaussian_sigma == 0.0;
  }
  /// Throws ContractError for probabilities outside [0,1] or sizes that do
  /// not fit an h x w image.
  void validate(std::size_t h, std::size_t w) const;
};

/// Per-image independent gaussian filter, flip, shift (zero padded) and
/// cutout, in that order. Each image draws from its own stream derived from
/// one seed taken from `rng`.
Tensor augment_batch(const Tensor& batch, const AugmentConfig& cfg, std::mt19937_64& rng);

}  // namespace pvlu
