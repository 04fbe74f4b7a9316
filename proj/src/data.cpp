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

#include "pvlu/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "pvlu/errors.hpp"

namespace pvlu {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::uint32_t read_be32(const std::string& bytes, std::size_t offset, const std::string& what) {
  if (bytes.size() < offset + 4) throw FormatError(what + ": truncated header", bytes.size());
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<std::uint8_t>(bytes[offset + i]);
  return v;
}

void append_be32(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Half-sample symmetric reflection into [0, n).
std::size_t reflect(long i, std::size_t n) {
  const long period = 2 * static_cast<long>(n);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - 1 - m);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void require_image(const Tensor& image, const char* what) {
  if (image.rank() != 3) throw ShapeError(std::string(what) + " expects [C,H,W], got " + to_string(image.shape()));
}

}  // namespace

Shape Dataset::sample_shape() const {
  const auto& s = images.shape();
  return Shape(s.begin() + 1, s.end());
}

double Dataset::pixel_mean() const { return sum(images) / static_cast<double>(images.size()); }

Tensor Dataset::gather_images(std::span<const std::size_t> indices) const {
  Shape shape = images.shape();
  const std::size_t stride = images.size() / shape[0];
  shape[0] = indices.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(images.data().begin() + static_cast<std::ptrdiff_t>(indices[i] * stride), stride,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::head(std::size_t count) const {
  if (count >= size()) return *this;
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  return Dataset{gather_images(idx), gather_labels(idx), split, classes};
}

void Dataset::validate() const {
  if (images.rank() != 4) throw ContractError("dataset images must be [N,C,H,W]");
  if (images.extent(0) != labels.size()) {
    throw ContractError("dataset has " + std::to_string(images.extent(0)) + " images but " +
                        std::to_string(labels.size()) + " labels");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw ContractError("label " + std::to_string(l) + " outside [0," + std::to_string(classes) + ")");
    }
  }
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path, Split split,
                 std::size_t classes) {
  const std::string img = read_file(images_path);
  const std::string lab = read_file(labels_path);

  if (read_be32(img, 0, "idx images") != kIdxImageMagic) {
    throw FormatError("idx images: bad magic in " + images_path.string(), 0);
  }
  const std::uint32_t n = read_be32(img, 4, "idx images");
  const std::uint32_t rows = read_be32(img, 8, "idx images");
  const std::uint32_t cols = read_be32(img, 12, "idx images");
  if (n == 0 || rows == 0 || cols == 0) throw FormatError("idx images: zero extent in header", 4);
  const std::size_t pixels = static_cast<std::size_t>(n) * rows * cols;
  if (img.size() != 16 + pixels) {
    throw FormatError("idx images: expected " + std::to_string(16 + pixels) + " bytes, file has " +
                          std::to_string(img.size()),
                      std::min<std::size_t>(img.size(), 16 + pixels));
  }

  if (read_be32(lab, 0, "idx labels") != kIdxLabelMagic) {
    throw FormatError("idx labels: bad magic in " + labels_path.string(), 0);
  }
  const std::uint32_t label_count = read_be32(lab, 4, "idx labels");
  if (label_count != n) {
    throw FormatError("idx labels: " + std::to_string(label_count) + " labels for " + std::to_string(n) + " images",
                      4);
  }
  if (lab.size() != 8 + static_cast<std::size_t>(n)) {
    throw FormatError("idx labels: expected " + std::to_string(8 + n) + " bytes, file has " +
                          std::to_string(lab.size()),
                      std::min<std::size_t>(lab.size(), 8 + n));
  }

  Dataset ds;
  ds.split = split;
  ds.images = Tensor(Shape{n, 1, rows, cols});
  for (std::size_t i = 0; i < pixels; ++i) ds.images[i] = static_cast<std::uint8_t>(img[16 + i]) / 255.0;
  ds.labels.resize(n);
  int top = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = static_cast<std::uint8_t>(lab[8 + i]);
    top = std::max(top, ds.labels[i]);
  }
  ds.classes = classes ? classes : static_cast<std::size_t>(top) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<std::size_t>(ds.labels[i]) >= ds.classes) {
      throw FormatError("idx labels: label " + std::to_string(ds.labels[i]) + " >= class count", 8 + i);
    }
  }
  return ds;
}

void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  data.validate();
  if (data.images.extent(1) != 1) throw ContractError("idx output needs single-channel images");
  const auto n = static_cast<std::uint32_t>(data.size());
  std::string img;
  img.reserve(16 + data.images.size());
  append_be32(img, kIdxImageMagic);
  append_be32(img, n);
  append_be32(img, static_cast<std::uint32_t>(data.images.extent(2)));
  append_be32(img, static_cast<std::uint32_t>(data.images.extent(3)));
  for (double v : data.images.data()) img.push_back(static_cast<char>(to_byte(v)));

  std::string lab;
  append_be32(lab, kIdxLabelMagic);
  append_be32(lab, n);
  for (int l : data.labels) lab.push_back(static_cast<char>(static_cast<std::uint8_t>(l)));

  write_file(images_path, img);
  write_file(labels_path, lab);
}

Dataset load_cifar(const std::filesystem::path& path, Split split, std::size_t classes, std::size_t limit) {
  const std::string bytes = read_file(path);
  if (bytes.empty()) throw FormatError("cifar: empty file " + path.string(), 0);
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError("cifar: file size is not a multiple of " + std::to_string(kCifarRecordBytes),
                      bytes.size() - bytes.size() % kCifarRecordBytes);
  }
  std::size_t n = bytes.size() / kCifarRecordBytes;
  if (limit) n = std::min(n, limit);
  Dataset ds;
  ds.split = split;
  ds.classes = classes;
  ds.images = Tensor(Shape{n, 3, 32, 32});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * kCifarRecordBytes;
    const auto label = static_cast<std::uint8_t>(bytes[base]);
    if (label >= classes) throw FormatError("cifar: label " + std::to_string(label) + " >= class count", base);
    ds.labels[i] = label;
    for (std::size_t p = 0; p < kCifarRecordBytes - 1; ++p) {
      ds.images[i * (kCifarRecordBytes - 1) + p] = static_cast<std::uint8_t>(bytes[base + 1 + p]) / 255.0;
    }
  }
  return ds;
}

void write_cifar(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  if (data.sample_shape() != Shape{3, 32, 32}) throw ContractError("cifar output needs [3,32,32] images");
  std::string out;
  out.reserve(data.size() * kCifarRecordBytes);
  const std::size_t stride = kCifarRecordBytes - 1;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(data.labels[i])));
    for (std::size_t p = 0; p < stride; ++p) out.push_back(static_cast<char>(to_byte(data.images[i * stride + p])));
  }
  write_file(path, out);
}

Tensor gaussian_kernel(double sigma, bool normalize) {
  if (!(sigma > 0.0)) throw ContractError("gaussian_kernel: sigma must be positive");
  const auto radius = static_cast<long>(std::ceil(3.0 * sigma));
  const auto k = static_cast<std::size_t>(2 * radius + 1);
  Tensor kernel(Shape{k, k});
  const double norm = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
  for (long y = -radius; y <= radius; ++y) {
    for (long x = -radius; x <= radius; ++x) {
      const auto d2 = static_cast<double>(x * x + y * y);
      kernel[static_cast<std::size_t>(y + radius) * k + static_cast<std::size_t>(x + radius)] =
          norm * std::exp(-d2 / (sigma * sigma));
    }
  }
  if (normalize) kernel = scale(kernel, 1.0 / sum(kernel));
  return kernel;
}

Tensor gaussian_filter(const Tensor& image, double sigma) {
  require_image(image, "gaussian_filter");
  if (!(sigma > 0.0)) throw ContractError("gaussian_filter: sigma must be positive");
  const auto radius = static_cast<long>(std::ceil(3.0 * sigma));
  // exp(-(x^2+y^2)/s^2) = exp(-x^2/s^2) * exp(-y^2/s^2): normalized 1-D taps
  // reproduce the normalized 2-D kernel.
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long x = -radius; x <= radius; ++x) {
    taps[static_cast<std::size_t>(x + radius)] = std::exp(-static_cast<double>(x * x) / (sigma * sigma));
    total += taps[static_cast<std::size_t>(x + radius)];
  }
  for (auto& t : taps) t /= total;

  const std::size_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
  Tensor horizontal(image.shape());
  Tensor out(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = image.data().data() + ch * h * w;
    double* mid = horizontal.data().data() + ch * h * w;
    double* dst = out.data().data() + ch * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (long d = -radius; d <= radius; ++d) {
          acc += taps[static_cast<std::size_t>(d + radius)] * src[y * w + reflect(static_cast<long>(x) + d, w)];
        }
        mid[y * w + x] = acc;
      }
    }
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (long d = -radius; d <= radius; ++d) {
          acc += taps[static_cast<std::size_t>(d + radius)] * mid[reflect(static_cast<long>(y) + d, h) * w + x];
        }
        dst[y * w + x] = acc;
      }
    }
  }
  return out;
}

Tensor gaussian_filter_batch(const Tensor& batch, double sigma) {
  if (batch.rank() != 4) throw ShapeError("gaussian_filter_batch expects [N,C,H,W]");
  Tensor out(batch.shape());
  const Shape sample(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t stride = numel(sample);
  for (std::size_t n = 0; n < batch.extent(0); ++n) {
    Tensor img(sample, std::vector<double>(batch.data().begin() + static_cast<std::ptrdiff_t>(n * stride),
                                           batch.data().begin() + static_cast<std::ptrdiff_t>((n + 1) * stride)));
    const Tensor filtered = gaussian_filter(img, sigma);
    std::copy(filtered.data().begin(), filtered.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(n * stride));
  }
  return out;
}

Tensor cutout(const Tensor& image, std::size_t size, double fill, std::mt19937_64& rng) {
  require_image(image, "cutout");
  const std::size_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
  if (size == 0 || size > std::min(h, w)) {
    throw ContractError("cutout size must lie in [1, " + std::to_string(std::min(h, w)) + "]");
  }
  std::uniform_int_distribution<std::size_t> top_dist(0, h - size), left_dist(0, w - size);
  const std::size_t top = top_dist(rng);
  const std::size_t left = left_dist(rng);
  Tensor out = image;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = top; y < top + size; ++y) {
      for (std::size_t x = left; x < left + size; ++x) out[(ch * h + y) * w + x] = fill;
    }
  }
  return out;
}

Tensor flip_horizontal(const Tensor& image) {
  require_image(image, "flip_horizontal");
  const std::size_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
  Tensor out(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out[(ch * h + y) * w + x] = image[(ch * h + y) * w + (w - 1 - x)];
    }
  }
  return out;
}

Tensor shift_image(const Tensor& image, long dy, long dx) {
  require_image(image, "shift_image");
  const std::size_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
  Tensor out(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      const long sy = static_cast<long>(y) - dy;
      if (sy < 0 || sy >= static_cast<long>(h)) continue;
      for (std::size_t x = 0; x < w; ++x) {
        const long sx = static_cast<long>(x) - dx;
        if (sx < 0 || sx >= static_cast<long>(w)) continue;
        out[(ch * h + y) * w + x] = image[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
      }
    }
  }
  return out;
}

void AugmentConfig::validate(std::size_t h, std::size_t w) const {
  if (flip_probability < 0.0 || flip_probability > 1.0) throw ContractError("flip probability must lie in [0,1]");
  if (max_shift >= std::min(h, w)) throw ContractError("max shift must be smaller than the image");
  if (cutout >= std::min(h, w) + 1) throw ContractError("cutout size must not exceed the image");
  if (gaussian_sigma < 0.0) throw ContractError("gaussian sigma must be >= 0");
}

Tensor augment_batch(const Tensor& batch, const AugmentConfig& cfg, std::mt19937_64& rng) {
  if (batch.rank() != 4) throw ShapeError("augment_batch expects [N,C,H,W]");
  cfg.validate(batch.extent(2), batch.extent(3));
  if (cfg.is_identity()) return batch;

  const std::uint64_t batch_seed = rng();
  const Shape sample(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t stride = numel(sample);
  Tensor out(batch.shape());
  for (std::size_t n = 0; n < batch.extent(0); ++n) {
    std::mt19937_64 image_rng(splitmix64(batch_seed + n));
    Tensor img(sample, std::vector<double>(batch.data().begin() + static_cast<std::ptrdiff_t>(n * stride),
                                           batch.data().begin() + static_cast<std::ptrdiff_t>((n + 1) * stride)));
    if (cfg.gaussian_sigma > 0.0) img = gaussian_filter(img, cfg.gaussian_sigma);
    if (cfg.flip_probability > 0.0) {
      std::bernoulli_distribution flip(cfg.flip_probability);
      if (flip(image_rng)) img = flip_horizontal(img);
    }
    if (cfg.max_shift > 0) {
      const auto m = static_cast<long>(cfg.max_shift);
      std::uniform_int_distribution<long> shift(-m, m);
      const long dy = shift(image_rng);
      const long dx = shift(image_rng);
      img = shift_image(img, dy, dx);
    }
    if (cfg.cutout > 0) img = cutout(img, cfg.cutout, cfg.cutout_fill, image_rng);
    std::copy(img.data().begin(), img.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(n * stride));
  }
  return out;
}

}  // namespace pvlu
