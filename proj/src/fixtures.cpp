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

#include "pvlu/fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "pvlu/errors.hpp"

namespace pvlu::fixtures {

namespace {

std::uint64_t stream_seed(std::uint64_t seed, Split split, std::uint64_t salt) {
  std::uint64_t x = seed * 0x9e3779b97f4a7c15ULL + (split == Split::Train ? 0x1234567ULL : 0x89abcdefULL) + salt;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void require_count(std::size_t count) {
  if (count == 0) throw ContractError("fixture size must be >= 1");
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Balanced labels in shuffled order.
std::vector<int> balanced_labels(std::size_t count, int classes, std::mt19937_64& rng) {
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

// 5x7 glyphs, one string per row, '#' = ink.
constexpr std::array<std::array<const char*, 7>, 10> kFont = {{
    {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "},
    {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "},
    {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"},
    {"#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "},
    {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "},
    {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "},
    {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "},
    {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "},
    {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "},
    {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "},
}};

double glyph_ink(int digit, double u, double v) {
  // Bilinear sample of the bitmap with cell centres at integer + 0.5.
  auto cell = [&](int col, int row) -> double {
    if (col < 0 || col >= 5 || row < 0 || row >= 7) return 0.0;
    return kFont[static_cast<std::size_t>(digit)][static_cast<std::size_t>(row)][col] == '#' ? 1.0 : 0.0;
  };
  const double x = u - 0.5, y = v - 0.5;
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  return (1 - fx) * (1 - fy) * cell(x0, y0) + fx * (1 - fy) * cell(x0 + 1, y0) + (1 - fx) * fy * cell(x0, y0 + 1) +
         fx * fy * cell(x0 + 1, y0 + 1);
}

double box_sdf(double px, double py, double hx, double hy) {
  const double dx = std::abs(px) - hx, dy = std::abs(py) - hy;
  const double ox = std::max(dx, 0.0), oy = std::max(dy, 0.0);
  return std::hypot(ox, oy) + std::min(std::max(dx, dy), 0.0);
}

double shape_sdf(int cls, double px, double py, double r) {
  const double t = std::max(1.0, 0.16 * r);
  switch (cls) {
    case 0: return std::hypot(px, py) - r;
    case 1: return std::abs(std::hypot(px, py) - 0.75 * r) - t;
    case 2: return box_sdf(px, py, 0.8 * r, 0.8 * r);
    case 3: return std::abs(box_sdf(px, py, 0.75 * r, 0.75 * r)) - t;
    case 4: {
      double d = -1e9;
      for (int k = 0; k < 3; ++k) {
        const double a = -std::numbers::pi / 2 + 2 * std::numbers::pi * k / 3;
        d = std::max(d, px * std::cos(a) + py * std::sin(a) - 0.5 * r);
      }
      return d;
    }
    case 5: return std::min(box_sdf(px, py, r, 0.3 * r), box_sdf(px, py, 0.3 * r, r));
    case 6: {
      const double c = std::numbers::sqrt2 / 2;
      const double qx = c * (px + py), qy = c * (py - px);
      return std::min(box_sdf(qx, qy, r, 0.25 * r), box_sdf(qx, qy, 0.25 * r, r));
    }
    case 7: return std::min(box_sdf(px, py + 0.5 * r, r, 0.22 * r), box_sdf(px, py - 0.5 * r, r, 0.22 * r));
    case 8: return std::min(box_sdf(px + 0.5 * r, py, 0.22 * r, r), box_sdf(px - 0.5 * r, py, 0.22 * r, r));
    default: return (std::abs(px) + std::abs(py) - r) / std::numbers::sqrt2;
  }
}

}  // namespace

Dataset separable(std::size_t count, std::uint64_t seed, Split split) {
  require_count(count);
  std::mt19937_64 rng(stream_seed(seed, split, 1));
  std::normal_distribution<double> noise(0.0, 0.15);
  std::uniform_real_distribution<double> level(0.55, 0.9);
  Dataset ds{Tensor(Shape{count, 1, 8, 8}), balanced_labels(count, 2, rng), split, 2};
  for (std::size_t n = 0; n < count; ++n) {
    const double bright = level(rng);
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 0; x < 8; ++x) {
        const bool lit = (x < 4) == (ds.labels[n] == 0);
        ds.images[(n * 8 + y) * 8 + x] = clamp01((lit ? bright : 0.15) + noise(rng));
      }
    }
  }
  return ds;
}

Dataset digits(std::size_t count, std::uint64_t seed, Split split) {
  require_count(count);
  std::mt19937_64 rng(stream_seed(seed, split, 2));
  std::uniform_real_distribution<double> scale(2.4, 3.4), shear(-0.25, 0.25), ink(0.6, 1.0), unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.08);
  Dataset ds{Tensor(Shape{count, 1, 28, 28}), balanced_labels(count, 10, rng), split, 10};
  for (std::size_t n = 0; n < count; ++n) {
    const double sx = scale(rng), sy = sx * (0.9 + 0.2 * unit(rng));
    const double gw = 5 * sx, gh = 7 * sy;
    const double ox = (28 - gw) * (0.2 + 0.6 * unit(rng)), oy = (28 - gh) * (0.2 + 0.6 * unit(rng));
    const double sh = shear(rng), amp = ink(rng);
    for (std::size_t y = 0; y < 28; ++y) {
      for (std::size_t x = 0; x < 28; ++x) {
        const double v = (static_cast<double>(y) + 0.5 - oy) / sy;
        const double u = (static_cast<double>(x) + 0.5 - ox - sh * (static_cast<double>(y) - 14.0)) / sx;
        ds.images[(n * 28 + y) * 28 + x] = clamp01(amp * glyph_ink(ds.labels[n], u, v) + noise(rng));
      }
    }
  }
  return ds;
}

Dataset shapes(std::size_t count, std::uint64_t seed, Split split) {
  require_count(count);
  constexpr std::size_t S = 32;
  std::mt19937_64 rng(stream_seed(seed, split, 3));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  Dataset ds{Tensor(Shape{count, 3, S, S}), balanced_labels(count, 10, rng), split, 10};
  for (std::size_t n = 0; n < count; ++n) {
    std::array<double, 3> bg{}, grad{}, fg{};
    for (int c = 0; c < 3; ++c) {
      bg[c] = 0.2 + 0.6 * unit(rng);
      grad[c] = (unit(rng) - 0.5) * 0.02;
    }
    // Object colour differs from the background by a random signed offset.
    const double contrast = 0.3 + 0.3 * unit(rng);
    for (int c = 0; c < 3; ++c) {
      const double dir = unit(rng) < 0.5 ? -1.0 : 1.0;
      fg[c] = clamp01(bg[c] + dir * contrast * (0.5 + 0.5 * unit(rng)));
    }
    const double r = 6.0 + 4.0 * unit(rng);
    const double cx = r + 1 + (S - 2 * r - 2) * unit(rng), cy = r + 1 + (S - 2 * r - 2) * unit(rng);
    const double rot = (unit(rng) - 0.5) * 0.5;
    const double cr = std::cos(rot), sr = std::sin(rot);

    // One thin clutter stroke.
    struct Stroke {
      double x0, y0, dx, dy, len;
      std::array<double, 3> colour;
    };
    std::array<Stroke, 1> strokes{};
    for (auto& s : strokes) {
      const double a = unit(rng) * std::numbers::pi;
      s = {unit(rng) * S, unit(rng) * S, std::cos(a), std::sin(a), 6.0 + 12.0 * unit(rng), {}};
      for (int c = 0; c < 3; ++c) s.colour[c] = unit(rng);
    }

    const int cls = ds.labels[n];
    for (std::size_t y = 0; y < S; ++y) {
      for (std::size_t x = 0; x < S; ++x) {
        const double fx = static_cast<double>(x) + 0.5, fy = static_cast<double>(y) + 0.5;
        std::array<double, 3> px{};
        for (int c = 0; c < 3; ++c) px[c] = bg[c] + grad[c] * (fx - S / 2.0 + fy - S / 2.0);
        for (const auto& s : strokes) {
          const double tx = fx - s.x0, ty = fy - s.y0;
          const double along = tx * s.dx + ty * s.dy;
          const double across = std::abs(-tx * s.dy + ty * s.dx);
          if (std::abs(along) < s.len / 2) {
            const double cov = clamp01(1.0 - across);
            for (int c = 0; c < 3; ++c) px[c] = (1 - cov) * px[c] + cov * s.colour[c];
          }
        }
        const double qx = cr * (fx - cx) + sr * (fy - cy), qy = -sr * (fx - cx) + cr * (fy - cy);
        const double cov = clamp01(0.5 - shape_sdf(cls, qx, qy, r));
        for (int c = 0; c < 3; ++c) {
          const double v = (1 - cov) * px[c] + cov * fg[c] + noise(rng);
          ds.images[((n * 3 + static_cast<std::size_t>(c)) * S + y) * S + x] = clamp01(v);
        }
      }
    }
  }
  return ds;
}

FixtureFiles write_all(const std::filesystem::path& dir, const FixtureSizes& sizes, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  FixtureFiles f{dir / "separable-train-images.idx", dir / "separable-train-labels.idx",
                 dir / "separable-test-images.idx",  dir / "separable-test-labels.idx",
                 dir / "digits-train-images.idx",    dir / "digits-train-labels.idx",
                 dir / "digits-test-images.idx",     dir / "digits-test-labels.idx",
                 dir / "shapes-train.bin",           dir / "shapes-test.bin"};
  write_idx(separable(sizes.separable_train, seed, Split::Train), f.separable_train_images, f.separable_train_labels);
  write_idx(separable(sizes.separable_test, seed, Split::Test), f.separable_test_images, f.separable_test_labels);
  write_idx(digits(sizes.digits_train, seed, Split::Train), f.digits_train_images, f.digits_train_labels);
  write_idx(digits(sizes.digits_test, seed, Split::Test), f.digits_test_images, f.digits_test_labels);
  write_cifar(shapes(sizes.shapes_train, seed, Split::Train), f.shapes_train);
  write_cifar(shapes(sizes.shapes_test, seed, Split::Test), f.shapes_test);
  return f;
}

}  // namespace pvlu::fixtures
