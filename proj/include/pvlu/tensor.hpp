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
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace pvlu {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace fill {
struct Zeros {};
struct Constant {
  double value;
};
/// Normal draws from a private mt19937_64 stream seeded with `seed`.
struct SeededNormal {
  double mean;
  double stddev;
  std::uint64_t seed;
};
}  // namespace fill

using FillRule = std::variant<fill::Zeros, fill::Constant, fill::SeededNormal>;

/// Dense row-major array of doubles. Rank 0 is a scalar with one element.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double value = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor create(Shape shape, const FillRule& rule);
  static Tensor scalar(double value) { return Tensor(Shape{}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Element of a rank-4 tensor.
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  /// Value of a single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;

  /// Shapes equal and every element identical at the bit level.
  bool bitwise_equal(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws NumericError unless every element is finite. `where` names the producer.
void check_finite(const Tensor& t, const std::string& where);

enum class EwOp { Add, Sub, Mul };

/// Elementwise a (op) b. `b` may equal a's shape, have the same rank with
/// extents of 1 that stretch, or be a rank-1 vector matching a's channel
/// axis (axis 1) which stretches over every other axis.
Tensor ew(const Tensor& a, const Tensor& b, EwOp op);
inline Tensor add(const Tensor& a, const Tensor& b) { return ew(a, b, EwOp::Add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return ew(a, b, EwOp::Sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return ew(a, b, EwOp::Mul); }

Tensor scale(const Tensor& a, double factor);
double sum(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Reduces a broadcast gradient back onto `target` (inverse of ew broadcasting).
Tensor reduce_to_shape(const Tensor& grad, const Shape& target);

/// Matrix product of rank-2 tensors, optionally using either operand transposed.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false,
              bool transpose_b = false);

enum class Padding { Same, Valid };

struct ConvGeometry {
  std::size_t out_h;
  std::size_t out_w;
  std::size_t pad_top;
  std::size_t pad_left;
};

/// Output extents and leading zero padding. `same` puts any odd padding
/// on the bottom/right.
ConvGeometry conv_geometry(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                           std::size_t stride, Padding padding);

/// Cross-correlation of input [N,C,H,W] with kernel [F,C,kh,kw].
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, Padding padding);
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernel,
                             const Shape& input_shape, std::size_t stride, Padding padding);
Tensor conv2d_backward_kernel(const Tensor& grad_out, const Tensor& input,
                              const Shape& kernel_shape, std::size_t stride, Padding padding);

struct PoolResult {
  Tensor output;
  /// Flat input index of the selected element for each output element.
  std::vector<std::size_t> argmax;
};

PoolResult maxpool2d(const Tensor& input, std::size_t window, std::size_t stride);
Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const Shape& input_shape);

}  // namespace pvlu
