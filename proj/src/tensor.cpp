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

#include "pvlu/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "pvlu/errors.hpp"

namespace pvlu {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + to_string(t.shape()));
  }
}

// Maps input index of an unpadded dimension, -1 when it falls in padding.
inline std::ptrdiff_t source_index(std::size_t out, std::size_t k, std::size_t stride,
                                   std::size_t pad, std::size_t extent) {
  const auto pos = static_cast<std::ptrdiff_t>(out * stride + k) - static_cast<std::ptrdiff_t>(pad);
  return (pos < 0 || pos >= static_cast<std::ptrdiff_t>(extent)) ? -1 : pos;
}

// Unfolds one image [C,H,W] into columns [C*kh*kw, oh*ow].
void im2col(const double* image, std::size_t channels, std::size_t h, std::size_t w,
            std::size_t kh, std::size_t kw, std::size_t stride, const ConvGeometry& g,
            double* cols) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        double* row = cols + ((c * kh + i) * kw + j) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto y = source_index(oy, i, stride, g.pad_top, h);
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto x = source_index(ox, j, stride, g.pad_left, w);
            row[oy * g.out_w + ox] =
                (y < 0 || x < 0) ? 0.0 : image[(c * h + static_cast<std::size_t>(y)) * w +
                                               static_cast<std::size_t>(x)];
          }
        }
      }
    }
  }
}

void col2im(const double* cols, std::size_t channels, std::size_t h, std::size_t w,
            std::size_t kh, std::size_t kw, std::size_t stride, const ConvGeometry& g,
            double* image) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const double* row = cols + ((c * kh + i) * kw + j) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto y = source_index(oy, i, stride, g.pad_top, h);
          if (y < 0) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto x = source_index(ox, j, stride, g.pad_left, w);
            if (x < 0) continue;
            image[(c * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x)] +=
                row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

void check_conv_operands(const Shape& input, const Shape& kernel) {
  if (input.size() != 4 || kernel.size() != 4) {
    throw ShapeError("conv2d: expected input [N,C,H,W] and kernel [F,C,kh,kw], got " +
                     to_string(input) + " and " + to_string(kernel));
  }
  if (input[1] != kernel[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(input[1]) +
                     " channels but kernel expects " + std::to_string(kernel[1]));
  }
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double value) : shape_(std::move(shape)) {
  for (auto e : shape_) {
    if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + to_string(shape_));
  }
  data_.assign(numel(shape_), value);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto e : shape_) {
    if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + to_string(shape_));
  }
  if (data_.size() != numel(shape_)) {
    throw ShapeError("shape " + to_string(shape_) + " needs " + std::to_string(numel(shape_)) +
                     " values, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::create(Shape shape, const FillRule& rule) {
  Tensor t(std::move(shape));
  if (const auto* c = std::get_if<fill::Constant>(&rule)) {
    std::fill(t.data_.begin(), t.data_.end(), c->value);
  } else if (const auto* n = std::get_if<fill::SeededNormal>(&rule)) {
    std::mt19937_64 rng(n->seed);
    std::normal_distribution<double> dist(n->mean, n->stddev);
    for (auto& v : t.data_) v = dist(rng);
  }
  return t;
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool Tensor::bitwise_equal(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(data_[i]) != std::bit_cast<std::uint64_t>(other.data_[i])) {
      return false;
    }
  }
  return true;
}

void check_finite(const Tensor& t, const std::string& where) {
  if (!t.all_finite()) throw NumericError("non-finite value produced by " + where);
}

Tensor ew(const Tensor& a, const Tensor& b, EwOp op) {
  auto apply = [op](double x, double y) {
    switch (op) {
      case EwOp::Add: return x + y;
      case EwOp::Sub: return x - y;
      case EwOp::Mul: return x * y;
    }
    return 0.0;
  };

  Tensor out(a.shape());
  auto dst = out.data();
  auto lhs = a.data();
  auto rhs = b.data();

  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = apply(lhs[i], rhs[i]);
    return out;
  }

  // Channel vector against [N,C,...].
  if (b.rank() == 1 && a.rank() >= 2 && b.extent(0) == a.extent(1)) {
    const std::size_t channels = a.extent(1);
    const std::size_t inner = a.size() / (a.extent(0) * channels);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = apply(lhs[i], rhs[(i / inner) % channels]);
    }
    return out;
  }

  if (b.rank() != a.rank()) {
    throw ShapeError("ew: cannot broadcast " + to_string(b.shape()) + " onto " + to_string(a.shape()));
  }
  for (std::size_t d = 0; d < a.rank(); ++d) {
    if (b.extent(d) != 1 && b.extent(d) != a.extent(d)) {
      throw ShapeError("ew: cannot broadcast " + to_string(b.shape()) + " onto " +
                       to_string(a.shape()));
    }
  }
  // Stretch extent-1 axes of b.
  std::vector<std::size_t> index(a.rank(), 0);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::size_t offset = 0;
    for (std::size_t d = 0; d < a.rank(); ++d) {
      offset = offset * b.extent(d) + (b.extent(d) == 1 ? 0 : index[d]);
    }
    dst[i] = apply(lhs[i], rhs[offset]);
    for (std::size_t d = a.rank(); d-- > 0;) {
      if (++index[d] < a.extent(d)) break;
      index[d] = 0;
    }
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out(a.shape());
  auto dst = out.data();
  auto src = a.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] * factor;
  return out;
}

double sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return total;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Tensor reduce_to_shape(const Tensor& grad, const Shape& target) {
  if (grad.shape() == target) return grad;
  Tensor out(target);
  if (target.size() == 1 && grad.rank() >= 2 && target[0] == grad.extent(1)) {
    const std::size_t channels = grad.extent(1);
    const std::size_t inner = grad.size() / (grad.extent(0) * channels);
    for (std::size_t i = 0; i < grad.size(); ++i) out[(i / inner) % channels] += grad[i];
    return out;
  }
  if (target.size() != grad.rank()) {
    throw ShapeError("reduce_to_shape: " + to_string(grad.shape()) + " onto " + to_string(target));
  }
  std::vector<std::size_t> index(grad.rank(), 0);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    std::size_t offset = 0;
    for (std::size_t d = 0; d < grad.rank(); ++d) {
      offset = offset * target[d] + (target[d] == 1 ? 0 : index[d]);
    }
    out[offset] += grad[i];
    for (std::size_t d = grad.rank(); d-- > 0;) {
      if (++index[d] < grad.extent(d)) break;
      index[d] = 0;
    }
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = transpose_a ? a.extent(1) : a.extent(0);
  const std::size_t k = transpose_a ? a.extent(0) : a.extent(1);
  const std::size_t kb = transpose_b ? b.extent(1) : b.extent(0);
  const std::size_t n = transpose_b ? b.extent(0) : b.extent(1);
  if (k != kb) {
    throw ShapeError("matmul: inner extents differ for " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  Tensor out(Shape{m, n});
  ConstMatrixMap lhs(a.data().data(), a.extent(0), a.extent(1));
  ConstMatrixMap rhs(b.data().data(), b.extent(0), b.extent(1));
  MatrixMap dst(out.data().data(), m, n);
  if (transpose_a && transpose_b) {
    dst.noalias() = lhs.transpose() * rhs.transpose();
  } else if (transpose_a) {
    dst.noalias() = lhs.transpose() * rhs;
  } else if (transpose_b) {
    dst.noalias() = lhs * rhs.transpose();
  } else {
    dst.noalias() = lhs * rhs;
  }
  return out;
}

ConvGeometry conv_geometry(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                           std::size_t stride, Padding padding) {
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  if (padding == Padding::Valid) {
    if (kh > h || kw > w) {
      throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                       " larger than input " + std::to_string(h) + "x" + std::to_string(w));
    }
    return {(h - kh) / stride + 1, (w - kw) / stride + 1, 0, 0};
  }
  const std::size_t oh = (h + stride - 1) / stride;
  const std::size_t ow = (w + stride - 1) / stride;
  const std::size_t need_h = (oh - 1) * stride + kh;
  const std::size_t need_w = (ow - 1) * stride + kw;
  const std::size_t pad_h = need_h > h ? need_h - h : 0;
  const std::size_t pad_w = need_w > w ? need_w - w : 0;
  if (kh > h + pad_h || kw > w + pad_w) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  return {oh, ow, pad_h / 2, pad_w / 2};
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, Padding padding) {
  check_conv_operands(input.shape(), kernel.shape());
  const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2), w = input.extent(3);
  const std::size_t f = kernel.extent(0), kh = kernel.extent(2), kw = kernel.extent(3);
  const auto g = conv_geometry(h, w, kh, kw, stride, padding);
  const std::size_t patch = c * kh * kw;
  const std::size_t plane = g.out_h * g.out_w;

  Tensor out(Shape{n, f, g.out_h, g.out_w});
  std::vector<double> cols(patch * plane);
  ConstMatrixMap weights(kernel.data().data(), f, patch);
  ConstMatrixMap col_map(cols.data(), patch, plane);
  for (std::size_t i = 0; i < n; ++i) {
    im2col(input.data().data() + i * c * h * w, c, h, w, kh, kw, stride, g, cols.data());
    MatrixMap dst(out.data().data() + i * f * plane, f, plane);
    dst.noalias() = weights * col_map;
  }
  return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernel,
                             const Shape& input_shape, std::size_t stride, Padding padding) {
  check_conv_operands(input_shape, kernel.shape());
  const std::size_t n = input_shape[0], c = input_shape[1], h = input_shape[2], w = input_shape[3];
  const std::size_t f = kernel.extent(0), kh = kernel.extent(2), kw = kernel.extent(3);
  const auto g = conv_geometry(h, w, kh, kw, stride, padding);
  const std::size_t patch = c * kh * kw;
  const std::size_t plane = g.out_h * g.out_w;

  Tensor grad_in(input_shape);
  std::vector<double> cols(patch * plane);
  ConstMatrixMap weights(kernel.data().data(), f, patch);
  MatrixMap col_map(cols.data(), patch, plane);
  for (std::size_t i = 0; i < n; ++i) {
    ConstMatrixMap upstream(grad_out.data().data() + i * f * plane, f, plane);
    col_map.noalias() = weights.transpose() * upstream;
    col2im(cols.data(), c, h, w, kh, kw, stride, g, grad_in.data().data() + i * c * h * w);
  }
  return grad_in;
}

Tensor conv2d_backward_kernel(const Tensor& grad_out, const Tensor& input,
                              const Shape& kernel_shape, std::size_t stride, Padding padding) {
  check_conv_operands(input.shape(), kernel_shape);
  const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2), w = input.extent(3);
  const std::size_t f = kernel_shape[0], kh = kernel_shape[2], kw = kernel_shape[3];
  const auto g = conv_geometry(h, w, kh, kw, stride, padding);
  const std::size_t patch = c * kh * kw;
  const std::size_t plane = g.out_h * g.out_w;

  Tensor grad_kernel(kernel_shape);
  std::vector<double> cols(patch * plane);
  MatrixMap dst(grad_kernel.data().data(), f, patch);
  ConstMatrixMap col_map(cols.data(), patch, plane);
  for (std::size_t i = 0; i < n; ++i) {
    im2col(input.data().data() + i * c * h * w, c, h, w, kh, kw, stride, g, cols.data());
    ConstMatrixMap upstream(grad_out.data().data() + i * f * plane, f, plane);
    dst.noalias() += upstream * col_map.transpose();
  }
  return grad_kernel;
}

PoolResult maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  require_rank(input, 4, "maxpool2d");
  if (window == 0 || stride == 0) throw ContractError("maxpool2d: window and stride must be positive");
  const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2), w = input.extent(3);
  if (window > h || window > w) {
    throw ShapeError("maxpool2d: window " + std::to_string(window) + " exceeds input " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t oh = (h - window) / stride + 1;
  const std::size_t ow = (w - window) / stride + 1;
  PoolResult result{Tensor(Shape{n, c, oh, ow}), {}};
  result.argmax.resize(result.output.size());
  auto src = input.data();
  auto dst = result.output.data();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + oy * stride * w + ox * stride;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx = base + (oy * stride + dy) * w + ox * stride + dx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        dst[o] = src[best];
        result.argmax[o] = best;
      }
    }
  }
  return result;
}

Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool2d_backward: argmax map does not match upstream gradient");
  }
  Tensor grad_in(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad_in[argmax[i]] += grad_out[i];
  return grad_in;
}

}  // namespace pvlu
