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

#include "pvlu/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pvlu/errors.hpp"
#include "pvlu/overloaded.hpp"

namespace pvlu {

namespace {

constexpr char kMagic[4] = {'P', 'V', 'L', 'U'};

class Writer {
 public:
  void raw(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint8_t u8() {
    need(1, "u8");
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void magic() {
    need(4, "magic");
    if (std::memcmp(in_.data(), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic, expected PVLU", 0);
    pos_ += 4;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }
  [[noreturn]] void fail(const std::string& what) const { throw FormatError("checkpoint: " + what, pos_); }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) throw FormatError(std::string("checkpoint: truncated reading ") + what, pos_);
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_spec(Writer& w, const LayerSpec& spec) {
  const auto kind = static_cast<std::uint8_t>(spec.kind.index());
  w.u8(kind);
  w.u8(spec.trainable ? 1 : 0);
  std::visit(Overloaded{
                 [&](const layer::Conv& c) {
                   w.u32(static_cast<std::uint32_t>(c.filters));
                   w.u32(static_cast<std::uint32_t>(c.kernel));
                   w.u32(static_cast<std::uint32_t>(c.stride));
                   w.u8(c.padding == Padding::Same ? 0 : 1);
                 },
                 [&](const layer::Dense& d) { w.u32(static_cast<std::uint32_t>(d.units)); },
                 [&](const layer::MaxPool& p) {
                   w.u32(static_cast<std::uint32_t>(p.window));
                   w.u32(static_cast<std::uint32_t>(p.stride));
                 },
                 [&](const layer::Dropout& d) { w.f64(d.rate); },
                 [&](const layer::BatchNorm&) {},
                 [&](const layer::Activation& a) {
                   w.u8(static_cast<std::uint8_t>(a.act.tag));
                   w.f64(a.act.p0);
                   w.f64(a.act.p1);
                 },
                 [&](const layer::Flatten&) {},
                 [&](const layer::SoftmaxClassifier&) {},
                 [&](const layer::Residual& r) {
                   w.u8(r.projection ? 1 : 0);
                   w.u32(static_cast<std::uint32_t>(r.inner.size()));
                   for (const auto& inner : r.inner) write_spec(w, inner);
                 },
             },
             spec.kind);
}

LayerSpec read_spec(Reader& r, int depth) {
  if (depth > 32) r.fail("residual nesting too deep");
  LayerSpec spec;
  const std::uint8_t kind = r.u8();
  spec.trainable = r.u8() != 0;
  switch (kind) {
    case 0: {
      layer::Conv c;
      c.filters = r.u32();
      c.kernel = r.u32();
      c.stride = r.u32();
      const auto pad = r.u8();
      if (pad > 1) r.fail("unknown padding code " + std::to_string(pad));
      c.padding = pad == 0 ? Padding::Same : Padding::Valid;
      spec.kind = c;
      break;
    }
    case 1: spec.kind = layer::Dense{r.u32()}; break;
    case 2: {
      layer::MaxPool p;
      p.window = r.u32();
      p.stride = r.u32();
      spec.kind = p;
      break;
    }
    case 3: spec.kind = layer::Dropout{r.f64()}; break;
    case 4: spec.kind = layer::BatchNorm{}; break;
    case 5: {
      const auto tag = r.u8();
      if (tag > static_cast<std::uint8_t>(ActivationTag::Pvlu)) r.fail("unknown activation tag " + std::to_string(tag));
      ActivationSpec a{static_cast<ActivationTag>(tag), 0.0, 0.0};
      a.p0 = r.f64();
      a.p1 = r.f64();
      spec.kind = layer::Activation{a};
      break;
    }
    case 6: spec.kind = layer::Flatten{}; break;
    case 7: spec.kind = layer::SoftmaxClassifier{}; break;
    case 8: {
      layer::Residual res;
      res.projection = r.u8() != 0;
      const auto count = r.u32();
      if (count > 4096) r.fail("implausible residual layer count");
      for (std::uint32_t i = 0; i < count; ++i) res.inner.push_back(read_spec(r, depth + 1));
      spec.kind = std::move(res);
      break;
    }
    default: r.fail("unknown layer kind " + std::to_string(kind));
  }
  return spec;
}

std::vector<Layer*> batchnorm_layers(Model& model) {
  std::vector<Layer*> out;
  for_each_layer(model.layers(), [&](Layer& l) {
    if (std::holds_alternative<layer::BatchNorm>(l.spec.kind)) out.push_back(&l);
  });
  return out;
}

}  // namespace

std::string serialize_checkpoint(const Model& model) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.input_shape().size()));
  for (auto e : model.input_shape()) w.u32(static_cast<std::uint32_t>(e));

  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& layer : model.layers()) write_spec(w, layer.spec);

  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u8(static_cast<std::uint8_t>(p->role));
    w.u8(p->trainable ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(p->value.rank()));
    for (auto e : p->value.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (double v : p->value.data()) w.f32(static_cast<float>(v));
  }

  std::vector<const Tensor*> buffers;
  for_each_layer(model.layers(), [&](const Layer& l) {
    if (std::holds_alternative<layer::BatchNorm>(l.spec.kind)) {
      buffers.push_back(&l.running_mean);
      buffers.push_back(&l.running_var);
    }
  });
  w.u32(static_cast<std::uint32_t>(buffers.size()));
  for (const auto* b : buffers) {
    w.u32(static_cast<std::uint32_t>(b->size()));
    for (double v : b->data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

Model deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  r.magic();
  const auto version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));

  const auto rank = r.u32();
  if (rank == 0 || rank > 3) r.fail("input rank must be 1..3");
  Shape input;
  for (std::uint32_t i = 0; i < rank; ++i) input.push_back(r.u32());

  const auto layer_count = r.u32();
  if (layer_count == 0 || layer_count > 4096) r.fail("implausible layer count");
  std::vector<LayerSpec> specs;
  for (std::uint32_t i = 0; i < layer_count; ++i) specs.push_back(read_spec(r, 0));

  const std::size_t table_end = r.pos();
  Model model;
  try {
    model = Model::build(specs, input, 0);
  } catch (const std::exception& e) {
    throw FormatError(std::string("checkpoint: layer table does not build: ") + e.what(), table_end);
  }

  auto params = model.parameters();
  const auto param_count = r.u32();
  if (param_count != params.size()) {
    r.fail("expected " + std::to_string(params.size()) + " parameters, found " + std::to_string(param_count));
  }
  for (auto& p : params) {
    const auto role = r.u8();
    if (role != static_cast<std::uint8_t>(p->role)) r.fail("parameter role mismatch for " + p->name);
    p->trainable = r.u8() != 0;
    const auto prank = r.u32();
    Shape shape;
    for (std::uint32_t i = 0; i < prank && i < 8; ++i) shape.push_back(r.u32());
    if (shape != p->value.shape()) r.fail("parameter shape mismatch for " + p->name);
    for (auto& v : p->value.data()) v = static_cast<double>(r.f32());
    p->zero_grad();
  }

  auto bn = batchnorm_layers(model);
  const auto buffer_count = r.u32();
  if (buffer_count != 2 * bn.size()) r.fail("buffer count does not match batchnorm layers");
  for (auto* layer : bn) {
    for (Tensor* buf : {&layer->running_mean, &layer->running_var}) {
      const auto len = r.u32();
      if (len != buf->size()) r.fail("buffer length mismatch");
      for (auto& v : buf->data()) v = static_cast<double>(r.f32());
    }
  }
  if (!r.done()) r.fail("trailing bytes after checkpoint");
  for_each_layer(model.layers(), [](Layer& l) {
    if (!l.params.empty()) {
      l.spec.trainable = false;
      for (const auto& p : l.params) l.spec.trainable = l.spec.trainable || p->trainable;
    }
  });
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace pvlu
