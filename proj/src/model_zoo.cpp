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

#include "pvlu/model_zoo.hpp"

#include <cctype>
#include <sstream>

#include "pvlu/errors.hpp"

namespace pvlu {

namespace {

LayerSpec conv(std::size_t filters, std::size_t kernel = 3, std::size_t stride = 1) {
  return {layer::Conv{filters, kernel, stride, Padding::Same}};
}
LayerSpec activation_layer(const ActivationSpec& a) { return {layer::Activation{a}}; }
LayerSpec bn() { return {layer::BatchNorm{}}; }
LayerSpec pool() { return {layer::MaxPool{2, 2}}; }
LayerSpec dense(std::size_t units) { return {layer::Dense{units}}; }
LayerSpec dropout(double rate) { return {layer::Dropout{rate}}; }
LayerSpec flatten() { return {layer::Flatten{}}; }
LayerSpec softmax() { return {layer::SoftmaxClassifier{}}; }
LayerSpec residual(std::vector<LayerSpec> inner) { return {layer::Residual{std::move(inner), false}}; }

class LayerParser {
 public:
  LayerParser(const std::string& text, const ActivationSpec& activation) : text_(text), activation_(activation) {}

  std::vector<LayerSpec> parse() {
    auto layers = list();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return layers;
  }

 private:
  std::vector<LayerSpec> list() {
    std::vector<LayerSpec> out;
    while (true) {
      out.push_back(item());
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      return out;
    }
  }

  LayerSpec item() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '(' && text_[pos_] != ')') ++pos_;
    std::string token = text_.substr(start, pos_ - start);
    while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back()))) token.pop_back();
    if (token.empty()) fail("empty layer entry");

    if (pos_ < text_.size() && text_[pos_] == '(') {
      if (token != "res" && token != "resproj") fail("only res(...) and resproj(...) take a layer list");
      ++pos_;
      auto inner = list();
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("missing ')'");
      ++pos_;
      return {layer::Residual{std::move(inner), token == "resproj"}};
    }

    std::vector<std::string> parts;
    std::stringstream in(token);
    std::string part;
    while (std::getline(in, part, ':')) parts.push_back(part);
    const std::string& head = parts[0];
    auto count = [&](std::size_t i, std::size_t fallback) -> std::size_t {
      if (parts.size() <= i) return fallback;
      try {
        std::size_t used = 0;
        const long v = std::stol(parts[i], &used);
        if (used != parts[i].size() || v <= 0) throw std::invalid_argument(parts[i]);
        return static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        fail("bad integer '" + parts[i] + "' in '" + token + "'");
      }
    };

    if (head == "conv") {
      if (parts.size() < 2) fail("conv needs a filter count");
      layer::Conv c{count(1, 1), count(2, 3), count(3, 1), Padding::Same};
      if (parts.size() > 4) {
        if (parts[4] == "valid") {
          c.padding = Padding::Valid;
        } else if (parts[4] != "same") {
          fail("padding must be same or valid");
        }
      }
      return {c};
    }
    if (head == "dense") {
      if (parts.size() < 2) fail("dense needs a unit count");
      return dense(count(1, 1));
    }
    if (head == "pool" || head == "maxpool") {
      const std::size_t w = count(1, 2);
      return {layer::MaxPool{w, count(2, w)}};
    }
    if (head == "dropout") {
      if (parts.size() < 2) fail("dropout needs a rate");
      try {
        return dropout(std::stod(parts[1]));
      } catch (const std::exception&) {
        fail("bad dropout rate '" + parts[1] + "'");
      }
    }
    if (head == "bn" || head == "batchnorm") return bn();
    if (head == "flatten") return flatten();
    if (head == "softmax") return softmax();
    if (head == "act") return activation_layer(activation_);
    try {
      return activation_layer(parse_activation(token));
    } catch (const ContractError&) {
      fail("unknown layer '" + token + "'");
    }
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("layer list: " + what + " (at character " + std::to_string(pos_) + ")");
  }

  const std::string& text_;
  const ActivationSpec& activation_;
  std::size_t pos_ = 0;
};

}  // namespace

bool is_named_model(const std::string& name) {
  return name == "tiny-cnn" || name == "mlp" || name == "mnist-cnn" || name == "cifar6" || name == "resnet-mini";
}

std::vector<LayerSpec> named_model(const std::string& name, const ActivationSpec& a, std::size_t classes,
                                   std::size_t width) {
  if (classes < 2) throw ConfigError("a classifier needs at least 2 classes");
  if (name == "tiny-cnn") {
    const std::size_t w = width ? width : 4;
    return {conv(w), activation_layer(a), conv(w), activation_layer(a), pool(), flatten(), dense(classes), softmax()};
  }
  if (name == "mlp") {
    const std::size_t w = width ? width : 64;
    return {flatten(), dense(w), activation_layer(a), dense(classes), softmax()};
  }
  if (name == "mnist-cnn") {
    const std::size_t w = width ? width : 8;
    return {conv(w),   activation_layer(a),     pool(),  conv(2 * w), activation_layer(a), pool(), flatten(),
            dense(64), activation_layer(a), dense(classes), softmax()};
  }
  if (name == "cifar6") {
    const std::size_t w = width ? width : 8;
    std::vector<LayerSpec> specs;
    for (std::size_t stage = 0; stage < 3; ++stage) {
      const std::size_t f = w << stage;
      for (int rep = 0; rep < 2; ++rep) {
        specs.push_back(conv(f));
        specs.push_back(bn());
        specs.push_back(activation_layer(a));
      }
      specs.push_back(pool());
      specs.push_back(dropout(0.1));
    }
    specs.push_back(flatten());
    specs.push_back(dense(8 * w));
    specs.push_back(bn());
    specs.push_back(activation_layer(a));
    specs.push_back(dropout(0.2));
    specs.push_back(dense(classes));
    specs.push_back(softmax());
    return specs;
  }
  if (name == "resnet-mini") {
    const std::size_t w = width ? width : 8;
    return {conv(w),
            bn(),
            activation_layer(a),
            residual({conv(w), bn(), activation_layer(a), conv(w), bn()}),
            activation_layer(a),
            residual({conv(2 * w, 3, 2), bn(), activation_layer(a), conv(2 * w), bn()}),
            activation_layer(a),
            pool(),
            flatten(),
            dense(classes),
            softmax()};
  }
  throw ConfigError("unknown model '" + name + "'");
}

std::vector<LayerSpec> parse_layers(const std::string& text, const ActivationSpec& activation) {
  return LayerParser(text, activation).parse();
}

}  // namespace pvlu
