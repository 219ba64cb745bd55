/*
 Copyright 2026 The rheo Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "rheo/nn.hpp"

#include <algorithm>
#include <cmath>

#include "rheo/error.hpp"

namespace rheo::nn {

Tensor ParameterSet::add(const std::string& name, Tensor t, bool trainable) {
  for (const auto& e : entries_) {
    if (e.name == name) fail(ErrorCode::Internal, "duplicate parameter name " + name);
  }
  t.node()->requires_grad = trainable;
  entries_.push_back({name, t, trainable});
  return t;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  fail(ErrorCode::Schema, "no parameter named " + name);
}

Tensor* ParameterSet::find(const std::string& name) {
  for (auto& e : entries_) {
    if (e.name == name) return &e.tensor;
  }
  return nullptr;
}

std::vector<Tensor> ParameterSet::trainable() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_) {
    if (e.trainable) out.push_back(e.tensor);
  }
  return out;
}

std::size_t ParameterSet::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.tensor.size();
  }
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::vector<std::vector<double>> ParameterSet::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto& e : entries_) {
    if (!e.trainable) continue;
    auto d = e.tensor.data();
    out.emplace_back(d.begin(), d.end());
  }
  return out;
}

void ParameterSet::restore(const std::vector<std::vector<double>>& values) {
  std::size_t k = 0;
  for (auto& e : entries_) {
    if (!e.trainable) continue;
    if (k >= values.size() || values[k].size() != e.tensor.size()) {
      fail(ErrorCode::ShapeMismatch, "parameter snapshot does not match " + e.name);
    }
    std::copy(values[k].begin(), values[k].end(), e.tensor.mutable_data().begin());
    ++k;
  }
  if (k != values.size()) fail(ErrorCode::ShapeMismatch, "parameter snapshot has extra entries");
}

Linear Linear::create(ParameterSet& params, const std::string& name,
                      std::size_t in, std::size_t out, Rng& rng) {
  // Glorot uniform.
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-a, a);
  std::vector<double> w(in * out);
  for (auto& v : w) v = dist(rng);
  Linear l;
  l.weight = params.add(name + ".weight", Tensor::from({in, out}, w));
  l.bias = params.add(name + ".bias", Tensor::zeros({out}));
  return l;
}

Tensor Linear::forward(Tape& tape, const Tensor& x) const {
  return ad::add_row(tape, ad::matmul(tape, x, weight), bias);
}

LayerNorm LayerNorm::create(ParameterSet& params, const std::string& name,
                            std::size_t width, double eps) {
  LayerNorm ln;
  ln.gain = params.add(name + ".gain", Tensor::full({width}, 1.0));
  ln.bias = params.add(name + ".bias", Tensor::zeros({width}));
  ln.eps = eps;
  return ln;
}

Tensor LayerNorm::forward(Tape& tape, const Tensor& x) const {
  return ad::layer_norm(tape, x, gain, bias, eps);
}

FeedForward FeedForward::create(ParameterSet& params, const std::string& name,
                                const std::vector<std::size_t>& widths, Rng& rng) {
  if (widths.size() < 2) fail(ErrorCode::InvalidArgument, "feed-forward needs >= 2 widths");
  FeedForward f;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    f.layers.push_back(Linear::create(params, name + "." + std::to_string(i),
                                      widths[i], widths[i + 1], rng));
  }
  return f;
}

Tensor FeedForward::forward(Tape& tape, const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(tape, h);
    if (i + 1 < layers.size()) h = ad::gelu(tape, h);
  }
  return h;
}

}  // namespace rheo::nn
