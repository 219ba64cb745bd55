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

#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rheo/tensor.hpp"

namespace rheo::nn {

using ad::Tape;
using ad::Tensor;

// Named tensors in creation order. Trainable entries are leaves with
// requires_grad; buffers are frozen.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool trainable = true;
  };

  Tensor add(const std::string& name, Tensor t, bool trainable = true);
  const Tensor& get(const std::string& name) const;
  Tensor* find(const std::string& name);

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Tensor> trainable() const;
  std::size_t trainable_count() const;

  void zero_grad();

  // Flat copies of every trainable tensor, in order.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<Entry> entries_;
};

using Rng = std::mt19937_64;

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // out

  static Linear create(ParameterSet& params, const std::string& name,
                       std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(Tape& tape, const Tensor& x) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  double eps = 1e-5;

  static LayerNorm create(ParameterSet& params, const std::string& name,
                          std::size_t width, double eps = 1e-5);
  Tensor forward(Tape& tape, const Tensor& x) const;
};

// Linear -> GELU -> ... -> Linear, applied independently to every row.
struct FeedForward {
  std::vector<Linear> layers;

  // widths = {in, hidden..., out}; at least two entries.
  static FeedForward create(ParameterSet& params, const std::string& name,
                            const std::vector<std::size_t>& widths, Rng& rng);
  Tensor forward(Tape& tape, const Tensor& x) const;
};

}  // namespace rheo::nn
