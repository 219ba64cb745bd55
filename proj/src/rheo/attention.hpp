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

// Softmax-free attention. Rows are points, columns are features; the 1/n
// factor is the quadrature weight over the n key/value points.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rheo/nn.hpp"
#include "rheo/tensor.hpp"

namespace rheo::attention {

using ad::Tape;
using ad::Tensor;

enum class Kind { Fourier, Galerkin };

Kind parse_kind(std::string_view name);
std::string kind_name(Kind kind);

// (Q Kᵀ) V / n
Tensor fourier_attention(Tape& tape, const Tensor& q, const Tensor& k,
                         const Tensor& v);
// Q (Kᵀ V) / n
Tensor galerkin_attention(Tape& tape, const Tensor& q, const Tensor& k,
                          const Tensor& v);
// Q has m rows, K and V have n rows.
Tensor cross_attention(Tape& tape, const Tensor& q, const Tensor& k,
                       const Tensor& v);

// Reference (Q Kᵀ) V / n without the tape, formed in row blocks so the n×m
// score matrix is never held at once. Used to compare costs.
std::vector<double> quadratic_attention_reference(const Tensor& q,
                                                  const Tensor& k,
                                                  const Tensor& v,
                                                  std::size_t block_rows = 256);

struct FourierFeatureMap {
  Tensor B;  // d1 x d2, frozen
  double sigma = 1.0;

  static FourierFeatureMap create(std::size_t d1, std::size_t d2, double sigma,
                                  std::uint64_t seed);
  std::size_t in_dim() const { return B.rows(); }
  std::size_t features() const { return B.cols(); }
};

// [cos(2π Y B), sin(2π Y B)], m x 2*d2. Constant: carries no history.
Tensor random_fourier_project(const Tensor& y, const FourierFeatureMap& map);

struct AttentionConfig {
  std::size_t d_model = 96;
  std::size_t n_heads = 4;
  Kind kind = Kind::Galerkin;
  double eps = 1e-5;

  void validate() const;
  std::size_t head_dim() const { return d_model / n_heads; }
};

// Q, K, V and output projections; heads take contiguous column slices.
// Galerkin heads layer-normalize K and V rows, Fourier heads Q and K rows.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  static MultiHeadAttention create(nn::ParameterSet& params,
                                   const std::string& name,
                                   const AttentionConfig& config, nn::Rng& rng);

  // Self-attention when `source` and `context` are the same tensor.
  Tensor forward(Tape& tape, const Tensor& source, const Tensor& context) const;
  const AttentionConfig& config() const { return config_; }

 private:
  AttentionConfig config_;
  nn::Linear wq_, wk_, wv_, wo_;
  std::vector<nn::LayerNorm> norm_first_, norm_second_;
};

}  // namespace rheo::attention
