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

// Encoder / decoder / latent propagator operator network.
//
//   encode:   [a(x), x] -> lift -> L x (self-attention, add & norm, FFN, add & norm)
//   decode:   y -> Fourier features -> MLP -> q;  z0 = q + CrossAttn(q, encoded)
//   march:    z_{t+1} = z_t + N(z_t), N point-wise and shared over rows and steps
//   readout:  point-wise MLP d_model -> out_channels

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rheo/attention.hpp"
#include "rheo/nn.hpp"
#include "rheo/tensor.hpp"

namespace rheo::model {

using ad::Tape;
using ad::Tensor;

struct ModelConfig {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t coord_dim = 1;
  std::size_t d_model = 96;
  std::size_t n_heads = 4;
  std::size_t n_encoder_layers = 3;
  attention::Kind attention_kind = attention::Kind::Galerkin;
  // Optional per-layer override; empty means attention_kind everywhere.
  std::vector<attention::Kind> layer_kinds;
  std::size_t ffn_width = 192;
  std::size_t propagator_width = 192;
  std::size_t propagator_depth = 2;  // linear layers in N
  std::size_t decoder_width = 96;
  std::size_t fourier_features = 48;  // d2
  double fourier_sigma = 1.0;
  std::string nonlinearity = "gelu";
  double layer_norm_eps = 1e-5;

  void validate() const;
  attention::Kind layer_kind(std::size_t layer) const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct LatentState {
  Tensor z;  // m x d_model
  std::size_t t_index = 0;
};

class OperatorTransformer {
 public:
  OperatorTransformer(const ModelConfig& config, std::uint64_t seed);
  OperatorTransformer(const OperatorTransformer&) = delete;
  OperatorTransformer& operator=(const OperatorTransformer&) = delete;
  OperatorTransformer(OperatorTransformer&&) = default;
  OperatorTransformer& operator=(OperatorTransformer&&) = default;

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  const attention::FourierFeatureMap& fourier_map() const { return fourier_; }

  // values: n x in_channels, coords: n x coord_dim (scaled to [0,1]).
  Tensor encode(Tape& tape, const Tensor& values, const Tensor& coords) const;
  // query_coords: m x coord_dim (scaled to [0,1]).
  LatentState make_initial_latent(Tape& tape, const Tensor& encoded,
                                  const Tensor& query_coords) const;
  LatentState propagate(Tape& tape, const LatentState& state) const;
  Tensor decode_field(Tape& tape, const LatentState& state) const;

  using StepSink = std::function<void(const LatentState&, const Tensor&)>;

  // Encodes once, then calls sink after each of n_future propagate+decode
  // steps. Nothing from earlier steps is kept alive by this function.
  void rollout_each(Tape& tape, const Tensor& encoder_input, const Tensor& coords,
                    const Tensor& query_coords, std::size_t n_future,
                    const StepSink& sink) const;

  // snapshots: k tensors of n x c, channel-stacked into n x (k c).
  std::vector<Tensor> rollout(Tape& tape, const std::vector<Tensor>& snapshots,
                              const Tensor& coords, const Tensor& query_coords,
                              std::size_t n_future) const;

  // Largest spectral norm over rows of the Jacobian of z + N(z). Leaves
  // parameter gradients zeroed.
  double propagator_spectral_norm(const Tensor& z);

 private:
  struct EncoderLayer {
    attention::MultiHeadAttention attn;
    nn::LayerNorm norm1;
    nn::FeedForward ffn;
    nn::LayerNorm norm2;
  };

  Tensor propagator_branch(Tape& tape, const Tensor& z) const;

  ModelConfig config_;
  std::uint64_t seed_ = 0;
  nn::ParameterSet params_;
  nn::FeedForward lift_;
  std::vector<EncoderLayer> layers_;
  attention::FourierFeatureMap fourier_;
  nn::FeedForward query_mlp_;
  attention::MultiHeadAttention cross_;
  nn::LayerNorm prop_norm_;
  nn::FeedForward prop_ffn_;
  nn::FeedForward readout_;
};

// Row-wise concatenation of k snapshots (each n x c) into n x (k c).
Tensor stack_snapshots(Tape& tape, const std::vector<Tensor>& snapshots);

}  // namespace rheo::model
