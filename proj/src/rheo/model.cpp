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

#include "rheo/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "rheo/error.hpp"

namespace rheo::model {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require_rows(const Tensor& t, std::size_t cols, const char* what) {
  if (!t.defined() || t.rank() != 2 || t.cols() != cols) {
    fail(ErrorCode::ShapeMismatch,
         std::string(what) + " must have " + std::to_string(cols) + " columns, got " +
             (t.defined() ? ad::shape_string(t.shape()) : std::string("undefined")));
  }
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Schema, std::string("model config key '") + key + "': " + e.what());
  }
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) fail(ErrorCode::Configuration, std::string("model ") + name + " must be positive");
  };
  positive(in_channels, "in_channels");
  positive(out_channels, "out_channels");
  positive(coord_dim, "coord_dim");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(n_encoder_layers, "n_encoder_layers");
  positive(ffn_width, "ffn_width");
  positive(propagator_width, "propagator_width");
  positive(propagator_depth, "propagator_depth");
  positive(decoder_width, "decoder_width");
  positive(fourier_features, "fourier_features");
  if (d_model % n_heads != 0) {
    fail(ErrorCode::Configuration, "d_model must be divisible by n_heads");
  }
  if (!(fourier_sigma > 0.0)) fail(ErrorCode::Configuration, "fourier_sigma must be positive");
  if (!(layer_norm_eps > 0.0)) fail(ErrorCode::Configuration, "layer_norm_eps must be positive");
  if (nonlinearity != "gelu") {
    fail(ErrorCode::Configuration, "unsupported nonlinearity '" + nonlinearity + "'");
  }
  if (!layer_kinds.empty() && layer_kinds.size() != n_encoder_layers) {
    fail(ErrorCode::Configuration, "layer_kinds must list one kind per encoder layer");
  }
}

attention::Kind ModelConfig::layer_kind(std::size_t layer) const {
  return layer_kinds.empty() ? attention_kind : layer_kinds.at(layer);
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : layer_kinds) kinds.push_back(attention::kind_name(k));
  return {{"in_channels", in_channels},
          {"out_channels", out_channels},
          {"coord_dim", coord_dim},
          {"d_model", d_model},
          {"n_heads", n_heads},
          {"n_encoder_layers", n_encoder_layers},
          {"attention", attention::kind_name(attention_kind)},
          {"layer_kinds", kinds},
          {"ffn_width", ffn_width},
          {"propagator_width", propagator_width},
          {"propagator_depth", propagator_depth},
          {"decoder_width", decoder_width},
          {"fourier_features", fourier_features},
          {"fourier_sigma", fourier_sigma},
          {"nonlinearity", nonlinearity},
          {"layer_norm_eps", layer_norm_eps}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::Schema, "model config must be an object");
  ModelConfig c;
  c.in_channels = get_or(j, "in_channels", c.in_channels);
  c.out_channels = get_or(j, "out_channels", c.out_channels);
  c.coord_dim = get_or(j, "coord_dim", c.coord_dim);
  c.d_model = get_or(j, "d_model", c.d_model);
  c.n_heads = get_or(j, "n_heads", c.n_heads);
  c.n_encoder_layers = get_or(j, "n_encoder_layers", c.n_encoder_layers);
  c.attention_kind = attention::parse_kind(get_or<std::string>(j, "attention", "galerkin"));
  for (const auto& k : get_or(j, "layer_kinds", nlohmann::json::array())) {
    if (!k.is_string()) fail(ErrorCode::Schema, "layer_kinds entries must be strings");
    c.layer_kinds.push_back(attention::parse_kind(k.get<std::string>()));
  }
  c.ffn_width = get_or(j, "ffn_width", c.ffn_width);
  c.propagator_width = get_or(j, "propagator_width", c.propagator_width);
  c.propagator_depth = get_or(j, "propagator_depth", c.propagator_depth);
  c.decoder_width = get_or(j, "decoder_width", c.decoder_width);
  c.fourier_features = get_or(j, "fourier_features", c.fourier_features);
  c.fourier_sigma = get_or(j, "fourier_sigma", c.fourier_sigma);
  c.nonlinearity = get_or(j, "nonlinearity", c.nonlinearity);
  c.layer_norm_eps = get_or(j, "layer_norm_eps", c.layer_norm_eps);
  c.validate();
  return c;
}

OperatorTransformer::OperatorTransformer(const ModelConfig& config, std::uint64_t seed)
    : config_(config), seed_(seed) {
  config_.validate();
  nn::Rng rng(seed);
  const std::size_t d = config_.d_model;
  const double eps = config_.layer_norm_eps;

  lift_ = nn::FeedForward::create(params_, "encoder.lift",
                                  {config_.in_channels + config_.coord_dim, d, d}, rng);
  for (std::size_t l = 0; l < config_.n_encoder_layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l);
    EncoderLayer layer;
    layer.attn = attention::MultiHeadAttention::create(
        params_, p + ".attn", {d, config_.n_heads, config_.layer_kind(l), eps}, rng);
    layer.norm1 = nn::LayerNorm::create(params_, p + ".norm1", d, eps);
    layer.ffn = nn::FeedForward::create(params_, p + ".ffn", {d, config_.ffn_width, d}, rng);
    layer.norm2 = nn::LayerNorm::create(params_, p + ".norm2", d, eps);
    layers_.push_back(std::move(layer));
  }

  fourier_ = attention::FourierFeatureMap::create(config_.coord_dim, config_.fourier_features,
                                                  config_.fourier_sigma, rng());
  params_.add("decoder.fourier.B", fourier_.B, false);
  query_mlp_ = nn::FeedForward::create(params_, "decoder.query",
                                       {2 * config_.fourier_features, d, d}, rng);
  cross_ = attention::MultiHeadAttention::create(
      params_, "decoder.cross", {d, config_.n_heads, attention::Kind::Galerkin, eps}, rng);

  prop_norm_ = nn::LayerNorm::create(params_, "propagator.norm", d, eps);
  std::vector<std::size_t> widths{d};
  for (std::size_t i = 1; i < config_.propagator_depth; ++i) widths.push_back(config_.propagator_width);
  widths.push_back(d);
  prop_ffn_ = nn::FeedForward::create(params_, "propagator.ffn", widths, rng);

  readout_ = nn::FeedForward::create(params_, "readout",
                                     {d, config_.decoder_width, config_.out_channels}, rng);
}

Tensor OperatorTransformer::encode(Tape& tape, const Tensor& values,
                                   const Tensor& coords) const {
  require_rows(values, config_.in_channels, "encoder values");
  require_rows(coords, config_.coord_dim, "encoder coordinates");
  if (values.rows() != coords.rows()) {
    fail(ErrorCode::ShapeMismatch, "encoder values and coordinates have different row counts");
  }
  if (values.rows() == 0) fail(ErrorCode::ShapeMismatch, "encoder needs at least one point");
  if (!all_finite(values.data()) || !all_finite(coords.data())) {
    fail(ErrorCode::InvalidArgument, "encoder inputs contain non-finite values");
  }
  Tensor x = lift_.forward(tape, ad::concat_cols(tape, {values, coords}));
  for (const auto& layer : layers_) {
    x = layer.norm1.forward(tape, ad::add(tape, x, layer.attn.forward(tape, x, x)));
    x = layer.norm2.forward(tape, ad::add(tape, x, layer.ffn.forward(tape, x)));
  }
  return x;
}

LatentState OperatorTransformer::make_initial_latent(Tape& tape, const Tensor& encoded,
                                                     const Tensor& query_coords) const {
  require_rows(encoded, config_.d_model, "encoded features");
  require_rows(query_coords, config_.coord_dim, "query coordinates");
  if (!all_finite(query_coords.data())) {
    fail(ErrorCode::InvalidArgument, "query coordinates contain non-finite values");
  }
  const Tensor gamma = attention::random_fourier_project(query_coords, fourier_);
  const Tensor q = query_mlp_.forward(tape, gamma);
  return {ad::add(tape, q, cross_.forward(tape, q, encoded)), 0};
}

Tensor OperatorTransformer::propagator_branch(Tape& tape, const Tensor& z) const {
  return prop_ffn_.forward(tape, prop_norm_.forward(tape, z));
}

LatentState OperatorTransformer::propagate(Tape& tape, const LatentState& state) const {
  require_rows(state.z, config_.d_model, "latent state");
  LatentState next{ad::add(tape, state.z, propagator_branch(tape, state.z)), state.t_index + 1};
  if (!all_finite(next.z.data())) {
    fail(ErrorCode::Divergence,
         "latent state diverged at step " + std::to_string(next.t_index));
  }
  return next;
}

Tensor OperatorTransformer::decode_field(Tape& tape, const LatentState& state) const {
  require_rows(state.z, config_.d_model, "latent state");
  if (!all_finite(state.z.data())) {
    fail(ErrorCode::Numerical, "cannot decode a non-finite latent state");
  }
  return readout_.forward(tape, state.z);
}

void OperatorTransformer::rollout_each(Tape& tape, const Tensor& encoder_input,
                                       const Tensor& coords, const Tensor& query_coords,
                                       std::size_t n_future, const StepSink& sink) const {
  LatentState state = make_initial_latent(tape, encode(tape, encoder_input, coords), query_coords);
  for (std::size_t t = 0; t < n_future; ++t) {
    state = propagate(tape, state);
    const Tensor field = decode_field(tape, state);
    sink(state, field);
  }
}

std::vector<Tensor> OperatorTransformer::rollout(Tape& tape,
                                                 const std::vector<Tensor>& snapshots,
                                                 const Tensor& coords,
                                                 const Tensor& query_coords,
                                                 std::size_t n_future) const {
  const Tensor stacked = stack_snapshots(tape, snapshots);
  std::vector<Tensor> out;
  out.reserve(n_future);
  rollout_each(tape, stacked, coords, query_coords, n_future,
               [&](const LatentState&, const Tensor& field) { out.push_back(field); });
  return out;
}

double OperatorTransformer::propagator_spectral_norm(const Tensor& z) {
  require_rows(z, config_.d_model, "latent state");
  const std::size_t m = z.rows();
  const std::size_t d = config_.d_model;
  // J[r] is d x d for row r; column j of the output gives row j of every J[r].
  std::vector<Eigen::MatrixXd> jac(m, Eigen::MatrixXd(d, d));
  for (std::size_t j = 0; j < d; ++j) {
    Tape tape;
    Tensor zin = Tensor::from(z.shape(), z.data(), true);
    Tensor out = ad::add(tape, zin, propagator_branch(tape, zin));
    tape.backward(ad::sum(tape, ad::slice_cols(tape, out, j, 1)));
    const auto g = zin.grad();
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t i = 0; i < d; ++i) jac[r](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = g[r * d + i];
    }
  }
  params_.zero_grad();
  double worst = 0.0;
  for (const auto& J : jac) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    worst = std::max(worst, svd.singularValues()(0));
  }
  return worst;
}

Tensor stack_snapshots(Tape& tape, const std::vector<Tensor>& snapshots) {
  if (snapshots.empty()) fail(ErrorCode::InvalidArgument, "rollout needs at least one snapshot");
  const std::size_t n = snapshots.front().rows();
  for (const auto& s : snapshots) {
    if (s.rank() != 2 || s.rows() != n || s.cols() != snapshots.front().cols()) {
      fail(ErrorCode::ShapeMismatch, "snapshots must share one n x c shape");
    }
  }
  return snapshots.size() == 1 ? snapshots.front() : ad::concat_cols(tape, snapshots);
}

}  // namespace rheo::model
