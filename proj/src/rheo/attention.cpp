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

#include "rheo/attention.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rheo/error.hpp"

namespace rheo::attention {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

void require_matrix(const Tensor& t, const char* what) {
  if (!t.defined() || t.rank() != 2) {
    fail(ErrorCode::ShapeMismatch, std::string(what) + " must be a matrix");
  }
}

void check_qkv(const Tensor& q, const Tensor& k, const Tensor& v, bool same_rows) {
  require_matrix(q, "Q");
  require_matrix(k, "K");
  require_matrix(v, "V");
  if (k.rows() != v.rows()) {
    fail(ErrorCode::ShapeMismatch, "K and V row counts differ: " +
                                       ad::shape_string(k.shape()) + " vs " +
                                       ad::shape_string(v.shape()));
  }
  if (q.cols() != k.cols()) {
    fail(ErrorCode::ShapeMismatch, "Q and K widths differ: " +
                                       ad::shape_string(q.shape()) + " vs " +
                                       ad::shape_string(k.shape()));
  }
  if (same_rows && q.rows() != k.rows()) {
    fail(ErrorCode::ShapeMismatch, "self-attention needs equal row counts");
  }
  if (k.rows() == 0) fail(ErrorCode::ShapeMismatch, "attention over zero points");
}

}  // namespace

Kind parse_kind(std::string_view name) {
  if (name == "galerkin") return Kind::Galerkin;
  if (name == "fourier") return Kind::Fourier;
  fail(ErrorCode::Configuration, "unknown attention kind '" + std::string(name) + "'");
}

std::string kind_name(Kind kind) {
  return kind == Kind::Galerkin ? "galerkin" : "fourier";
}

Tensor fourier_attention(Tape& tape, const Tensor& q, const Tensor& k,
                         const Tensor& v) {
  check_qkv(q, k, v, true);
  const double inv_n = 1.0 / static_cast<double>(k.rows());
  return ad::scale(tape, ad::matmul(tape, ad::matmul(tape, q, ad::transpose(tape, k)), v),
                   inv_n);
}

Tensor galerkin_attention(Tape& tape, const Tensor& q, const Tensor& k,
                          const Tensor& v) {
  check_qkv(q, k, v, true);
  const double inv_n = 1.0 / static_cast<double>(k.rows());
  return ad::matmul(tape, q, ad::scale(tape, ad::matmul(tape, ad::transpose(tape, k), v), inv_n));
}

Tensor cross_attention(Tape& tape, const Tensor& q, const Tensor& k,
                       const Tensor& v) {
  check_qkv(q, k, v, false);
  const double inv_n = 1.0 / static_cast<double>(k.rows());
  return ad::matmul(tape, q, ad::scale(tape, ad::matmul(tape, ad::transpose(tape, k), v), inv_n));
}

std::vector<double> quadratic_attention_reference(const Tensor& q, const Tensor& k,
                                                  const Tensor& v,
                                                  std::size_t block_rows) {
  check_qkv(q, k, v, false);
  const auto m = static_cast<Eigen::Index>(q.rows());
  const auto n = static_cast<Eigen::Index>(k.rows());
  const auto d = static_cast<Eigen::Index>(q.cols());
  const auto dv = static_cast<Eigen::Index>(v.cols());
  ConstMap Q(q.data().data(), m, d);
  ConstMap K(k.data().data(), n, d);
  ConstMap V(v.data().data(), n, dv);
  std::vector<double> out(static_cast<std::size_t>(m * dv));
  Eigen::Map<RowMat> Z(out.data(), m, dv);
  const auto block = static_cast<Eigen::Index>(std::max<std::size_t>(block_rows, 1));
  RowMat scores;
  for (Eigen::Index r = 0; r < m; r += block) {
    const Eigen::Index rows = std::min(block, m - r);
    scores.noalias() = Q.middleRows(r, rows) * K.transpose();
    Z.middleRows(r, rows).noalias() = scores * V;
  }
  Z /= static_cast<double>(n);
  return out;
}

FourierFeatureMap FourierFeatureMap::create(std::size_t d1, std::size_t d2,
                                            double sigma, std::uint64_t seed) {
  if (d1 == 0 || d2 == 0) fail(ErrorCode::Configuration, "Fourier feature dims must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    fail(ErrorCode::Configuration, "Fourier feature sigma must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<double> b(d1 * d2);
  for (auto& x : b) x = dist(rng);
  FourierFeatureMap map;
  map.B = Tensor::from({d1, d2}, b);
  map.sigma = sigma;
  return map;
}

Tensor random_fourier_project(const Tensor& y, const FourierFeatureMap& map) {
  if (!map.B.defined()) fail(ErrorCode::State, "Fourier feature map is not initialized");
  require_matrix(y, "Y");
  const std::size_t m = y.rows();
  const std::size_t d1 = map.in_dim();
  const std::size_t d2 = map.features();
  if (y.cols() != d1) {
    fail(ErrorCode::ShapeMismatch, "coordinates " + ad::shape_string(y.shape()) +
                                       " do not match B " + ad::shape_string(map.B.shape()));
  }
  ad::Storage out(m * 2 * d2);
  const auto yd = y.data();
  const auto bd = map.B.data();
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d2; ++j) {
      double phase = 0.0;
      for (std::size_t a = 0; a < d1; ++a) phase += yd[i * d1 + a] * bd[a * d2 + j];
      phase *= two_pi;
      out[i * 2 * d2 + j] = std::cos(phase);
      out[i * 2 * d2 + d2 + j] = std::sin(phase);
    }
  }
  return ad::make_result({m, 2 * d2}, std::move(out));
}

void AttentionConfig::validate() const {
  if (d_model == 0 || n_heads == 0) {
    fail(ErrorCode::Configuration, "d_model and n_heads must be positive");
  }
  if (d_model % n_heads != 0) {
    fail(ErrorCode::Configuration, "d_model " + std::to_string(d_model) +
                                       " is not divisible by n_heads " +
                                       std::to_string(n_heads));
  }
}

MultiHeadAttention MultiHeadAttention::create(nn::ParameterSet& params,
                                              const std::string& name,
                                              const AttentionConfig& config,
                                              nn::Rng& rng) {
  config.validate();
  MultiHeadAttention a;
  a.config_ = config;
  const std::size_t d = config.d_model;
  a.wq_ = nn::Linear::create(params, name + ".q", d, d, rng);
  a.wk_ = nn::Linear::create(params, name + ".k", d, d, rng);
  a.wv_ = nn::Linear::create(params, name + ".v", d, d, rng);
  a.wo_ = nn::Linear::create(params, name + ".o", d, d, rng);
  const bool galerkin = config.kind == Kind::Galerkin;
  const std::string first = galerkin ? ".norm_k" : ".norm_q";
  const std::string second = galerkin ? ".norm_v" : ".norm_k";
  for (std::size_t h = 0; h < config.n_heads; ++h) {
    const std::string suffix = "." + std::to_string(h);
    a.norm_first_.push_back(
        nn::LayerNorm::create(params, name + first + suffix, config.head_dim(), config.eps));
    a.norm_second_.push_back(
        nn::LayerNorm::create(params, name + second + suffix, config.head_dim(), config.eps));
  }
  return a;
}

Tensor MultiHeadAttention::forward(Tape& tape, const Tensor& source,
                                   const Tensor& context) const {
  const Tensor q = wq_.forward(tape, source);
  const Tensor k = wk_.forward(tape, context);
  const Tensor v = wv_.forward(tape, context);
  const std::size_t dh = config_.head_dim();
  const bool self = source.node() == context.node();
  std::vector<Tensor> heads;
  heads.reserve(config_.n_heads);
  for (std::size_t h = 0; h < config_.n_heads; ++h) {
    Tensor qh = ad::slice_cols(tape, q, h * dh, dh);
    Tensor kh = ad::slice_cols(tape, k, h * dh, dh);
    Tensor vh = ad::slice_cols(tape, v, h * dh, dh);
    if (config_.kind == Kind::Galerkin) {
      kh = norm_first_[h].forward(tape, kh);
      vh = norm_second_[h].forward(tape, vh);
      heads.push_back(self ? galerkin_attention(tape, qh, kh, vh)
                           : cross_attention(tape, qh, kh, vh));
    } else {
      qh = norm_first_[h].forward(tape, qh);
      kh = norm_second_[h].forward(tape, kh);
      if (self) {
        heads.push_back(fourier_attention(tape, qh, kh, vh));
      } else {
        // Same kernel with m query rows.
        const double inv_n = 1.0 / static_cast<double>(kh.rows());
        heads.push_back(ad::scale(
            tape, ad::matmul(tape, ad::matmul(tape, qh, ad::transpose(tape, kh)), vh), inv_n));
      }
    }
  }
  Tensor z = heads.size() == 1 ? heads.front() : ad::concat_cols(tape, heads);
  return wo_.forward(tape, z);
}

}  // namespace rheo::attention
