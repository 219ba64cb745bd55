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

#include "rheo/signals.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <random>
#include <string>

#include "rheo/error.hpp"

namespace rheo::signals {

std::vector<double> time_grid(std::size_t n, double t_end) {
  if (n < 2) fail(ErrorCode::InvalidArgument, "time grid needs at least 2 points");
  if (!(t_end > 0.0)) fail(ErrorCode::InvalidArgument, "t_end must be positive");
  std::vector<double> t(n);
  const double dt = t_end / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) t[i] = dt * static_cast<double>(i);
  return t;
}

GrfConfig GrfConfig::defaults(std::size_t n_points, double t_end) {
  GrfConfig c;
  c.n_points = n_points;
  c.t_end = t_end;
  c.length_scale = 0.1 * t_end;
  return c;
}

void GrfConfig::validate() const {
  if (n_points < 2) fail(ErrorCode::Configuration, "GRF n_points must be >= 2");
  if (!(t_end > 0.0)) fail(ErrorCode::Configuration, "GRF t_end must be positive");
  if (!(length_scale > 0.0)) fail(ErrorCode::Configuration, "GRF length_scale must be positive");
  if (!(amplitude >= 0.0)) fail(ErrorCode::Configuration, "GRF amplitude must be non-negative");
  if (!(jitter > 0.0)) fail(ErrorCode::Configuration, "GRF jitter must be positive");
}

double grf_covariance(const GrfConfig& config, double ti, double tj) {
  const double d = ti - tj;
  return config.amplitude * config.amplitude *
         std::exp(-d * d / (2.0 * config.length_scale * config.length_scale));
}

GrfSampler::GrfSampler(const GrfConfig& config) : config_(config) {
  config_.validate();
  const auto n = config_.n_points;
  const auto t = time_grid(n, config_.t_end);
  // Factor the unit-amplitude kernel so that amplitude 0 gives exact zeros.
  Eigen::MatrixXd cov(n, n);
  const double inv2l2 = 1.0 / (2.0 * config_.length_scale * config_.length_scale);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = t[i] - t[j];
      cov(i, j) = std::exp(-d * d * inv2l2);
    }
    cov(i, i) += config_.jitter;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::Configuration,
         "GRF covariance is not positive definite with jitter " +
             std::to_string(config_.jitter) + "; increase jitter or length scale");
  }
  const Eigen::MatrixXd lower = llt.matrixL();
  factor_.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) factor_[i * n + j] = lower(i, j);
}

std::vector<double> GrfSampler::sample(std::uint64_t seed) const {
  const auto n = config_.n_points;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(n);
  for (auto& v : z) v = normal(rng);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) s += factor_[i * n + j] * z[j];
    out[i] = config_.amplitude * s;
  }
  return out;
}

std::vector<double> sample_grf(const GrfConfig& config, std::uint64_t seed) {
  return GrfSampler(config).sample(seed);
}

OscillatoryShear oscillatory_shear(double gamma0, double omega,
                                   std::span<const double> grid) {
  if (!(omega > 0.0)) fail(ErrorCode::InvalidArgument, "omega must be positive");
  OscillatoryShear out;
  out.gamma_dot.reserve(grid.size());
  out.gamma.reserve(grid.size());
  for (double t : grid) {
    out.gamma.push_back(gamma0 * std::sin(omega * t));
    out.gamma_dot.push_back(gamma0 * omega * std::cos(omega * t));
  }
  return out;
}

std::vector<constitutive::VelocityGradient2> homogeneous_flow(
    FlowKind kind, double rate, std::span<const double> grid) {
  constitutive::VelocityGradient2 L;
  switch (kind) {
    case FlowKind::SimpleShear:
      L.xy = rate;
      break;
    case FlowKind::PlanarExtension:
      L.xx = rate;
      L.yy = -rate;
      break;
  }
  return std::vector<constitutive::VelocityGradient2>(grid.size(), L);
}

}  // namespace rheo::signals
