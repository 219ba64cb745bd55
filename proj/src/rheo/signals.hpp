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

// Deformation-history generators.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rheo/constitutive.hpp"

namespace rheo::signals {

// Uniform grid of n points covering [0, t_end].
std::vector<double> time_grid(std::size_t n, double t_end);

struct GrfConfig {
  std::size_t n_points = 64;
  double t_end = 10.0;
  double length_scale = 1.0;  // kernel correlation time, s
  double amplitude = 1.0;     // field standard deviation, 1/s
  double jitter = 1e-10;      // added to the unit-amplitude kernel diagonal

  // length_scale = 0.1 * t_end, amplitude 1, jitter 1e-10.
  static GrfConfig defaults(std::size_t n_points, double t_end);
  void validate() const;
};

// Zero-mean stationary Gaussian process with squared-exponential covariance
// amplitude^2 * exp(-(ti - tj)^2 / (2 l^2)) on the uniform grid. The Cholesky
// factor is computed once per sampler.
class GrfSampler {
 public:
  explicit GrfSampler(const GrfConfig& config);

  std::vector<double> sample(std::uint64_t seed) const;
  const GrfConfig& config() const { return config_; }

 private:
  GrfConfig config_;
  std::vector<double> factor_;  // row-major lower-triangular, n x n
};

std::vector<double> sample_grf(const GrfConfig& config, std::uint64_t seed);

// Kernel value between two times, for oracles.
double grf_covariance(const GrfConfig& config, double ti, double tj);

struct OscillatoryShear {
  std::vector<double> gamma_dot;
  std::vector<double> gamma;
};

// gamma = gamma0 sin(omega t), gamma_dot = gamma0 omega cos(omega t).
OscillatoryShear oscillatory_shear(double gamma0, double omega,
                                   std::span<const double> grid);

enum class FlowKind { SimpleShear, PlanarExtension };

std::vector<constitutive::VelocityGradient2> homogeneous_flow(
    FlowKind kind, double rate, std::span<const double> grid);

}  // namespace rheo::signals
