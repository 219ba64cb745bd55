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

// Dataset generators and the train pipeline shared by the C API and tests.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "rheo/constitutive.hpp"
#include "rheo/field.hpp"
#include "rheo/flow1d.hpp"
#include "rheo/training.hpp"

namespace rheo::workflows {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

struct RheometricOptions {
  std::string model = "tevp";    // tevp | giesekus | oldroydb
  std::string protocol = "grf";  // grf | oscillatory | shear | extension
  std::size_t n_samples = 16;
  std::size_t n_points = 64;
  double t_end = 20.0;
  std::uint64_t seed = 0;
  double grf_length_scale = 0.0;  // 0 selects 0.1 * t_end
  double grf_amplitude = 1.0;
  double grf_extension_amplitude = 0.2;  // second field, tensorial models
  double gamma0_min = 0.5;
  double gamma0_max = 1.5;
  double omega_min = 0.5;
  double omega_max = 1.5;
  double rate_min = 0.1;
  double rate_max = 2.0;
  std::size_t substeps = 8;
  constitutive::TevpParams tevp;
  constitutive::GiesekusParams giesekus{1.0, 0.1, 1.0, 0.2};
  constitutive::OldroydBParams oldroydb{0.1, 0.01, 1.0};

  void validate() const;
  nlohmann::json to_json() const;
  static RheometricOptions from_json(const nlohmann::json& j);
};

// coord = time; one step per sample. TEVP channels: gamma_dot, sigma_12,
// lambda. Tensorial channels: eps_dot, gamma_dot, sigma_11, sigma_22,
// sigma_12, sigma_21.
Dataset generate_rheometric(const RheometricOptions& options);

struct Flow1dOptions {
  std::size_t n_samples = 64;
  double dpdx_min = -6.0;
  double dpdx_max = -2.0;
  std::vector<double> dpdx_values;  // overrides the uniform range when set
  flow1d::ChannelConfig base;

  std::vector<double> conditions() const;
  nlohmann::json to_json() const;
  static Flow1dOptions from_json(const nlohmann::json& j);
};

Dataset generate_flow1d(const Flow1dOptions& options);

struct TrainJob {
  model::ModelConfig model;
  training::TaskConfig task;
  training::TrainConfig train;
  double validation_fraction = 0.1;
  double test_fraction = 0.1;

  nlohmann::json to_json() const;
  // Missing static-task channels are taken from the dataset attributes.
  static TrainJob from_json(const nlohmann::json& j);
};

struct TrainOutcome {
  std::unique_ptr<training::Surrogate> surrogate;  // best-validation weights
  training::FitState state;
  std::vector<std::vector<double>> final_weights;
  training::Split split;
};

TrainOutcome train_surrogate(const Dataset& data, TrainJob job,
                             const std::function<void(const training::EpochRecord&)>& on_epoch = {});

std::string history_csv(const std::vector<training::EpochRecord>& history);

}  // namespace rheo::workflows
