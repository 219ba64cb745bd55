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
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace rheo {

// One spatio-temporal record: n_steps snapshots of n_channels fields on a
// fixed point cloud. values are laid out [step][point][channel].
struct FieldSequence {
  std::size_t coord_dim = 1;
  std::size_t n_points = 0;
  std::size_t n_steps = 0;
  double dt = 1.0;
  std::vector<double> coords;  // [point][dim]
  std::vector<std::string> channels;
  std::vector<std::string> units;
  std::vector<double> values;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t n_channels() const { return channels.size(); }
  double& at(std::size_t step, std::size_t point, std::size_t channel) {
    return values[(step * n_points + point) * n_channels() + channel];
  }
  double at(std::size_t step, std::size_t point, std::size_t channel) const {
    return values[(step * n_points + point) * n_channels() + channel];
  }
};

struct SampleBlock {
  std::vector<double> values;  // [step][point][channel]
  nlohmann::json metadata = nlohmann::json::object();
};

// A set of samples sharing one grid, channel list and time step. This is the
// in-memory form of the dataset file.
struct Dataset {
  std::size_t coord_dim = 1;
  std::size_t n_points = 0;
  std::size_t n_steps = 0;
  double dt = 1.0;
  std::vector<double> coords;
  std::vector<std::string> channels;
  std::vector<std::string> units;
  std::vector<SampleBlock> samples;
  // Header keys this library does not interpret, preserved verbatim.
  nlohmann::json attributes = nlohmann::json::object();

  std::size_t n_channels() const { return channels.size(); }
  std::size_t n_samples() const { return samples.size(); }
  std::size_t block_size() const { return n_steps * n_points * n_channels(); }
  std::size_t channel_index(const std::string& name) const;

  double value(std::size_t sample, std::size_t step, std::size_t point,
               std::size_t channel) const {
    return samples[sample].values[(step * n_points + point) * n_channels() + channel];
  }

  // Structural checks: sizes, unique channel names, dt > 0. Throws rheo::Error.
  void validate() const;

  FieldSequence sequence(std::size_t sample) const;
  Dataset subset(std::span<const std::size_t> indices) const;
  static Dataset from_sequences(const std::vector<FieldSequence>& sequences);
};

}  // namespace rheo
