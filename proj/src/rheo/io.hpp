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

// File formats.
//
// Dataset file:
//   "RHEO1" | u64 header bytes | JSON header | f64 coords | f64 sample blocks
// Checkpoint file:
//   "RHEOCKPT1" | u64 header bytes | JSON header | u64 array count |
//   per array: u64 name bytes, name, u64 rank, u64 dims..., f64 data
// Integers and floats are little-endian. Readers require the payload to be
// consumed exactly.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rheo/field.hpp"
#include "rheo/training.hpp"

namespace rheo::io {

// Writes to a temporary file in the same directory, then renames it over path.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

std::string encode_dataset(const Dataset& data);
Dataset decode_dataset(const std::string& bytes);
void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

struct CheckpointFile {
  nlohmann::json header = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

std::string encode_checkpoint(const CheckpointFile& file);
CheckpointFile decode_checkpoint(const std::string& bytes);
void write_checkpoint_file(const std::string& path, const CheckpointFile& file);
CheckpointFile read_checkpoint_file(const std::string& path);

struct Checkpoint {
  std::unique_ptr<training::Surrogate> surrogate;  // inference weights
  training::TrainConfig train;
  std::optional<training::FitState> state;
  // Weights the optimizer state belongs to; empty when they equal the
  // inference weights.
  std::vector<std::vector<double>> resume_weights;
  nlohmann::json extra = nlohmann::json::object();
};

CheckpointFile make_checkpoint(const training::Surrogate& surrogate,
                               const training::TrainConfig& train,
                               const training::FitState* state = nullptr,
                               const std::vector<std::vector<double>>* resume_weights = nullptr,
                               const nlohmann::json& extra = nlohmann::json::object());
Checkpoint restore_checkpoint(const CheckpointFile& file);

void save_checkpoint(const std::string& path, const training::Surrogate& surrogate,
                     const training::TrainConfig& train,
                     const training::FitState* state = nullptr,
                     const std::vector<std::vector<double>>* resume_weights = nullptr,
                     const nlohmann::json& extra = nlohmann::json::object());
Checkpoint load_checkpoint(const std::string& path);

// Lays channel-flow sequences (u_x, sigma_xy, sigma_xx over the gap) out on a
// planar nx x (ny+2) point cloud, replicated along the flow direction, with
// the five planar channels u_x, u_y, sigma_xx, sigma_yy, sigma_xy. Stands in
// for a file exported by an external 2-D solver.
Dataset export_planar(const std::vector<FieldSequence>& channel_flows, std::size_t nx,
                      double length);

}  // namespace rheo::io
