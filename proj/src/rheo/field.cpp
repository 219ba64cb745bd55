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

#include "rheo/field.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rheo/error.hpp"

namespace rheo {

std::size_t Dataset::channel_index(const std::string& name) const {
  auto it = std::find(channels.begin(), channels.end(), name);
  if (it == channels.end()) fail(ErrorCode::Schema, "dataset has no channel '" + name + "'");
  return static_cast<std::size_t>(it - channels.begin());
}

void Dataset::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorCode::Schema, "dataset dt must be positive");
  if (coord_dim == 0) fail(ErrorCode::Schema, "coord_dim must be >= 1");
  if (n_points == 0 || n_steps == 0) fail(ErrorCode::Schema, "dataset needs points and steps");
  if (channels.empty()) fail(ErrorCode::Schema, "dataset declares no channels");
  if (!units.empty() && units.size() != channels.size()) {
    fail(ErrorCode::Schema, "units list does not match channel list");
  }
  std::set<std::string> seen;
  for (const auto& c : channels) {
    if (!seen.insert(c).second) {
      fail(ErrorCode::DuplicateChannel, "duplicate channel name '" + c + "'");
    }
  }
  if (coords.size() != n_points * coord_dim) {
    fail(ErrorCode::SizeMismatch, "coordinate array does not match n_points x coord_dim");
  }
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (samples[s].values.size() != block_size()) {
      fail(ErrorCode::SizeMismatch,
           "sample " + std::to_string(s) + " block has the wrong size");
    }
  }
}

FieldSequence Dataset::sequence(std::size_t sample) const {
  FieldSequence f;
  f.coord_dim = coord_dim;
  f.n_points = n_points;
  f.n_steps = n_steps;
  f.dt = dt;
  f.coords = coords;
  f.channels = channels;
  f.units = units;
  f.values = samples.at(sample).values;
  f.metadata = samples.at(sample).metadata;
  return f;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset d = *this;
  d.samples.clear();
  for (auto i : indices) d.samples.push_back(samples.at(i));
  return d;
}

Dataset Dataset::from_sequences(const std::vector<FieldSequence>& sequences) {
  if (sequences.empty()) fail(ErrorCode::InvalidArgument, "no sequences given");
  const auto& first = sequences.front();
  Dataset d;
  d.coord_dim = first.coord_dim;
  d.n_points = first.n_points;
  d.n_steps = first.n_steps;
  d.dt = first.dt;
  d.coords = first.coords;
  d.channels = first.channels;
  d.units = first.units;
  for (const auto& s : sequences) {
    if (s.n_points != d.n_points || s.n_steps != d.n_steps ||
        s.coord_dim != d.coord_dim || s.channels != d.channels ||
        s.coords != d.coords || s.dt != d.dt) {
      fail(ErrorCode::Schema, "sequences do not share one grid");
    }
    d.samples.push_back({s.values, s.metadata});
  }
  d.validate();
  return d;
}

}  // namespace rheo
