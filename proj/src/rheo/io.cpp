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

#include "rheo/io.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "rheo/error.hpp"

namespace rheo::io {

namespace {

constexpr char kDatasetMagic[] = "RHEO1";
constexpr std::size_t kDatasetMagicLen = 5;
constexpr char kCheckpointMagic[] = "RHEOCKPT1";
constexpr std::size_t kCheckpointMagicLen = 9;
constexpr const char* kCheckpointFormat = "rheo-checkpoint";
constexpr int kCheckpointVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_f64s(std::string& out, const std::vector<double>& v) {
  out.reserve(out.size() + 8 * v.size());
  for (double x : v) put_f64(out, x);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (n > remaining()) {
      fail(ErrorCode::SizeMismatch, std::string("file is truncated in ") + what);
    }
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void f64s(std::size_t count, std::vector<double>& out, const char* what) {
    if (count > remaining() / 8) fail(ErrorCode::SizeMismatch, std::string("file is truncated in ") + what);
    out.resize(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<double>(u64(what));
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

nlohmann::json parse_header(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_object()) fail(ErrorCode::Schema, "file header is not an object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::Schema, std::string("file header does not parse: ") + e.what());
  }
}

template <class T>
T require(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(ErrorCode::Schema, std::string("header is missing '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Schema, std::string("header key '") + key + "': " + e.what());
  }
}

std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
    fail(ErrorCode::SizeMismatch, "declared sizes overflow");
  }
  return a * b;
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
}

double number_or(const nlohmann::json& j, double fallback) {
  return j.is_number() ? j.get<double>() : fallback;
}

std::vector<std::size_t> param_shape(const ad::Tensor& t) {
  return {t.shape().begin(), t.shape().end()};
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& bytes) {
  static std::atomic<unsigned> counter{0};
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      fail(ErrorCode::Io, "write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::Io, "cannot move temporary file onto '" + path + "'");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorCode::Io, "read of '" + path + "' failed");
  return ss.str();
}

// ---- datasets ---------------------------------------------------------------

std::string encode_dataset(const Dataset& data) {
  data.validate();
  nlohmann::json header = data.attributes.is_object() ? data.attributes : nlohmann::json::object();
  header["n_samples"] = data.n_samples();
  header["n_points"] = data.n_points;
  header["n_steps"] = data.n_steps;
  header["dt"] = data.dt;
  header["coord_dim"] = data.coord_dim;
  header["channels"] = data.channels;
  header["units"] = data.units.empty() ? std::vector<std::string>(data.n_channels(), "")
                                       : data.units;
  nlohmann::json meta = nlohmann::json::array();
  for (const auto& s : data.samples) meta.push_back(s.metadata);
  header["samples"] = meta;
  const std::string text = header.dump();

  std::string out(kDatasetMagic, kDatasetMagicLen);
  put_u64(out, text.size());
  out += text;
  put_f64s(out, data.coords);
  for (const auto& s : data.samples) put_f64s(out, s.values);
  return out;
}

Dataset decode_dataset(const std::string& bytes) {
  if (bytes.size() < kDatasetMagicLen || bytes.compare(0, kDatasetMagicLen, kDatasetMagic) != 0) {
    fail(ErrorCode::BadMagic, "not a dataset file (bad magic)");
  }
  Reader r(bytes);
  r.raw(kDatasetMagicLen, "magic");
  const std::uint64_t header_len = r.u64("header length");
  nlohmann::json header = parse_header(r.raw(header_len, "header"));

  Dataset d;
  d.n_points = require<std::size_t>(header, "n_points");
  d.n_steps = require<std::size_t>(header, "n_steps");
  d.dt = require<double>(header, "dt");
  d.coord_dim = require<std::size_t>(header, "coord_dim");
  d.channels = require<std::vector<std::string>>(header, "channels");
  d.units = require<std::vector<std::string>>(header, "units");
  const auto n_samples = require<std::size_t>(header, "n_samples");
  const auto meta = require<nlohmann::json>(header, "samples");
  if (!meta.is_array() || meta.size() != n_samples) {
    fail(ErrorCode::Schema, "header 'samples' must list one metadata object per sample");
  }
  std::set<std::string> names;
  for (const auto& c : d.channels) {
    if (!names.insert(c).second) fail(ErrorCode::DuplicateChannel, "duplicate channel name '" + c + "'");
  }
  for (const char* key : {"n_samples", "n_points", "n_steps", "dt", "coord_dim", "channels",
                          "units", "samples"}) {
    header.erase(key);
  }
  d.attributes = std::move(header);

  const std::size_t coord_count = checked_mul(d.n_points, d.coord_dim);
  const std::size_t block = checked_mul(checked_mul(d.n_steps, d.n_points), d.channels.size());
  const std::size_t total = coord_count + checked_mul(block, n_samples);
  if (total > std::numeric_limits<std::size_t>::max() / 8 || r.remaining() != 8 * total) {
    fail(ErrorCode::SizeMismatch, "payload holds " + std::to_string(r.remaining()) +
                                      " bytes, header declares " + std::to_string(8 * total));
  }
  r.f64s(coord_count, d.coords, "coordinates");
  d.samples.resize(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    r.f64s(block, d.samples[s].values, "sample block");
    d.samples[s].metadata = meta[s];
  }
  d.validate();
  return d;
}

void write_dataset(const std::string& path, const Dataset& data) {
  write_file_atomic(path, encode_dataset(data));
}

Dataset read_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

// ---- checkpoints ------------------------------------------------------------

const NamedArray* CheckpointFile::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::string encode_checkpoint(const CheckpointFile& file) {
  std::set<std::string> names;
  for (const auto& a : file.arrays) {
    if (!names.insert(a.name).second) fail(ErrorCode::Schema, "array '" + a.name + "' appears twice");
    std::size_t count = 1;
    for (auto d : a.shape) count = checked_mul(count, d);
    if (count != a.data.size()) fail(ErrorCode::ShapeMismatch, "array '" + a.name + "' shape/data mismatch");
  }
  const std::string text = file.header.dump();
  std::string out(kCheckpointMagic, kCheckpointMagicLen);
  put_u64(out, text.size());
  out += text;
  put_u64(out, file.arrays.size());
  for (const auto& a : file.arrays) {
    put_u64(out, a.name.size());
    out += a.name;
    put_u64(out, a.shape.size());
    for (auto d : a.shape) put_u64(out, d);
    put_f64s(out, a.data);
  }
  return out;
}

CheckpointFile decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < kCheckpointMagicLen ||
      bytes.compare(0, kCheckpointMagicLen, kCheckpointMagic) != 0) {
    fail(ErrorCode::BadMagic, "not a checkpoint file (bad magic)");
  }
  Reader r(bytes);
  r.raw(kCheckpointMagicLen, "magic");
  CheckpointFile f;
  f.header = parse_header(r.raw(r.u64("header length"), "header"));
  const std::uint64_t count = r.u64("array count");
  std::set<std::string> names;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.raw(r.u64("array name length"), "array name");
    if (!names.insert(a.name).second) fail(ErrorCode::Schema, "array '" + a.name + "' appears twice");
    const std::uint64_t rank = r.u64("array rank");
    if (rank > 8) fail(ErrorCode::Schema, "array '" + a.name + "' has implausible rank");
    std::size_t n = 1;
    for (std::uint64_t k = 0; k < rank; ++k) {
      a.shape.push_back(r.u64("array shape"));
      n = checked_mul(n, a.shape.back());
    }
    r.f64s(n, a.data, "array data");
    f.arrays.push_back(std::move(a));
  }
  if (r.remaining() != 0) fail(ErrorCode::SizeMismatch, "checkpoint has trailing bytes");
  return f;
}

void write_checkpoint_file(const std::string& path, const CheckpointFile& file) {
  write_file_atomic(path, encode_checkpoint(file));
}

CheckpointFile read_checkpoint_file(const std::string& path) {
  return decode_checkpoint(read_file(path));
}

CheckpointFile make_checkpoint(const training::Surrogate& surrogate,
                               const training::TrainConfig& train,
                               const training::FitState* state,
                               const std::vector<std::vector<double>>* resume_weights,
                               const nlohmann::json& extra) {
  CheckpointFile f;
  const auto& m = surrogate.model();
  f.header = {{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"model", m.config().to_json()},
              {"task", surrogate.task().to_json()},
              {"train", train.to_json()},
              {"normalizer", surrogate.normalizer().to_json()},
              {"seed", m.seed()},
              {"channels", surrogate.channels()},
              {"units", surrogate.units()},
              {"training_conditions", surrogate.training_conditions()},
              {"extra", extra}};
  for (const auto& e : m.parameters().entries()) {
    auto d = e.tensor.data();
    f.arrays.push_back({e.name, param_shape(e.tensor), {d.begin(), d.end()}});
  }
  if (state == nullptr) {
    f.header["state"] = nullptr;
    return f;
  }
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : state->history) {
    history.push_back({{"epoch", h.epoch},
                       {"train_loss", number_or_null(h.train_loss)},
                       {"validation_loss", number_or_null(h.validation_loss)},
                       {"learning_rate", h.learning_rate},
                       {"skipped_steps", h.skipped_steps}});
  }
  const bool moments = !state->adam.m.empty();
  const bool best = !state->best_parameters.empty();
  const bool resume = resume_weights != nullptr && !resume_weights->empty();
  f.header["state"] = {{"epoch", state->epoch},
                       {"adam_step", state->adam.step},
                       {"adam_skipped", state->adam.skipped},
                       {"adam_moments", moments},
                       {"best_epoch", state->best_epoch},
                       {"best_validation", number_or_null(state->best_validation)},
                       {"has_best", best},
                       {"has_resume_weights", resume},
                       {"history", history}};
  std::size_t k = 0;
  for (const auto& e : m.parameters().entries()) {
    if (!e.trainable) continue;
    const auto shape = param_shape(e.tensor);
    auto check = [&](const std::vector<std::vector<double>>& v, const char* what) {
      if (k >= v.size() || v[k].size() != e.tensor.size()) {
        fail(ErrorCode::State, std::string(what) + " does not match parameter " + e.name);
      }
      return v[k];
    };
    if (moments) {
      f.arrays.push_back({"state.adam.m." + e.name, shape, check(state->adam.m, "Adam first moment")});
      f.arrays.push_back({"state.adam.v." + e.name, shape, check(state->adam.v, "Adam second moment")});
    }
    if (best) f.arrays.push_back({"state.best." + e.name, shape, check(state->best_parameters, "best weights")});
    if (resume) f.arrays.push_back({"state.resume." + e.name, shape, check(*resume_weights, "resume weights")});
    ++k;
  }
  return f;
}

Checkpoint restore_checkpoint(const CheckpointFile& file) {
  const auto& h = file.header;
  if (require<std::string>(h, "format") != kCheckpointFormat) {
    fail(ErrorCode::Schema, "header format is not " + std::string(kCheckpointFormat));
  }
  if (require<int>(h, "version") != kCheckpointVersion) {
    fail(ErrorCode::Schema, "unsupported checkpoint version");
  }
  Checkpoint c;
  const auto model_cfg = model::ModelConfig::from_json(require<nlohmann::json>(h, "model"));
  const auto task = training::TaskConfig::from_json(require<nlohmann::json>(h, "task"));
  c.train = training::TrainConfig::from_json(require<nlohmann::json>(h, "train"));
  const auto norm = training::Normalizer::from_json(require<nlohmann::json>(h, "normalizer"));
  c.surrogate = std::make_unique<training::Surrogate>(
      model_cfg, task, norm, require<std::vector<std::string>>(h, "channels"),
      require<std::vector<std::string>>(h, "units"), require<std::uint64_t>(h, "seed"));
  c.surrogate->training_conditions() = require<std::vector<double>>(h, "training_conditions");
  c.extra = h.contains("extra") ? h["extra"] : nlohmann::json::object();

  std::set<std::string> used;
  auto take = [&](const std::string& name, const ad::Tensor& like) -> const NamedArray& {
    const NamedArray* a = file.find(name);
    if (a == nullptr) fail(ErrorCode::Schema, "checkpoint is missing array '" + name + "'");
    if (a->shape != param_shape(like)) {
      fail(ErrorCode::ShapeMismatch, "array '" + name + "' has shape " +
                                         ad::shape_string({a->shape.begin(), a->shape.end()}) +
                                         ", expected " + ad::shape_string(like.shape()));
    }
    used.insert(name);
    return *a;
  };
  auto& entries = c.surrogate->model().parameters().entries();
  for (auto& e : entries) {
    const auto& a = take(e.name, e.tensor);
    std::copy(a.data.begin(), a.data.end(), e.tensor.mutable_data().begin());
  }

  const auto& st = h.contains("state") ? h["state"] : nlohmann::json();
  if (!st.is_null()) {
    training::FitState s;
    s.epoch = require<std::size_t>(st, "epoch");
    s.adam.step = require<std::uint64_t>(st, "adam_step");
    s.adam.skipped = require<std::uint64_t>(st, "adam_skipped");
    s.best_epoch = require<std::size_t>(st, "best_epoch");
    s.best_validation = number_or(st.value("best_validation", nlohmann::json()),
                                  std::numeric_limits<double>::infinity());
    for (const auto& r : require<nlohmann::json>(st, "history")) {
      training::EpochRecord rec;
      rec.epoch = require<std::size_t>(r, "epoch");
      rec.train_loss = number_or(r.value("train_loss", nlohmann::json()),
                                 std::numeric_limits<double>::quiet_NaN());
      rec.validation_loss = number_or(r.value("validation_loss", nlohmann::json()),
                                      std::numeric_limits<double>::quiet_NaN());
      rec.learning_rate = require<double>(r, "learning_rate");
      rec.skipped_steps = require<std::uint64_t>(r, "skipped_steps");
      s.history.push_back(rec);
    }
    const bool moments = require<bool>(st, "adam_moments");
    const bool best = require<bool>(st, "has_best");
    const bool resume = require<bool>(st, "has_resume_weights");
    for (const auto& e : entries) {
      if (!e.trainable) continue;
      if (moments) {
        s.adam.m.push_back(take("state.adam.m." + e.name, e.tensor).data);
        s.adam.v.push_back(take("state.adam.v." + e.name, e.tensor).data);
      }
      if (best) s.best_parameters.push_back(take("state.best." + e.name, e.tensor).data);
      if (resume) c.resume_weights.push_back(take("state.resume." + e.name, e.tensor).data);
    }
    c.state = std::move(s);
  }
  for (const auto& a : file.arrays) {
    if (!used.count(a.name)) fail(ErrorCode::Schema, "checkpoint has unexpected array '" + a.name + "'");
  }
  return c;
}

void save_checkpoint(const std::string& path, const training::Surrogate& surrogate,
                     const training::TrainConfig& train, const training::FitState* state,
                     const std::vector<std::vector<double>>* resume_weights,
                     const nlohmann::json& extra) {
  write_checkpoint_file(path, make_checkpoint(surrogate, train, state, resume_weights, extra));
}

Checkpoint load_checkpoint(const std::string& path) {
  return restore_checkpoint(read_checkpoint_file(path));
}

// ---- planar exporter --------------------------------------------------------

Dataset export_planar(const std::vector<FieldSequence>& flows, std::size_t nx, double length) {
  if (flows.empty()) fail(ErrorCode::InvalidArgument, "nothing to export");
  if (nx < 2 || !(length > 0.0)) fail(ErrorCode::InvalidArgument, "planar layout needs nx >= 2 and length > 0");
  const auto& first = flows.front();
  auto channel = [](const FieldSequence& f, const char* name) {
    auto it = std::find(f.channels.begin(), f.channels.end(), name);
    if (it == f.channels.end()) fail(ErrorCode::Schema, std::string("channel flow lacks '") + name + "'");
    return static_cast<std::size_t>(it - f.channels.begin());
  };
  const std::size_t ny = first.n_points;
  Dataset d;
  d.coord_dim = 2;
  d.n_points = nx * ny;
  d.n_steps = first.n_steps;
  d.dt = first.dt;
  d.channels = {"u_x", "u_y", "sigma_xx", "sigma_yy", "sigma_xy"};
  d.units = {"m/s", "m/s", "Pa", "Pa", "Pa"};
  d.attributes = {{"geometry", "planar"}, {"exporter", "rheo.export_planar"}};
  for (std::size_t i = 0; i < nx; ++i) {
    const double x = length * static_cast<double>(i) / static_cast<double>(nx - 1);
    for (std::size_t j = 0; j < ny; ++j) {
      d.coords.push_back(x);
      d.coords.push_back(first.coords[j * first.coord_dim]);
    }
  }
  for (const auto& f : flows) {
    if (f.n_points != ny || f.n_steps != first.n_steps || f.coord_dim != 1) {
      fail(ErrorCode::ShapeMismatch, "channel flows must share one 1-D grid and step count");
    }
    const std::size_t cu = channel(f, "u_x");
    const std::size_t cxy = channel(f, "sigma_xy");
    const std::size_t cxx = channel(f, "sigma_xx");
    SampleBlock b;
    b.metadata = f.metadata;
    b.values.reserve(d.block_size());
    for (std::size_t s = 0; s < f.n_steps; ++s) {
      for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
          b.values.push_back(f.at(s, j, cu));
          b.values.push_back(0.0);
          b.values.push_back(f.at(s, j, cxx));
          b.values.push_back(0.0);
          b.values.push_back(f.at(s, j, cxy));
        }
      }
    }
    d.samples.push_back(std::move(b));
  }
  d.validate();
  return d;
}

}  // namespace rheo::io
