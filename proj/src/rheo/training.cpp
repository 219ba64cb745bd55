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

#include "rheo/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <map>
#include <random>

#include "rheo/error.hpp"

namespace rheo::training {

namespace {

constexpr double kNormFloor = 1e-12;

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Schema, std::string("config key '") + key + "': " + e.what());
  }
}

std::optional<double> metadata_number(const nlohmann::json& meta, const std::string& key) {
  if (!meta.is_object()) return std::nullopt;
  auto it = meta.find(key);
  if (it == meta.end() || !it->is_number()) return std::nullopt;
  return it->get<double>();
}

bool same_condition(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::min(sorted.size() - 1, rank == 0 ? 0 : rank - 1)];
}

// Picks r positions spread evenly over [0, n).
std::vector<std::size_t> spread(std::size_t n, std::size_t r) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < r && n > 0; ++i) {
    out.push_back(std::min(n - 1, static_cast<std::size_t>(
                                      (static_cast<double>(i) + 0.5) * static_cast<double>(n) /
                                      static_cast<double>(r))));
  }
  return out;
}

void flatten(const std::vector<Tensor>& steps, std::vector<double>& out) {
  out.clear();
  for (const auto& t : steps) out.insert(out.end(), t.data().begin(), t.data().end());
}

}  // namespace

// ---- metrics --------------------------------------------------------------

RelativeL2 relative_l2(std::span<const double> pred, std::span<const double> truth,
                       std::size_t channels) {
  if (channels == 0 || pred.size() != truth.size() || pred.size() % channels != 0) {
    fail(ErrorCode::ShapeMismatch, "relative_l2 needs matching shapes");
  }
  std::vector<double> diff2(channels, 0.0), truth2(channels, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::size_t c = i % channels;
    const double d = pred[i] - truth[i];
    diff2[c] += d * d;
    truth2[c] += truth[i] * truth[i];
  }
  RelativeL2 r;
  for (std::size_t c = 0; c < channels; ++c) {
    const double tn = std::sqrt(truth2[c]);
    const bool fallback = tn < kNormFloor;
    r.per_channel.push_back(fallback ? std::sqrt(diff2[c]) : std::sqrt(diff2[c]) / tn);
    r.absolute_fallback.push_back(fallback);
  }
  r.value = std::accumulate(r.per_channel.begin(), r.per_channel.end(), 0.0) /
            static_cast<double>(channels);
  return r;
}

LocalError local_relative_error(std::span<const double> pred, std::span<const double> truth,
                                std::size_t channels, double rel_eps) {
  if (channels == 0 || pred.size() != truth.size() || pred.size() % channels != 0) {
    fail(ErrorCode::ShapeMismatch, "local_relative_error needs matching shapes");
  }
  LocalError e;
  e.threshold.assign(channels, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    e.threshold[i % channels] = std::max(e.threshold[i % channels], std::abs(truth[i]));
  }
  for (auto& t : e.threshold) t *= rel_eps;
  e.relative.resize(pred.size());
  e.absolute.resize(pred.size());
  e.masked.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double abs_err = std::abs(truth[i] - pred[i]);
    const double mag = std::abs(truth[i]);
    e.absolute[i] = abs_err;
    const bool masked = !(mag >= e.threshold[i % channels]) || mag == 0.0;
    e.masked[i] = masked ? 1 : 0;
    e.relative[i] = masked ? std::numeric_limits<double>::quiet_NaN() : abs_err / mag;
  }
  return e;
}

nlohmann::json ErrorSummary::to_json() const {
  return {{"counted", counted}, {"masked", masked}, {"p50", p50}, {"p90", p90},
          {"p99", p99}, {"max", max}, {"ceiling", ceiling},
          {"fraction_below_ceiling", fraction_below_ceiling}};
}

ErrorSummary summarize(std::span<const LocalError> errors, double ceiling) {
  ErrorSummary s;
  s.ceiling = ceiling;
  std::vector<double> values;
  for (const auto& e : errors) {
    for (std::size_t i = 0; i < e.relative.size(); ++i) {
      if (e.masked[i]) {
        ++s.masked;
      } else {
        values.push_back(e.relative[i]);
      }
    }
  }
  std::sort(values.begin(), values.end());
  s.counted = values.size();
  if (values.empty()) return s;
  s.p50 = percentile(values, 0.50);
  s.p90 = percentile(values, 0.90);
  s.p99 = percentile(values, 0.99);
  s.max = values.back();
  const auto below = static_cast<std::size_t>(
      std::lower_bound(values.begin(), values.end(), ceiling) - values.begin());
  s.fraction_below_ceiling = static_cast<double>(below) / static_cast<double>(values.size());
  return s;
}

// ---- optimizer ------------------------------------------------------------

double global_grad_norm(std::span<const Tensor> params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

bool adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& config) {
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    fail(ErrorCode::State, "optimizer moments do not match the parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].size() || state.v[i].size() != params[i].size()) {
      fail(ErrorCode::State, "optimizer moment shape does not match parameter");
    }
  }
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) {
    ++state.skipped;
    return false;
  }
  const double clip =
      (config.clip_norm > 0.0 && norm > config.clip_norm) ? config.clip_norm / norm : 1.0;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has = params[i].has_grad();
    const auto g = params[i].grad();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has ? g[j] * clip : 0.0;
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * gj;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * gj * gj;
      w[j] -= config.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + config.eps);
    }
  }
  return true;
}

// ---- configuration --------------------------------------------------------

void TaskConfig::validate() const {
  if (mode == TaskMode::Temporal) {
    if (condition_steps == 0) fail(ErrorCode::Configuration, "condition_steps must be >= 1");
  } else {
    if (input_channels.empty() || output_channels.empty()) {
      fail(ErrorCode::Configuration, "static tasks need input and output channels");
    }
  }
}

nlohmann::json TaskConfig::to_json() const {
  return {{"mode", mode == TaskMode::Static ? "static" : "temporal"},
          {"condition_steps", condition_steps},
          {"input_channels", input_channels},
          {"output_channels", output_channels},
          {"condition_key", condition_key}};
}

TaskConfig TaskConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::Schema, "task config must be an object");
  TaskConfig t;
  const auto mode = get_or<std::string>(j, "mode", "temporal");
  if (mode == "static") {
    t.mode = TaskMode::Static;
  } else if (mode == "temporal") {
    t.mode = TaskMode::Temporal;
  } else {
    fail(ErrorCode::Configuration, "unknown task mode '" + mode + "'");
  }
  t.condition_steps = get_or(j, "condition_steps", t.condition_steps);
  t.input_channels = get_or(j, "input_channels", t.input_channels);
  t.output_channels = get_or(j, "output_channels", t.output_channels);
  t.condition_key = get_or(j, "condition_key", t.condition_key);
  t.validate();
  return t;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::Configuration, msg); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be positive");
  if (batch_size == 0) bad("batch_size must be positive");
  if (epochs == 0) bad("epochs must be positive");
  if (!(clip_norm >= 0.0)) bad("clip_norm must be >= 0");
  if (normalization != "per_channel" && normalization != "instance" && normalization != "none") {
    bad("normalization must be per_channel, instance or none");
  }
  if (loss_reduction != "mean" && loss_reduction != "sum") bad("loss_reduction must be mean or sum");
  if (lr_schedule != "constant" && lr_schedule != "cosine") bad("lr_schedule must be constant or cosine");
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) bad("lr_final_fraction must be in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("Adam betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) bad("adam_eps must be positive");
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  if (lr_schedule == "constant" || epochs <= 1) return learning_rate;
  const double low = learning_rate * lr_final_fraction;
  const double frac = static_cast<double>(std::min(epoch, epochs) - 1) /
                      static_cast<double>(epochs - 1);
  return low + 0.5 * (learning_rate - low) * (1.0 + std::cos(std::numbers::pi * frac));
}

AdamConfig TrainConfig::adam(std::size_t epoch) const {
  return {learning_rate_at(epoch), beta1, beta2, adam_eps, clip_norm};
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"epochs", epochs}, {"clip_norm", clip_norm},
          {"seed", seed}, {"normalization", normalization},
          {"loss_reduction", loss_reduction}, {"lr_schedule", lr_schedule},
          {"lr_final_fraction", lr_final_fraction}, {"beta1", beta1},
          {"beta2", beta2}, {"adam_eps", adam_eps}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::Schema, "train config must be an object");
  TrainConfig c;
  c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
  c.batch_size = get_or(j, "batch_size", c.batch_size);
  c.epochs = get_or(j, "epochs", c.epochs);
  c.clip_norm = get_or(j, "clip_norm", c.clip_norm);
  c.seed = get_or(j, "seed", c.seed);
  c.normalization = get_or(j, "normalization", c.normalization);
  c.loss_reduction = get_or(j, "loss_reduction", c.loss_reduction);
  c.lr_schedule = get_or(j, "lr_schedule", c.lr_schedule);
  c.lr_final_fraction = get_or(j, "lr_final_fraction", c.lr_final_fraction);
  c.beta1 = get_or(j, "beta1", c.beta1);
  c.beta2 = get_or(j, "beta2", c.beta2);
  c.adam_eps = get_or(j, "adam_eps", c.adam_eps);
  c.validate();
  return c;
}

// ---- normalization ---------------------------------------------------------

Normalizer Normalizer::fit(const Dataset& data, const std::string& policy, std::size_t window) {
  data.validate();
  if (data.n_samples() == 0) fail(ErrorCode::InvalidArgument, "cannot normalize an empty dataset");
  const std::size_t nc = data.n_channels();
  Normalizer n;
  n.mean.assign(nc, 0.0);
  n.stddev.assign(nc, 1.0);
  if (policy == "instance") {
    if (window == 0 || window > data.n_steps) {
      fail(ErrorCode::Configuration, "instance normalization needs 1 <= window <= steps");
    }
    n.window = window;
  }
  if (policy == "per_channel" || policy == "instance") {
    std::vector<std::vector<double>> scales;
    for (std::size_t s = 0; s < data.n_samples(); ++s) scales.push_back(n.sample_scale(data, s));
    std::vector<double> sum(nc, 0.0), sq(nc, 0.0);
    std::size_t count = 0;
    for (std::size_t k = 0; k < data.n_samples(); ++k) {
      const auto& v = data.samples[k].values;
      for (std::size_t i = 0; i < v.size(); ++i) sum[i % nc] += v[i] / scales[k][i % nc];
      count += v.size() / nc;
    }
    for (std::size_t c = 0; c < nc; ++c) n.mean[c] = sum[c] / static_cast<double>(count);
    for (std::size_t k = 0; k < data.n_samples(); ++k) {
      const auto& v = data.samples[k].values;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] / scales[k][i % nc] - n.mean[i % nc];
        sq[i % nc] += d * d;
      }
    }
    for (std::size_t c = 0; c < nc; ++c) {
      const double sd = std::sqrt(sq[c] / static_cast<double>(count));
      n.stddev[c] = sd > 1e-12 * std::max(1.0, std::abs(n.mean[c])) ? sd : 1.0;
    }
  } else if (policy != "none") {
    fail(ErrorCode::Configuration, "unknown normalization policy '" + policy + "'");
  }
  n.coord_min.assign(data.coord_dim, std::numeric_limits<double>::infinity());
  n.coord_max.assign(data.coord_dim, -std::numeric_limits<double>::infinity());
  for (std::size_t p = 0; p < data.n_points; ++p) {
    for (std::size_t d = 0; d < data.coord_dim; ++d) {
      const double x = data.coords[p * data.coord_dim + d];
      n.coord_min[d] = std::min(n.coord_min[d], x);
      n.coord_max[d] = std::max(n.coord_max[d], x);
    }
  }
  return n;
}

std::vector<double> Normalizer::sample_scale(const Dataset& data, std::size_t sample) const {
  const std::size_t nc = data.n_channels();
  std::vector<double> scale(nc, 1.0);
  if (!per_sample()) return scale;
  if (window > data.n_steps) fail(ErrorCode::InvalidArgument, "dataset is shorter than the scaling window");
  std::vector<double> sq(nc, 0.0), peak(nc, 0.0);
  const auto& v = data.samples[sample].values;
  for (std::size_t i = 0; i < window * data.n_points * nc; ++i) {
    sq[i % nc] += v[i] * v[i];
  }
  for (std::size_t c = 0; c < nc; ++c) {
    const double rms = std::sqrt(sq[c] / static_cast<double>(window * data.n_points));
    // Quiescent windows carry no amplitude; keep them unscaled.
    if (rms > 1e-12 && std::isfinite(rms)) scale[c] = rms;
  }
  return scale;
}

double Normalizer::scale_coord(std::size_t dim, double x) const {
  const double span = coord_max[dim] - coord_min[dim];
  return span > 0.0 ? (x - coord_min[dim]) / span : x - coord_min[dim];
}

nlohmann::json Normalizer::to_json() const {
  nlohmann::json j = {{"mean", mean}, {"stddev", stddev}, {"coord_min", coord_min}, {"coord_max", coord_max}};
  if (per_sample()) j["window"] = window;
  return j;
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  Normalizer n;
  try {
    n.mean = j.at("mean").get<std::vector<double>>();
    n.stddev = j.at("stddev").get<std::vector<double>>();
    n.coord_min = j.at("coord_min").get<std::vector<double>>();
    n.coord_max = j.at("coord_max").get<std::vector<double>>();
    n.window = j.value("window", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Schema, std::string("normalizer: ") + e.what());
  }
  if (n.mean.size() != n.stddev.size() || n.coord_min.size() != n.coord_max.size()) {
    fail(ErrorCode::Schema, "normalizer arrays have inconsistent lengths");
  }
  return n;
}

// ---- surrogate ------------------------------------------------------------

Surrogate::Surrogate(const model::ModelConfig& model_config, const TaskConfig& task,
                     const Normalizer& normalizer, std::vector<std::string> channels,
                     std::vector<std::string> units, std::uint64_t seed)
    : model_(model_config, seed),
      task_(task),
      normalizer_(normalizer),
      channels_(std::move(channels)),
      units_(std::move(units)) {
  task_.validate();
  if (normalizer_.mean.size() != channels_.size()) {
    fail(ErrorCode::Schema, "normalizer does not match the channel list");
  }
  if (units_.size() != channels_.size()) units_.resize(channels_.size());
  auto index_of = [&](const std::string& name) {
    auto it = std::find(channels_.begin(), channels_.end(), name);
    if (it == channels_.end()) fail(ErrorCode::Schema, "unknown channel '" + name + "'");
    return static_cast<std::size_t>(it - channels_.begin());
  };
  if (task_.mode == TaskMode::Temporal) {
    input_index_.resize(channels_.size());
    std::iota(input_index_.begin(), input_index_.end(), 0);
    output_index_ = input_index_;
  } else {
    for (const auto& c : task_.input_channels) input_index_.push_back(index_of(c));
    for (const auto& c : task_.output_channels) output_index_.push_back(index_of(c));
  }
  const auto& mc = model_.config();
  const std::size_t expected_in = task_.mode == TaskMode::Temporal
                                      ? task_.condition_steps * input_index_.size()
                                      : input_index_.size();
  if (mc.in_channels != expected_in || mc.out_channels != output_index_.size()) {
    fail(ErrorCode::Configuration, "model channel counts do not match the task");
  }
  if (mc.coord_dim != normalizer_.coord_min.size()) {
    fail(ErrorCode::Configuration, "model coord_dim does not match the normalizer");
  }
  std::vector<double> om, os;
  for (auto c : output_index_) {
    om.push_back(normalizer_.mean[c]);
    os.push_back(normalizer_.stddev[c]);
  }
  out_mean_ = Tensor::from({om.size()}, om);
  out_std_ = Tensor::from({os.size()}, os);
}

Surrogate Surrogate::create(const Dataset& train, model::ModelConfig model_config,
                            const TaskConfig& task, const std::string& normalization,
                            std::uint64_t seed) {
  task.validate();
  train.validate();
  if (task.mode == TaskMode::Temporal) {
    model_config.in_channels = task.condition_steps * train.n_channels();
    model_config.out_channels = train.n_channels();
  } else {
    model_config.in_channels = task.input_channels.size();
    model_config.out_channels = task.output_channels.size();
  }
  model_config.coord_dim = train.coord_dim;
  if (normalization == "instance" && task.mode != TaskMode::Temporal) {
    fail(ErrorCode::Configuration, "instance normalization needs a temporal task");
  }
  const std::size_t window = normalization == "instance" ? task.condition_steps : 0;
  Surrogate s(model_config, task, Normalizer::fit(train, normalization, window), train.channels,
              train.units, seed);
  for (const auto& sample : train.samples) {
    if (auto v = metadata_number(sample.metadata, task.condition_key)) {
      s.training_conditions_.push_back(*v);
    }
  }
  return s;
}

std::vector<std::string> Surrogate::output_channels() const {
  std::vector<std::string> out;
  for (auto c : output_index_) out.push_back(channels_[c]);
  return out;
}

void Surrogate::check_compatible(const Dataset& data) const {
  data.validate();
  if (data.channels != channels_) {
    fail(ErrorCode::Schema, "dataset channels do not match the trained channel list");
  }
  if (data.coord_dim != model_.config().coord_dim) {
    fail(ErrorCode::Schema, "dataset coord_dim does not match the model");
  }
}

std::size_t Surrogate::predicted_steps(const Dataset& data) const {
  if (task_.mode == TaskMode::Static) return 1;
  if (task_.condition_steps >= data.n_steps) {
    fail(ErrorCode::InvalidArgument,
         "condition steps " + std::to_string(task_.condition_steps) +
             " exceed the available " + std::to_string(data.n_steps) + " steps minus one");
  }
  return data.n_steps - task_.condition_steps;
}

Example Surrogate::prepare(const Dataset& data, std::size_t sample) const {
  if (sample >= data.n_samples()) fail(ErrorCode::InvalidArgument, "sample index out of range");
  const std::size_t n = data.n_points;
  const std::size_t nd = data.coord_dim;
  Example ex;
  std::vector<double> coords(n * nd);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t d = 0; d < nd; ++d) {
      coords[p * nd + d] = normalizer_.scale_coord(d, data.coords[p * nd + d]);
    }
  }
  ex.coords = Tensor::from({n, nd}, coords);
  ex.query = ex.coords;

  const std::size_t steps_in = task_.mode == TaskMode::Temporal ? task_.condition_steps : 1;
  const std::size_t first_target = task_.mode == TaskMode::Temporal ? task_.condition_steps : 0;
  const std::size_t n_targets = predicted_steps(data);
  const std::size_t ci = input_index_.size();
  const auto scale = normalizer_.sample_scale(data, sample);
  std::vector<double> inputs(n * steps_in * ci);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t s = 0; s < steps_in; ++s) {
      for (std::size_t c = 0; c < ci; ++c) {
        const std::size_t ch = input_index_[c];
        inputs[(p * steps_in + s) * ci + c] =
            normalizer_.normalize(ch, data.value(sample, s, p, ch) / scale[ch]);
      }
    }
  }
  ex.inputs = Tensor::from({n, steps_in * ci}, inputs);

  const std::size_t co = output_index_.size();
  if (normalizer_.per_sample()) {
    std::vector<double> out_scale;
    for (auto c : output_index_) out_scale.push_back(scale[c]);
    ex.scale = Tensor::from({co}, out_scale);
  }
  std::vector<double> target(n * co);
  for (std::size_t t = 0; t < n_targets; ++t) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t c = 0; c < co; ++c) {
        target[p * co + c] = data.value(sample, first_target + t, p, output_index_[c]);
      }
    }
    ex.targets.push_back(Tensor::from({n, co}, target));
  }
  return ex;
}

std::vector<Tensor> Surrogate::forward(Tape& tape, const Example& ex) const {
  std::vector<Tensor> out;
  auto physical = [&](const Tensor& field) {
    Tensor y = ad::add_row(tape, ad::mul_row(tape, field, out_std_), out_mean_);
    return ex.scale.defined() ? ad::mul_row(tape, y, ex.scale) : y;
  };
  if (task_.mode == TaskMode::Static) {
    const auto z0 = model_.make_initial_latent(tape, model_.encode(tape, ex.inputs, ex.coords),
                                               ex.query);
    out.push_back(physical(model_.decode_field(tape, z0)));
    return out;
  }
  out.reserve(ex.targets.size());
  model_.rollout_each(tape, ex.inputs, ex.coords, ex.query, ex.targets.size(),
                      [&](const model::LatentState&, const Tensor& field) {
                        out.push_back(physical(field));
                      });
  return out;
}

Tensor Surrogate::loss(Tape& tape, const Example& ex, const std::string& reduction) const {
  if (ex.targets.empty()) fail(ErrorCode::InvalidArgument, "example has no targets");
  const auto preds = forward(tape, ex);
  Tensor total;
  for (std::size_t t = 0; t < preds.size(); ++t) {
    Tensor l = ad::relative_l2_loss(tape, preds[t], ex.targets[t], kNormFloor);
    total = t == 0 ? l : ad::add(tape, total, l);
  }
  if (reduction == "mean" && preds.size() > 1) {
    total = ad::scale(tape, total, 1.0 / static_cast<double>(preds.size()));
  }
  return total;
}

// ---- data split -----------------------------------------------------------

Split stratified_split(const Dataset& data, const std::string& key,
                       double validation_fraction, double test_fraction) {
  const std::size_t n = data.n_samples();
  if (!(validation_fraction >= 0.0) || !(test_fraction >= 0.0) ||
      validation_fraction + test_fraction >= 1.0) {
    fail(ErrorCode::Configuration, "split fractions must be >= 0 and sum below 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto va = metadata_number(data.samples[a].metadata, key);
    const auto vb = metadata_number(data.samples[b].metadata, key);
    if (va && vb) return *va < *vb;
    return false;
  });
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  auto n_val =
      static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  while (n_test + n_val >= n && (n_test > 0 || n_val > 0)) {
    if (n_val >= n_test && n_val > 0) {
      --n_val;
    } else {
      --n_test;
    }
  }
  Split split;
  std::vector<bool> taken(n, false);
  if (n_test >= 1) taken[0] = true, split.test.push_back(order[0]);
  if (n_test >= 2) taken[n - 1] = true, split.test.push_back(order[n - 1]);
  auto take_spread = [&](std::size_t count, std::vector<std::size_t>& into) {
    std::vector<std::size_t> free_pos;
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) free_pos.push_back(i);
    }
    for (auto k : spread(free_pos.size(), count)) {
      taken[free_pos[k]] = true;
      into.push_back(order[free_pos[k]]);
    }
  };
  if (n_test > 2) take_spread(n_test - 2, split.test);
  take_spread(n_val, split.validation);
  for (std::size_t i = 0; i < n; ++i) {
    if (!taken[i]) split.train.push_back(order[i]);
  }
  for (auto* v : {&split.train, &split.validation, &split.test}) std::sort(v->begin(), v->end());
  return split;
}

// ---- training loop --------------------------------------------------------

std::vector<Example> prepare_all(const Surrogate& s, const Dataset& data) {
  s.check_compatible(data);
  std::vector<Example> out;
  out.reserve(data.n_samples());
  for (std::size_t i = 0; i < data.n_samples(); ++i) out.push_back(s.prepare(data, i));
  return out;
}

double dataset_loss(const Surrogate& s, std::span<const Example> examples,
                    const std::string& reduction) {
  if (examples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& ex : examples) {
    Tape tape(false);
    total += s.loss(tape, ex, reduction).item();
  }
  return total / static_cast<double>(examples.size());
}

FitState fit(Surrogate& surrogate, const Dataset& train, const Dataset* validation,
             const TrainConfig& config, FitState state, const FitOptions& options) {
  config.validate();
  if (train.n_samples() == 0) fail(ErrorCode::InvalidArgument, "training set is empty");
  const auto train_ex = prepare_all(surrogate, train);
  std::vector<Example> val_ex;
  if (validation != nullptr && validation->n_samples() > 0) {
    val_ex = prepare_all(surrogate, *validation);
  }
  auto& params_set = surrogate.model().parameters();
  std::vector<Tensor> params = params_set.trainable();

  auto consider_best = [&](std::size_t epoch, double train_loss, double val_loss) {
    const double score = val_ex.empty() ? train_loss : val_loss;
    if (std::isfinite(score) && (state.best_parameters.empty() || score < state.best_validation)) {
      state.best_validation = score;
      state.best_epoch = epoch;
      state.best_parameters = params_set.snapshot();
    }
  };

  if (state.epoch == 0 && state.history.empty()) {
    EpochRecord r;
    r.epoch = 0;
    r.train_loss = dataset_loss(surrogate, train_ex, config.loss_reduction);
    r.validation_loss = dataset_loss(surrogate, val_ex, config.loss_reduction);
    r.learning_rate = config.learning_rate_at(1);
    state.history.push_back(r);
    consider_best(0, r.train_loss, r.validation_loss);
    if (options.on_epoch) options.on_epoch(r);
  }

  const std::size_t last = std::min(config.epochs, options.stop_after_epoch.value_or(config.epochs));
  const std::size_t n = train_ex.size();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = state.epoch + 1; epoch <= last; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    const AdamConfig adam = config.adam(epoch);
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < n; start += config.batch_size) {
        const std::size_t stop = std::min(n, start + config.batch_size);
        params_set.zero_grad();
        for (std::size_t b = start; b < stop; ++b) {
          Tape tape;
          const Tensor loss = surrogate.loss(tape, train_ex[order[b]], config.loss_reduction);
          loss_sum += loss.item();
          tape.backward(loss);
        }
        const double inv = 1.0 / static_cast<double>(stop - start);
        for (auto& p : params) {
          if (!p.has_grad()) continue;
          for (auto& g : p.mutable_grad()) g *= inv;
        }
        adam_step(params, state.adam, adam);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Divergence) {
        fail(ErrorCode::Divergence,
             "training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
      }
      throw;
    }
    params_set.zero_grad();

    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = loss_sum / static_cast<double>(n);
    r.learning_rate = adam.learning_rate;
    r.skipped_steps = state.adam.skipped;
    if (!std::isfinite(r.train_loss)) {
      fail(ErrorCode::Divergence, "training loss is not finite in epoch " + std::to_string(epoch));
    }
    r.validation_loss = dataset_loss(surrogate, val_ex, config.loss_reduction);
    state.history.push_back(r);
    state.epoch = epoch;
    consider_best(epoch, r.train_loss, r.validation_loss);
    if (options.on_epoch) options.on_epoch(r);
  }
  return state;
}

// ---- evaluation -----------------------------------------------------------

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["channels"] = channels;
  j["condition_steps"] = condition_steps;
  j["predicted_steps"] = predicted_steps;
  j["n_points"] = n_points;
  j["condition_key"] = condition_key;
  nlohmann::json per_channel = nlohmann::json::object();
  for (std::size_t c = 0; c < channels.size(); ++c) per_channel[channels[c]] = mean_channel_rel_l2[c];
  j["mean_relative_l2"] = per_channel;
  j["mean_relative_l2_all"] = mean_rel_l2;
  j["local_error"] = local.to_json();

  std::map<std::string, std::pair<double, std::size_t>> regimes;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : samples) {
    nlohmann::json r;
    r["index"] = s.index;
    r["metadata"] = s.metadata;
    nlohmann::json ch = nlohmann::json::object();
    for (std::size_t c = 0; c < channels.size(); ++c) ch[channels[c]] = s.error.per_channel[c];
    r["relative_l2"] = ch;
    r["mean_relative_l2"] = s.error.value;
    r["absolute_fallback"] = s.error.absolute_fallback;
    r["condition"] = s.condition ? nlohmann::json(*s.condition) : nlohmann::json();
    r["Wi"] = s.wi ? nlohmann::json(*s.wi) : nlohmann::json();
    r["condition_seen_in_training"] = s.condition_seen;
    r["regime"] = s.regime;
    rows.push_back(r);
    auto& acc = regimes[s.regime];
    acc.first += s.error.value;
    acc.second += 1;
  }
  j["samples"] = rows;
  nlohmann::json by_regime = nlohmann::json::object();
  for (const auto& [name, acc] : regimes) {
    by_regime[name] = {{"samples", acc.second},
                       {"mean_relative_l2", acc.first / static_cast<double>(acc.second)}};
  }
  if (regimes.count("interpolation") && regimes.count("extrapolation")) {
    const double interp = regimes["interpolation"].first / regimes["interpolation"].second;
    const double extrap = regimes["extrapolation"].first / regimes["extrapolation"].second;
    by_regime["extrapolation_over_interpolation"] =
        interp > 0.0 ? nlohmann::json(extrap / interp) : nlohmann::json();
  }
  j["by_regime"] = by_regime;
  j["propagator_spectral_norm"] =
      propagator_spectral_norm ? nlohmann::json(*propagator_spectral_norm) : nlohmann::json();
  j["wall_time_s"] = wall_time_s;
  return j;
}

Dataset EvalReport::error_fields(const Dataset& source) const {
  Dataset d;
  d.coord_dim = source.coord_dim;
  d.n_points = n_points;
  d.n_steps = predicted_steps;
  d.dt = source.dt;
  d.coords = source.coords;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto src = std::find(source.channels.begin(), source.channels.end(), channels[c]);
    const std::string unit = src == source.channels.end()
                                 ? ""
                                 : source.units[static_cast<std::size_t>(src - source.channels.begin())];
    d.channels.push_back(channels[c] + ".rel_err");
    d.units.push_back("1");
    d.channels.push_back(channels[c] + ".abs_err");
    d.units.push_back(unit);
    d.channels.push_back(channels[c] + ".masked");
    d.units.push_back("1");
  }
  const std::size_t nc = channels.size();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& e = local_errors[s];
    SampleBlock b;
    b.metadata = samples[s].metadata;
    b.values.resize(e.relative.size() * 3);
    for (std::size_t i = 0; i < e.relative.size(); ++i) {
      const std::size_t row = i / nc;
      const std::size_t c = i % nc;
      b.values[row * 3 * nc + 3 * c] = e.relative[i];
      b.values[row * 3 * nc + 3 * c + 1] = e.absolute[i];
      b.values[row * 3 * nc + 3 * c + 2] = e.masked[i];
    }
    d.samples.push_back(std::move(b));
  }
  d.attributes = {{"condition_steps", condition_steps}, {"kind", "error_fields"}};
  return d;
}

EvalReport evaluate(Surrogate& surrogate, const Dataset& data, std::size_t condition_steps) {
  const auto start = std::chrono::steady_clock::now();
  surrogate.check_compatible(data);
  const auto& task = surrogate.task();
  if (task.mode == TaskMode::Temporal) {
    if (condition_steps >= data.n_steps) {
      fail(ErrorCode::InvalidArgument,
           "condition steps " + std::to_string(condition_steps) + " leave nothing to predict in " +
               std::to_string(data.n_steps) + " steps");
    }
    if (condition_steps != task.condition_steps) {
      fail(ErrorCode::Configuration, "model was trained on " + std::to_string(task.condition_steps) +
                                         " condition steps, not " + std::to_string(condition_steps));
    }
  }
  EvalReport report;
  report.channels = surrogate.output_channels();
  report.condition_steps = task.mode == TaskMode::Temporal ? condition_steps : 0;
  report.predicted_steps = surrogate.predicted_steps(data);
  report.n_points = data.n_points;
  report.condition_key = task.condition_key;
  const std::size_t nc = report.channels.size();

  const auto& seen = surrogate.training_conditions();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : seen) lo = std::min(lo, v), hi = std::max(hi, v);

  std::vector<double> pred_flat, truth_flat;
  report.mean_channel_rel_l2.assign(nc, 0.0);
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    const Example ex = surrogate.prepare(data, i);
    Tape tape(false);
    flatten(surrogate.forward(tape, ex), pred_flat);
    flatten(ex.targets, truth_flat);
    SampleEvaluation s;
    s.index = i;
    s.metadata = data.samples[i].metadata;
    s.error = relative_l2(pred_flat, truth_flat, nc);
    s.condition = metadata_number(s.metadata, task.condition_key);
    s.wi = metadata_number(s.metadata, "Wi");
    if (s.condition && !seen.empty()) {
      s.condition_seen = std::any_of(seen.begin(), seen.end(),
                                     [&](double v) { return same_condition(v, *s.condition); });
      if (s.condition_seen) {
        s.regime = "seen";
      } else if (*s.condition >= lo && *s.condition <= hi) {
        s.regime = "interpolation";
      } else {
        s.regime = "extrapolation";
      }
    }
    for (std::size_t c = 0; c < nc; ++c) report.mean_channel_rel_l2[c] += s.error.per_channel[c];
    report.local_errors.push_back(local_relative_error(pred_flat, truth_flat, nc));
    report.samples.push_back(std::move(s));
  }
  if (!report.samples.empty()) {
    for (auto& v : report.mean_channel_rel_l2) v /= static_cast<double>(report.samples.size());
  }
  report.mean_rel_l2 = nc ? std::accumulate(report.mean_channel_rel_l2.begin(),
                                            report.mean_channel_rel_l2.end(), 0.0) /
                                static_cast<double>(nc)
                          : 0.0;
  report.local = summarize(report.local_errors);

  if (task.mode == TaskMode::Temporal && data.n_samples() > 0) {
    const Example ex = surrogate.prepare(data, 0);
    Tape tape(false);
    const auto& m = surrogate.model();
    const auto z0 = m.make_initial_latent(tape, m.encode(tape, ex.inputs, ex.coords), ex.query);
    report.propagator_spectral_norm = surrogate.model().propagator_spectral_norm(z0.z);
  }
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

Dataset predict(const Surrogate& surrogate, const Dataset& data, std::size_t condition_steps) {
  surrogate.check_compatible(data);
  const auto& task = surrogate.task();
  if (task.mode == TaskMode::Temporal && condition_steps != task.condition_steps) {
    fail(ErrorCode::Configuration, "model was trained on " + std::to_string(task.condition_steps) +
                                       " condition steps, not " + std::to_string(condition_steps));
  }
  Dataset out;
  out.coord_dim = data.coord_dim;
  out.n_points = data.n_points;
  out.n_steps = surrogate.predicted_steps(data);
  out.dt = data.dt;
  out.coords = data.coords;
  out.channels = surrogate.output_channels();
  for (auto c : surrogate.output_index()) out.units.push_back(surrogate.units()[c]);
  out.attributes = {{"kind", "prediction"},
                    {"first_step", task.mode == TaskMode::Temporal ? condition_steps : 0}};
  std::vector<double> flat;
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    const Example ex = surrogate.prepare(data, i);
    Tape tape(false);
    flatten(surrogate.forward(tape, ex), flat);
    out.samples.push_back({flat, data.samples[i].metadata});
  }
  return out;
}

}  // namespace rheo::training
