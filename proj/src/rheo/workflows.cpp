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

#include "rheo/workflows.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rheo/error.hpp"
#include "rheo/signals.hpp"

namespace rheo::workflows {

namespace {

using constitutive::SymTensor2;
using constitutive::VelocityGradient2;

template <class T>
void read_into(const nlohmann::json& j, const char* key, T& target) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    target = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Schema, std::string("option '") + key + "': " + e.what());
  }
}

double uniform(std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---- rheometric --------------------------------------------------------------

void RheometricOptions::validate() const {
  if (model != "tevp" && model != "giesekus" && model != "oldroydb") {
    fail(ErrorCode::Configuration, "unknown constitutive model '" + model + "'");
  }
  if (protocol != "grf" && protocol != "oscillatory" && protocol != "shear" &&
      protocol != "extension") {
    fail(ErrorCode::Configuration, "unknown protocol '" + protocol + "'");
  }
  if (model == "tevp" && protocol == "extension") {
    fail(ErrorCode::Configuration, "the TEVP model is scalar (shear only)");
  }
  if (n_samples == 0) fail(ErrorCode::Configuration, "n_samples must be positive");
  if (n_points < 4) fail(ErrorCode::Configuration, "n_points must be >= 4");
  if (!(t_end > 0.0)) fail(ErrorCode::Configuration, "t_end must be positive");
  if (substeps == 0) fail(ErrorCode::Configuration, "substeps must be positive");
  if (!(gamma0_min <= gamma0_max) || !(omega_min <= omega_max) || !(rate_min <= rate_max)) {
    fail(ErrorCode::Configuration, "protocol ranges must satisfy min <= max");
  }
  if (!(omega_min > 0.0)) fail(ErrorCode::Configuration, "omega must be positive");
  tevp.validate();
  giesekus.validate();
  oldroydb.validate();
}

nlohmann::json RheometricOptions::to_json() const {
  return {{"model", model},
          {"protocol", protocol},
          {"n_samples", n_samples},
          {"n_points", n_points},
          {"t_end", t_end},
          {"seed", seed},
          {"grf_length_scale", grf_length_scale},
          {"grf_amplitude", grf_amplitude},
          {"grf_extension_amplitude", grf_extension_amplitude},
          {"gamma0_min", gamma0_min},
          {"gamma0_max", gamma0_max},
          {"omega_min", omega_min},
          {"omega_max", omega_max},
          {"rate_min", rate_min},
          {"rate_max", rate_max},
          {"substeps", substeps},
          {"tevp",
           {{"G", tevp.G}, {"sigma_y", tevp.sigma_y}, {"eta_s", tevp.eta_s},
            {"eta_p", tevp.eta_p}, {"k_plus", tevp.k_plus}, {"k_minus", tevp.k_minus}}},
          {"giesekus",
           {{"tau1", giesekus.tau1}, {"tau2", giesekus.tau2}, {"G0", giesekus.G0},
            {"alpha", giesekus.alpha}}},
          {"oldroydb", {{"tau1", oldroydb.tau1}, {"tau2", oldroydb.tau2}, {"G0", oldroydb.G0}}}};
}

RheometricOptions RheometricOptions::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::Schema, "rheometric options must be an object");
  RheometricOptions o;
  read_into(j, "model", o.model);
  read_into(j, "protocol", o.protocol);
  read_into(j, "n_samples", o.n_samples);
  read_into(j, "n_points", o.n_points);
  read_into(j, "t_end", o.t_end);
  read_into(j, "seed", o.seed);
  read_into(j, "grf_length_scale", o.grf_length_scale);
  read_into(j, "grf_amplitude", o.grf_amplitude);
  read_into(j, "grf_extension_amplitude", o.grf_extension_amplitude);
  read_into(j, "gamma0_min", o.gamma0_min);
  read_into(j, "gamma0_max", o.gamma0_max);
  read_into(j, "omega_min", o.omega_min);
  read_into(j, "omega_max", o.omega_max);
  read_into(j, "rate_min", o.rate_min);
  read_into(j, "rate_max", o.rate_max);
  read_into(j, "substeps", o.substeps);
  if (auto t = j.find("tevp"); t != j.end()) {
    read_into(*t, "G", o.tevp.G);
    read_into(*t, "sigma_y", o.tevp.sigma_y);
    read_into(*t, "eta_s", o.tevp.eta_s);
    read_into(*t, "eta_p", o.tevp.eta_p);
    read_into(*t, "k_plus", o.tevp.k_plus);
    read_into(*t, "k_minus", o.tevp.k_minus);
  }
  if (auto g = j.find("giesekus"); g != j.end()) {
    read_into(*g, "tau1", o.giesekus.tau1);
    read_into(*g, "tau2", o.giesekus.tau2);
    read_into(*g, "G0", o.giesekus.G0);
    read_into(*g, "alpha", o.giesekus.alpha);
  }
  if (auto b = j.find("oldroydb"); b != j.end()) {
    read_into(*b, "tau1", o.oldroydb.tau1);
    read_into(*b, "tau2", o.oldroydb.tau2);
    read_into(*b, "G0", o.oldroydb.G0);
  }
  o.validate();
  return o;
}

Dataset generate_rheometric(const RheometricOptions& o) {
  o.validate();
  const auto grid = signals::time_grid(o.n_points, o.t_end);
  const double dt = grid[1] - grid[0];
  auto grf = signals::GrfConfig::defaults(o.n_points, o.t_end);
  if (o.grf_length_scale > 0.0) grf.length_scale = o.grf_length_scale;
  grf.amplitude = o.grf_amplitude;
  auto grf_ext = grf;
  grf_ext.amplitude = o.grf_extension_amplitude;
  std::unique_ptr<signals::GrfSampler> sampler, sampler_ext;
  if (o.protocol == "grf") {
    sampler = std::make_unique<signals::GrfSampler>(grf);
    if (o.model != "tevp") sampler_ext = std::make_unique<signals::GrfSampler>(grf_ext);
  }

  const bool scalar = o.model == "tevp";
  Dataset d;
  d.coord_dim = 1;
  d.n_points = o.n_points;
  d.n_steps = 1;
  d.dt = dt;
  d.coords = grid;
  if (scalar) {
    d.channels = {"gamma_dot", "sigma_12", "lambda"};
    d.units = {"1/s", "Pa", "1"};
  } else {
    d.channels = {"eps_dot", "gamma_dot", "sigma_11", "sigma_22", "sigma_12", "sigma_21"};
    d.units = {"1/s", "1/s", "Pa", "Pa", "Pa", "Pa"};
  }
  const nlohmann::json inputs = scalar ? nlohmann::json{"gamma_dot"}
                                       : nlohmann::json{"eps_dot", "gamma_dot"};
  const nlohmann::json outputs = scalar ? nlohmann::json{"sigma_12"}
                                        : nlohmann::json{"sigma_11", "sigma_22", "sigma_12", "sigma_21"};
  d.attributes = {{"kind", "rheometric"},
                  {"generator", o.to_json()},
                  {"input_channels", inputs},
                  {"output_channels", outputs}};

  const double tau1 = o.model == "giesekus" ? o.giesekus.tau1 : o.oldroydb.tau1;
  for (std::size_t s = 0; s < o.n_samples; ++s) {
    const std::uint64_t seed = mix_seed(o.seed, s);
    nlohmann::json meta = {{"model", o.model}, {"protocol", o.protocol}, {"sample", s}};
    std::vector<double> shear(o.n_points, 0.0), ext(o.n_points, 0.0);
    if (o.protocol == "grf") {
      shear = sampler->sample(seed);
      if (sampler_ext) ext = sampler_ext->sample(mix_seed(seed, 0x5eed));
      meta["seed"] = seed;
    } else if (o.protocol == "oscillatory") {
      const double g0 = uniform(mix_seed(seed, 1), o.gamma0_min, o.gamma0_max);
      const double w = uniform(mix_seed(seed, 2), o.omega_min, o.omega_max);
      shear = signals::oscillatory_shear(g0, w, grid).gamma_dot;
      meta["gamma0"] = g0;
      meta["omega"] = w;
    } else {
      const double rate = o.n_samples == 1
                              ? o.rate_min
                              : o.rate_min + (o.rate_max - o.rate_min) * static_cast<double>(s) /
                                                 static_cast<double>(o.n_samples - 1);
      (o.protocol == "shear" ? shear : ext).assign(o.n_points, rate);
      meta["rate"] = rate;
    }
    const double peak = std::max(max_abs(shear), max_abs(ext));
    meta["max_rate"] = peak;
    if (!scalar) meta["Wi"] = tau1 * peak;

    SampleBlock b;
    b.values.reserve(d.block_size());
    if (scalar) {
      const constitutive::TevpState init{o.tevp.sigma_y, 1.0};
      const auto states = constitutive::integrate_tevp(o.tevp, shear, dt, init, o.substeps);
      for (std::size_t i = 0; i < o.n_points; ++i) {
        b.values.insert(b.values.end(), {shear[i], states[i].sigma12, states[i].lambda});
      }
    } else {
      std::vector<VelocityGradient2> L(o.n_points);
      for (std::size_t i = 0; i < o.n_points; ++i) L[i] = {ext[i], shear[i], 0.0, -ext[i]};
      const auto sig = o.model == "giesekus"
                           ? constitutive::integrate_giesekus(o.giesekus, L, dt, SymTensor2{}, o.substeps)
                           : constitutive::integrate_oldroydb(o.oldroydb, L, dt, SymTensor2{}, o.substeps);
      for (std::size_t i = 0; i < o.n_points; ++i) {
        b.values.insert(b.values.end(),
                        {ext[i], shear[i], sig[i].xx, sig[i].yy, sig[i].xy, sig[i].xy});
      }
    }
    b.metadata = std::move(meta);
    d.samples.push_back(std::move(b));
  }
  d.validate();
  return d;
}

// ---- flow1d -------------------------------------------------------------------

std::vector<double> Flow1dOptions::conditions() const {
  if (!dpdx_values.empty()) return dpdx_values;
  if (n_samples == 0) fail(ErrorCode::Configuration, "n_samples must be positive");
  std::vector<double> out;
  for (std::size_t i = 0; i < n_samples; ++i) {
    out.push_back(n_samples == 1 ? dpdx_min
                                 : dpdx_min + (dpdx_max - dpdx_min) * static_cast<double>(i) /
                                                  static_cast<double>(n_samples - 1));
  }
  return out;
}

nlohmann::json Flow1dOptions::to_json() const {
  return {{"n_samples", n_samples},
          {"dpdx_min", dpdx_min},
          {"dpdx_max", dpdx_max},
          {"dpdx_values", dpdx_values},
          {"channel",
           {{"H", base.H}, {"ny", base.ny}, {"rho", base.rho}, {"eta_s", base.eta_s},
            {"eta_p", base.eta_p}, {"tau1", base.tau1}, {"dt", base.dt},
            {"t_end", base.t_end}, {"snapshots", base.snapshots}}}};
}

Flow1dOptions Flow1dOptions::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::Schema, "flow1d options must be an object");
  Flow1dOptions o;
  read_into(j, "n_samples", o.n_samples);
  read_into(j, "dpdx_min", o.dpdx_min);
  read_into(j, "dpdx_max", o.dpdx_max);
  read_into(j, "dpdx_values", o.dpdx_values);
  if (auto c = j.find("channel"); c != j.end()) {
    read_into(*c, "H", o.base.H);
    read_into(*c, "ny", o.base.ny);
    read_into(*c, "rho", o.base.rho);
    read_into(*c, "eta_s", o.base.eta_s);
    read_into(*c, "eta_p", o.base.eta_p);
    read_into(*c, "tau1", o.base.tau1);
    read_into(*c, "dt", o.base.dt);
    read_into(*c, "t_end", o.base.t_end);
    read_into(*c, "snapshots", o.base.snapshots);
  }
  return o;
}

Dataset generate_flow1d(const Flow1dOptions& o) {
  const auto values = o.conditions();
  auto seqs = flow1d::generate_flow_dataset(o.base, values, o.base.snapshots);
  Dataset d = Dataset::from_sequences(seqs);
  d.attributes = {{"kind", "flow1d"}, {"generator", o.to_json()}};
  return d;
}

// ---- training pipeline -----------------------------------------------------------

nlohmann::json TrainJob::to_json() const {
  return {{"model", model.to_json()},
          {"task", task.to_json()},
          {"train", train.to_json()},
          {"split", {{"validation_fraction", validation_fraction}, {"test_fraction", test_fraction}}}};
}

TrainJob TrainJob::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::Schema, "train config must be an object");
  TrainJob job;
  if (j.contains("model")) job.model = model::ModelConfig::from_json(j["model"]);
  if (j.contains("train")) job.train = training::TrainConfig::from_json(j["train"]);
  if (j.contains("task")) {
    // Channel lists may come from the dataset later; validate in train_surrogate.
    const auto& t = j["task"];
    if (!t.is_object()) fail(ErrorCode::Schema, "task config must be an object");
    const auto mode = t.value("mode", std::string("temporal"));
    if (mode == "static") {
      job.task.mode = training::TaskMode::Static;
    } else if (mode != "temporal") {
      fail(ErrorCode::Configuration, "unknown task mode '" + mode + "'");
    }
    read_into(t, "condition_steps", job.task.condition_steps);
    read_into(t, "input_channels", job.task.input_channels);
    read_into(t, "output_channels", job.task.output_channels);
    read_into(t, "condition_key", job.task.condition_key);
  }
  if (auto s = j.find("split"); s != j.end()) {
    read_into(*s, "validation_fraction", job.validation_fraction);
    read_into(*s, "test_fraction", job.test_fraction);
  }
  return job;
}

TrainOutcome train_surrogate(const Dataset& data, TrainJob job,
                             const std::function<void(const training::EpochRecord&)>& on_epoch) {
  data.validate();
  auto& task = job.task;
  if (task.mode == training::TaskMode::Static) {
    if (task.input_channels.empty() && data.attributes.contains("input_channels")) {
      task.input_channels = data.attributes["input_channels"].get<std::vector<std::string>>();
    }
    if (task.output_channels.empty() && data.attributes.contains("output_channels")) {
      task.output_channels = data.attributes["output_channels"].get<std::vector<std::string>>();
    }
  }
  task.validate();
  job.train.validate();

  TrainOutcome out;
  out.split = training::stratified_split(data, task.condition_key, job.validation_fraction,
                                         job.test_fraction);
  const Dataset train = data.subset(out.split.train);
  const Dataset validation = data.subset(out.split.validation);
  out.surrogate = std::make_unique<training::Surrogate>(training::Surrogate::create(
      train, job.model, task, job.train.normalization, job.train.seed));
  training::FitOptions options;
  options.on_epoch = on_epoch;
  out.state = training::fit(*out.surrogate, train,
                            validation.n_samples() ? &validation : nullptr, job.train, {}, options);
  auto& params = out.surrogate->model().parameters();
  out.final_weights = params.snapshot();
  if (!out.state.best_parameters.empty()) params.restore(out.state.best_parameters);
  return out;
}

std::string history_csv(const std::vector<training::EpochRecord>& history) {
  std::ostringstream s;
  s.precision(17);
  s << "epoch,train_loss,validation_loss,learning_rate,skipped_steps\n";
  for (const auto& h : history) {
    s << h.epoch << ',' << h.train_loss << ',';
    if (std::isfinite(h.validation_loss)) s << h.validation_loss;
    s << ',' << h.learning_rate << ',' << h.skipped_steps << '\n';
  }
  return s.str();
}

}  // namespace rheo::workflows
