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

#include "rheo.h"

#include <memory>
#include <new>
#include <optional>
#include <string>
#include <utility>

#include "rheo/error.hpp"
#include "rheo/io.hpp"
#include "rheo/plot.hpp"
#include "rheo/training.hpp"
#include "rheo/workflows.hpp"

struct rheo_dataset {
  rheo::Dataset data;
};

struct rheo_surrogate {
  std::unique_ptr<rheo::training::Surrogate> surrogate;
  rheo::training::TrainConfig train;
  std::optional<rheo::training::FitState> state;
  std::vector<std::vector<double>> resume_weights;
  nlohmann::json extra = nlohmann::json::object();
};

namespace {

thread_local std::string g_last_error;

template <class F>
rheo_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return RHEO_OK;
  } catch (const rheo::Error& e) {
    g_last_error = e.what();
    return static_cast<rheo_status>(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("JSON: ") + e.what();
    return RHEO_ERR_SCHEMA;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RHEO_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RHEO_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return RHEO_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) rheo::fail(rheo::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

nlohmann::json parse_json(const char* text) {
  if (text == nullptr || *text == '\0') return nlohmann::json::object();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    rheo::fail(rheo::ErrorCode::Schema, std::string("options do not parse: ") + e.what());
  }
}

rheo_dataset* wrap(rheo::Dataset d) { return new rheo_dataset{std::move(d)}; }

}  // namespace

extern "C" {

const char* rheo_version(void) { return "1.0.0"; }

const char* rheo_status_name(rheo_status status) {
  return rheo::error_code_name(static_cast<rheo::ErrorCode>(status));
}

const char* rheo_last_error(void) { return g_last_error.c_str(); }

rheo_status rheo_dataset_read(const char* path, rheo_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = wrap(rheo::io::read_dataset(path));
  });
}

rheo_status rheo_dataset_write(const rheo_dataset* data, const char* path) {
  return guarded([&] {
    require(data, "dataset");
    require(path, "path");
    rheo::io::write_dataset(path, data->data);
  });
}

void rheo_dataset_free(rheo_dataset* data) { delete data; }

rheo_status rheo_dataset_shape(const rheo_dataset* data, size_t* n_samples, size_t* n_points,
                               size_t* n_steps, size_t* n_channels, size_t* coord_dim) {
  return guarded([&] {
    require(data, "dataset");
    const auto& d = data->data;
    if (n_samples) *n_samples = d.n_samples();
    if (n_points) *n_points = d.n_points;
    if (n_steps) *n_steps = d.n_steps;
    if (n_channels) *n_channels = d.n_channels();
    if (coord_dim) *coord_dim = d.coord_dim;
  });
}

rheo_status rheo_dataset_channel_name(const rheo_dataset* data, size_t channel,
                                      const char** name) {
  return guarded([&] {
    require(data, "dataset");
    require(name, "name");
    if (channel >= data->data.n_channels()) {
      rheo::fail(rheo::ErrorCode::InvalidArgument, "channel index out of range");
    }
    *name = data->data.channels[channel].c_str();
  });
}

rheo_status rheo_dataset_values(const rheo_dataset* data, size_t sample, const double** values,
                                size_t* count) {
  return guarded([&] {
    require(data, "dataset");
    require(values, "values");
    if (sample >= data->data.n_samples()) {
      rheo::fail(rheo::ErrorCode::InvalidArgument, "sample index out of range");
    }
    const auto& v = data->data.samples[sample].values;
    *values = v.data();
    if (count) *count = v.size();
  });
}

rheo_status rheo_generate_rheometric(const char* options_json, rheo_dataset** out) {
  return guarded([&] {
    require(out, "out");
    const auto opts = rheo::workflows::RheometricOptions::from_json(parse_json(options_json));
    *out = wrap(rheo::workflows::generate_rheometric(opts));
  });
}

rheo_status rheo_generate_flow1d(const char* options_json, rheo_dataset** out) {
  return guarded([&] {
    require(out, "out");
    const auto opts = rheo::workflows::Flow1dOptions::from_json(parse_json(options_json));
    *out = wrap(rheo::workflows::generate_flow1d(opts));
  });
}

rheo_status rheo_export_planar(const rheo_dataset* flow1d, size_t nx, double length,
                               rheo_dataset** out) {
  return guarded([&] {
    require(flow1d, "dataset");
    require(out, "out");
    std::vector<rheo::FieldSequence> seqs;
    for (std::size_t i = 0; i < flow1d->data.n_samples(); ++i) {
      seqs.push_back(flow1d->data.sequence(i));
    }
    *out = wrap(rheo::io::export_planar(seqs, nx, length));
  });
}

rheo_status rheo_train(const rheo_dataset* data, const char* config_json,
                       rheo_epoch_callback callback, void* user, rheo_surrogate** out) {
  return guarded([&] {
    require(data, "dataset");
    require(out, "out");
    const auto job = rheo::workflows::TrainJob::from_json(parse_json(config_json));
    std::function<void(const rheo::training::EpochRecord&)> on_epoch;
    if (callback != nullptr) {
      on_epoch = [&](const rheo::training::EpochRecord& r) {
        callback(r.epoch, r.train_loss, r.validation_loss, user);
      };
    }
    auto outcome = rheo::workflows::train_surrogate(data->data, job, on_epoch);
    auto handle = std::make_unique<rheo_surrogate>();
    handle->surrogate = std::move(outcome.surrogate);
    handle->train = job.train;
    handle->state = std::move(outcome.state);
    handle->resume_weights = std::move(outcome.final_weights);
    handle->extra = {{"split",
                      {{"train", outcome.split.train},
                       {"validation", outcome.split.validation},
                       {"test", outcome.split.test}}}};
    *out = handle.release();
  });
}

rheo_status rheo_surrogate_save(const rheo_surrogate* s, const char* path) {
  return guarded([&] {
    require(s, "surrogate");
    require(path, "path");
    rheo::io::save_checkpoint(path, *s->surrogate, s->train, s->state ? &*s->state : nullptr,
                              &s->resume_weights, s->extra);
  });
}

rheo_status rheo_surrogate_load(const char* path, rheo_surrogate** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto c = rheo::io::load_checkpoint(path);
    auto handle = std::make_unique<rheo_surrogate>();
    handle->surrogate = std::move(c.surrogate);
    handle->train = c.train;
    handle->state = std::move(c.state);
    handle->resume_weights = std::move(c.resume_weights);
    handle->extra = std::move(c.extra);
    *out = handle.release();
  });
}

void rheo_surrogate_free(rheo_surrogate* s) { delete s; }

rheo_status rheo_surrogate_write_history(const rheo_surrogate* s, const char* path) {
  return guarded([&] {
    require(s, "surrogate");
    require(path, "path");
    if (!s->state) rheo::fail(rheo::ErrorCode::State, "surrogate carries no training history");
    rheo::io::write_file_atomic(path, rheo::workflows::history_csv(s->state->history));
  });
}

rheo_status rheo_surrogate_condition_steps(const rheo_surrogate* s, size_t* condition_steps) {
  return guarded([&] {
    require(s, "surrogate");
    require(condition_steps, "condition_steps");
    const auto& task = s->surrogate->task();
    *condition_steps =
        task.mode == rheo::training::TaskMode::Temporal ? task.condition_steps : 0;
  });
}

rheo_status rheo_predict(const rheo_surrogate* s, const rheo_dataset* data,
                         size_t condition_steps, rheo_dataset** out) {
  return guarded([&] {
    require(s, "surrogate");
    require(data, "dataset");
    require(out, "out");
    *out = wrap(rheo::training::predict(*s->surrogate, data->data, condition_steps));
  });
}

rheo_status rheo_evaluate(rheo_surrogate* s, const rheo_dataset* data, size_t condition_steps,
                          const char* report_path, const char* errors_path,
                          double* mean_relative_l2) {
  return guarded([&] {
    require(s, "surrogate");
    require(data, "dataset");
    require(report_path, "report_path");
    const auto report = rheo::training::evaluate(*s->surrogate, data->data, condition_steps);
    rheo::io::write_file_atomic(report_path, report.to_json().dump(2) + "\n");
    if (errors_path != nullptr) {
      rheo::io::write_dataset(errors_path, report.error_fields(data->data));
    }
    if (mean_relative_l2 != nullptr) *mean_relative_l2 = report.mean_rel_l2;
  });
}

rheo_status rheo_plot_dataset(const rheo_dataset* data, const char* what, size_t sample,
                              const char* channel, size_t step, const char* out) {
  return guarded([&] {
    require(data, "dataset");
    require(what, "what");
    require(out, "out");
    rheo::plot::PlotRequest r;
    r.what = what;
    r.sample = sample;
    r.channel = channel ? channel : "";
    r.step = step;
    rheo::plot::write_figure(out, rheo::plot::plot_dataset(data->data, r));
  });
}

rheo_status rheo_plot_report(const char* report_path, const char* out) {
  return guarded([&] {
    require(report_path, "report_path");
    require(out, "out");
    const auto text = rheo::io::read_file(report_path);
    rheo::plot::write_figure(out, rheo::plot::plot_report(parse_json(text.c_str())));
  });
}

}  // extern "C"
