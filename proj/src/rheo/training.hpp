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
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rheo/field.hpp"
#include "rheo/model.hpp"

namespace rheo::training {

using ad::Tape;
using ad::Tensor;

// ---- metrics --------------------------------------------------------------

// pred and truth are [point][channel] (or [step][point][channel]) row-major.
struct RelativeL2 {
  double value = 0.0;                 // mean over channels
  std::vector<double> per_channel;
  std::vector<bool> absolute_fallback;  // truth norm was zero for this channel
};

RelativeL2 relative_l2(std::span<const double> pred, std::span<const double> truth,
                       std::size_t channels);

struct LocalError {
  std::vector<double> relative;  // NaN where masked
  std::vector<double> absolute;
  std::vector<std::uint8_t> masked;
  std::vector<double> threshold;  // per channel
};

// |truth - pred| / |truth|; points with |truth| < rel_eps * max|truth| of
// their channel are masked and keep only the absolute error.
LocalError local_relative_error(std::span<const double> pred,
                                std::span<const double> truth, std::size_t channels,
                                double rel_eps = 1e-8);

struct ErrorSummary {
  std::size_t counted = 0;
  std::size_t masked = 0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
  double ceiling = 0.25;
  double fraction_below_ceiling = 1.0;

  nlohmann::json to_json() const;
};

// Masked entries are excluded.
ErrorSummary summarize(std::span<const LocalError> errors, double ceiling = 0.25);

// ---- optimizer ------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

struct AdamState {
  std::uint64_t step = 0;
  std::uint64_t skipped = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

double global_grad_norm(std::span<const Tensor> params);

// Returns false and counts a skip when any gradient is non-finite.
bool adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& config);

// ---- configuration --------------------------------------------------------

enum class TaskMode { Static, Temporal };

struct TaskConfig {
  TaskMode mode = TaskMode::Temporal;
  std::size_t condition_steps = 10;          // temporal only
  std::vector<std::string> input_channels;   // static only
  std::vector<std::string> output_channels;  // static only
  std::string condition_key = "dpdx";        // sample metadata used for splits

  void validate() const;
  nlohmann::json to_json() const;
  static TaskConfig from_json(const nlohmann::json& j);
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t epochs = 500;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  std::string normalization = "per_channel";  // per_channel | instance | none
  std::string loss_reduction = "mean";        // mean | sum over predicted steps
  std::string lr_schedule = "constant";       // constant | cosine
  double lr_final_fraction = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  double learning_rate_at(std::size_t epoch) const;  // epoch is 1-based
  AdamConfig adam(std::size_t epoch) const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// ---- normalization ---------------------------------------------------------

struct Normalizer {
  std::vector<double> mean;  // per dataset channel
  std::vector<double> stddev;
  std::vector<double> coord_min;
  std::vector<double> coord_max;
  // "instance": each sample is first divided, per channel, by its RMS over the
  // first `window` steps; mean/stddev then describe the rescaled data.
  std::size_t window = 0;

  // Statistics over every sample, step and point of `data`.
  static Normalizer fit(const Dataset& data, const std::string& policy,
                        std::size_t window = 0);

  bool per_sample() const { return window > 0; }
  // Per-channel divisors for one sample; all ones unless per_sample().
  std::vector<double> sample_scale(const Dataset& data, std::size_t sample) const;

  double normalize(std::size_t channel, double x) const {
    return (x - mean[channel]) / stddev[channel];
  }
  double denormalize(std::size_t channel, double x) const {
    return x * stddev[channel] + mean[channel];
  }
  double scale_coord(std::size_t dim, double x) const;

  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);
};

// ---- surrogate ------------------------------------------------------------

struct Example {
  Tensor inputs;                 // n x in_channels, normalized
  Tensor coords;                 // n x coord_dim, scaled
  Tensor scale;                  // per output channel; empty unless per-sample scaling
  Tensor query;                  // m x coord_dim, scaled
  std::vector<Tensor> targets;   // physical units, one per predicted step
};

// A model together with everything needed to map dataset records to and from
// its normalized inputs and outputs.
class Surrogate {
 public:
  Surrogate(const model::ModelConfig& model_config, const TaskConfig& task,
            const Normalizer& normalizer, std::vector<std::string> channels,
            std::vector<std::string> units, std::uint64_t seed);

  // Derives in/out channel counts and coord_dim from the dataset.
  static Surrogate create(const Dataset& train, model::ModelConfig model_config,
                          const TaskConfig& task, const std::string& normalization,
                          std::uint64_t seed);

  model::OperatorTransformer& model() { return model_; }
  const model::OperatorTransformer& model() const { return model_; }
  const TaskConfig& task() const { return task_; }
  const Normalizer& normalizer() const { return normalizer_; }
  const std::vector<std::string>& channels() const { return channels_; }
  const std::vector<std::string>& units() const { return units_; }
  const std::vector<std::size_t>& input_index() const { return input_index_; }
  const std::vector<std::size_t>& output_index() const { return output_index_; }
  std::vector<std::string> output_channels() const;

  // Condition values seen in training (used to flag held-out samples).
  std::vector<double>& training_conditions() { return training_conditions_; }
  const std::vector<double>& training_conditions() const { return training_conditions_; }

  // Throws Schema when the dataset does not match the trained layout.
  void check_compatible(const Dataset& data) const;
  std::size_t predicted_steps(const Dataset& data) const;

  Example prepare(const Dataset& data, std::size_t sample) const;
  // Physical-unit predictions, one tensor per predicted step.
  std::vector<Tensor> forward(Tape& tape, const Example& ex) const;
  Tensor loss(Tape& tape, const Example& ex, const std::string& reduction = "mean") const;

 private:
  model::OperatorTransformer model_;
  TaskConfig task_;
  Normalizer normalizer_;
  std::vector<std::string> channels_;
  std::vector<std::string> units_;
  std::vector<std::size_t> input_index_;
  std::vector<std::size_t> output_index_;
  Tensor out_mean_;
  Tensor out_std_;
  std::vector<double> training_conditions_;
};

// ---- data split -----------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Orders samples by metadata[key] (index order when absent). The two extreme
// samples go to test; remaining test and validation picks are spread evenly
// over the ordered range so held-out conditions interleave the training set.
Split stratified_split(const Dataset& data, const std::string& key,
                       double validation_fraction = 0.1, double test_fraction = 0.1);

// ---- training loop --------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before training
  double train_loss = 0.0;
  double validation_loss = std::numeric_limits<double>::quiet_NaN();
  double learning_rate = 0.0;
  std::uint64_t skipped_steps = 0;
};

struct FitState {
  std::size_t epoch = 0;  // completed epochs
  AdamState adam;
  std::vector<std::vector<double>> best_parameters;
  double best_validation = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

struct FitOptions {
  // Stop once this many epochs are complete (resume support); default: all.
  std::optional<std::size_t> stop_after_epoch;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Mean loss over the dataset, inference tape.
double dataset_loss(const Surrogate& s, std::span<const Example> examples,
                    const std::string& reduction);
std::vector<Example> prepare_all(const Surrogate& s, const Dataset& data);

// Mini-batch Adam over per-sample losses. Leaves the model at the final
// weights; the best-validation weights are in the returned state.
FitState fit(Surrogate& surrogate, const Dataset& train, const Dataset* validation,
             const TrainConfig& config, FitState state = {}, const FitOptions& options = {});

// ---- evaluation -----------------------------------------------------------

struct SampleEvaluation {
  std::size_t index = 0;
  nlohmann::json metadata = nlohmann::json::object();
  RelativeL2 error;
  std::optional<double> condition;
  std::optional<double> wi;
  bool condition_seen = false;
  // seen | interpolation | extrapolation | unknown, relative to the training
  // conditions.
  std::string regime = "unknown";
};

struct EvalReport {
  std::vector<std::string> channels;
  std::size_t condition_steps = 0;
  std::size_t predicted_steps = 0;
  std::size_t n_points = 0;
  std::string condition_key;
  std::vector<SampleEvaluation> samples;
  std::vector<double> mean_channel_rel_l2;
  double mean_rel_l2 = 0.0;
  ErrorSummary local;
  std::vector<LocalError> local_errors;  // per sample, [step][point][channel]
  std::optional<double> propagator_spectral_norm;
  double wall_time_s = 0.0;

  nlohmann::json to_json() const;
  // Per-point error fields as a dataset: <channel>.rel_err, .abs_err, .masked.
  Dataset error_fields(const Dataset& source) const;
};

// Conditions on the first k snapshots (temporal) and rolls out the rest.
// Static tasks ignore k.
EvalReport evaluate(Surrogate& surrogate, const Dataset& data, std::size_t condition_steps);

// Predicted fields in physical units; temporal output covers steps k..end.
Dataset predict(const Surrogate& surrogate, const Dataset& data, std::size_t condition_steps);

}  // namespace rheo::training
