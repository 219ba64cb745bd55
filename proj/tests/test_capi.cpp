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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rheo.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("rheo_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kFlowOptions =
    R"({"n_samples": 6, "channel": {"ny": 9, "t_end": 1.2, "snapshots": 9}})";

const char* kTrainConfig = R"({
  "model": {"d_model": 8, "n_heads": 2, "n_encoder_layers": 1, "ffn_width": 16,
            "propagator_width": 16, "decoder_width": 8, "fourier_features": 4},
  "task": {"mode": "temporal", "condition_steps": 3},
  "train": {"epochs": 3, "batch_size": 2, "seed": 4},
  "split": {"validation_fraction": 0.2, "test_fraction": 0.2}
})";

struct Counter {
  std::vector<std::size_t> epochs;
};

void on_epoch(size_t epoch, double train_loss, double, void* user) {
  EXPECT_TRUE(std::isfinite(train_loss));
  static_cast<Counter*>(user)->epochs.push_back(epoch);
}

}  // namespace

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STREQ(rheo_version(), "1.0.0");
  EXPECT_STREQ(rheo_status_name(RHEO_OK), "ok");
  EXPECT_STREQ(rheo_status_name(RHEO_ERR_SIZE_MISMATCH), "size mismatch");
}

TEST(CApi, NullArgumentsAreRejected) {
  rheo_dataset* d = nullptr;
  EXPECT_EQ(rheo_dataset_read(nullptr, &d), RHEO_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(rheo_last_error()).find("NULL"), std::string::npos);
  EXPECT_EQ(rheo_dataset_read("x", nullptr), RHEO_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(rheo_dataset_shape(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr),
            RHEO_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(rheo_train(nullptr, "{}", nullptr, nullptr, nullptr), RHEO_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(rheo_predict(nullptr, nullptr, 1, nullptr), RHEO_ERR_INVALID_ARGUMENT);
  rheo_dataset_free(nullptr);
  rheo_surrogate_free(nullptr);
}

TEST(CApi, ErrorCodesAndLastError) {
  rheo_dataset* d = nullptr;
  EXPECT_EQ(rheo_dataset_read("/nonexistent/file.rheo", &d), RHEO_ERR_IO);
  EXPECT_EQ(d, nullptr);
  EXPECT_STRNE(rheo_last_error(), "");
  EXPECT_EQ(rheo_generate_flow1d("{not json", &d), RHEO_ERR_SCHEMA);
  EXPECT_EQ(rheo_generate_rheometric(R"({"model": "maxwell"})", &d), RHEO_ERR_CONFIGURATION);
  EXPECT_NE(std::string(rheo_last_error()).find("maxwell"), std::string::npos);
  ASSERT_EQ(rheo_generate_rheometric(R"({"n_samples": 1, "n_points": 8})", &d), RHEO_OK);
  EXPECT_STREQ(rheo_last_error(), "");
  rheo_dataset_free(d);
}

TEST(CApi, DatasetAccessAndRoundTrip) {
  const auto dir = scratch_dir("data");
  rheo_dataset* d = nullptr;
  ASSERT_EQ(rheo_generate_rheometric(R"({"n_samples": 3, "n_points": 12, "seed": 2})", &d),
            RHEO_OK);
  size_t ns = 0, np = 0, nt = 0, nc = 0, cd = 0;
  ASSERT_EQ(rheo_dataset_shape(d, &ns, &np, &nt, &nc, &cd), RHEO_OK);
  EXPECT_EQ(ns, 3u);
  EXPECT_EQ(np, 12u);
  EXPECT_EQ(nt, 1u);
  EXPECT_EQ(nc, 3u);
  EXPECT_EQ(cd, 1u);
  const char* name = nullptr;
  ASSERT_EQ(rheo_dataset_channel_name(d, 1, &name), RHEO_OK);
  EXPECT_STREQ(name, "sigma_12");
  EXPECT_EQ(rheo_dataset_channel_name(d, 3, &name), RHEO_ERR_INVALID_ARGUMENT);
  const double* values = nullptr;
  size_t count = 0;
  ASSERT_EQ(rheo_dataset_values(d, 2, &values, &count), RHEO_OK);
  EXPECT_EQ(count, 36u);
  EXPECT_EQ(rheo_dataset_values(d, 3, &values, &count), RHEO_ERR_INVALID_ARGUMENT);

  const auto path = (dir / "d.rheo").string();
  ASSERT_EQ(rheo_dataset_write(d, path.c_str()), RHEO_OK);
  rheo_dataset* back = nullptr;
  ASSERT_EQ(rheo_dataset_read(path.c_str(), &back), RHEO_OK);
  const double* v2 = nullptr;
  size_t c2 = 0;
  ASSERT_EQ(rheo_dataset_values(back, 2, &v2, &c2), RHEO_OK);
  ASSERT_EQ(rheo_dataset_values(d, 2, &values, &count), RHEO_OK);
  EXPECT_EQ(std::vector<double>(values, values + count), std::vector<double>(v2, v2 + c2));

  // Truncation through the C boundary reports the size problem.
  fs::resize_file(path, fs::file_size(path) - 4);
  rheo_dataset* broken = nullptr;
  EXPECT_EQ(rheo_dataset_read(path.c_str(), &broken), RHEO_ERR_SIZE_MISMATCH);
  rheo_dataset_free(back);
  rheo_dataset_free(d);
}

TEST(CApi, TrainSaveLoadPredictEvaluate) {
  const auto dir = scratch_dir("train");
  rheo_dataset* d = nullptr;
  ASSERT_EQ(rheo_generate_flow1d(kFlowOptions, &d), RHEO_OK) << rheo_last_error();
  Counter counter;
  rheo_surrogate* s = nullptr;
  ASSERT_EQ(rheo_train(d, kTrainConfig, on_epoch, &counter, &s), RHEO_OK) << rheo_last_error();
  EXPECT_EQ(counter.epochs, (std::vector<std::size_t>{0, 1, 2, 3}));
  size_t k = 0;
  ASSERT_EQ(rheo_surrogate_condition_steps(s, &k), RHEO_OK);
  EXPECT_EQ(k, 3u);

  const auto ckpt = (dir / "m.ckpt").string();
  ASSERT_EQ(rheo_surrogate_save(s, ckpt.c_str()), RHEO_OK);
  rheo_surrogate* loaded = nullptr;
  ASSERT_EQ(rheo_surrogate_load(ckpt.c_str(), &loaded), RHEO_OK) << rheo_last_error();
  const auto ckpt2 = (dir / "m2.ckpt").string();
  ASSERT_EQ(rheo_surrogate_save(loaded, ckpt2.c_str()), RHEO_OK);
  std::ifstream a(ckpt, std::ios::binary), b(ckpt2, std::ios::binary);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());

  const auto hist = (dir / "h.csv").string();
  ASSERT_EQ(rheo_surrogate_write_history(loaded, hist.c_str()), RHEO_OK);
  std::ifstream h(hist);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(h, line)) ++lines;
  EXPECT_EQ(lines, 5u);

  rheo_dataset* pred = nullptr;
  ASSERT_EQ(rheo_predict(loaded, d, 3, &pred), RHEO_OK);
  size_t ns = 0, np = 0, nt = 0, nc = 0, cd = 0;
  ASSERT_EQ(rheo_dataset_shape(pred, &ns, &np, &nt, &nc, &cd), RHEO_OK);
  EXPECT_EQ(ns, 6u);
  EXPECT_EQ(nt, 6u);
  EXPECT_EQ(rheo_predict(loaded, d, 2, &pred), RHEO_ERR_CONFIGURATION);

  const auto report = (dir / "r.json").string();
  const auto errors = (dir / "e.rheo").string();
  double mean = -1.0;
  ASSERT_EQ(rheo_evaluate(loaded, d, 3, report.c_str(), errors.c_str(), &mean), RHEO_OK)
      << rheo_last_error();
  EXPECT_TRUE(std::isfinite(mean));
  EXPECT_GE(mean, 0.0);
  std::ifstream rf(report);
  const auto j = nlohmann::json::parse(rf);
  EXPECT_EQ(j.at("predicted_steps").get<std::size_t>(), 6u);
  EXPECT_DOUBLE_EQ(j.at("mean_relative_l2_all").get<double>(), mean);
  rheo_dataset* err = nullptr;
  ASSERT_EQ(rheo_dataset_read(errors.c_str(), &err), RHEO_OK);

  const auto fig = (dir / "f.svg").string();
  EXPECT_EQ(rheo_plot_dataset(d, "heatmap", 0, "u_x", 0, fig.c_str()), RHEO_OK) << rheo_last_error();
  EXPECT_TRUE(fs::exists(fig));
  EXPECT_EQ(rheo_plot_dataset(d, "pie", 0, nullptr, 0, fig.c_str()), RHEO_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(rheo_plot_report(report.c_str(), (dir / "r.svg").string().c_str()), RHEO_OK);

  rheo_dataset_free(err);
  rheo_dataset_free(pred);
  rheo_surrogate_free(loaded);
  rheo_surrogate_free(s);
  rheo_dataset_free(d);
}

TEST(CApi, ExportPlanar) {
  rheo_dataset* d = nullptr;
  ASSERT_EQ(rheo_generate_flow1d(R"({"n_samples": 2, "channel": {"ny": 9, "t_end": 0.5, "snapshots": 3}})", &d),
            RHEO_OK) << rheo_last_error();
  rheo_dataset* p = nullptr;
  ASSERT_EQ(rheo_export_planar(d, 3, 2.0, &p), RHEO_OK) << rheo_last_error();
  size_t ns = 0, np = 0, nt = 0, nc = 0, cd = 0;
  ASSERT_EQ(rheo_dataset_shape(p, &ns, &np, &nt, &nc, &cd), RHEO_OK);
  EXPECT_EQ(cd, 2u);
  EXPECT_EQ(np, 3u * 11u);
  EXPECT_EQ(nc, 5u);
  rheo_dataset* again = nullptr;
  EXPECT_EQ(rheo_export_planar(p, 3, 2.0, &again), RHEO_ERR_SHAPE_MISMATCH);
  rheo_dataset_free(p);
  rheo_dataset_free(d);
}
