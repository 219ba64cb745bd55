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

// rheo command-line front end. Talks to the library only through rheo.h.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rheo.h"

namespace {

using nlohmann::json;

struct CliError {
  int code;
  std::string message;
};

void check(rheo_status s, const std::string& what) {
  if (s != RHEO_OK) {
    throw CliError{static_cast<int>(s), what + ": " + rheo_status_name(s) + ": " + rheo_last_error()};
  }
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{RHEO_ERR_IO, "cannot open " + path};
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw CliError{RHEO_ERR_SCHEMA, path + ": " + e.what()};
  }
}

// RAII holders for the opaque handles.
struct Dataset {
  rheo_dataset* p = nullptr;
  Dataset() = default;
  Dataset(const Dataset&) = delete;
  Dataset& operator=(const Dataset&) = delete;
  ~Dataset() { rheo_dataset_free(p); }
};

struct Surrogate {
  rheo_surrogate* p = nullptr;
  Surrogate() = default;
  Surrogate(const Surrogate&) = delete;
  Surrogate& operator=(const Surrogate&) = delete;
  ~Surrogate() { rheo_surrogate_free(p); }
};

void summarize(const Dataset& d, const std::string& path) {
  size_t n = 0, points = 0, steps = 0, channels = 0, dim = 0;
  check(rheo_dataset_shape(d.p, &n, &points, &steps, &channels, &dim), "shape");
  std::cout << "wrote " << path << ": " << n << " samples, " << points << " points, " << steps
            << " steps, channels";
  for (size_t c = 0; c < channels; ++c) {
    const char* name = nullptr;
    check(rheo_dataset_channel_name(d.p, c, &name), "channel name");
    std::cout << (c ? "," : " ") << name;
  }
  std::cout << "\n";
}

std::string stem_of(const std::string& path) {
  const auto dot = path.rfind('.');
  const auto slash = path.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

void on_epoch(size_t epoch, double train_loss, double validation_loss, void* user) {
  const auto every = *static_cast<size_t*>(user);
  if (every == 0 || epoch % every != 0) return;
  std::fprintf(stderr, "epoch %5zu  train %.6e  validation %.6e\n", epoch, train_loss,
               validation_loss);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rheo: attention-based operator surrogates for complex fluids"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rheo_version()));

  std::optional<std::uint64_t> seed;

  // gen-rheometric
  auto* gr = app.add_subcommand("gen-rheometric", "Generate 0-D rheometric time series");
  std::optional<std::string> gr_model, gr_protocol;
  std::string gr_out, gr_config;
  std::optional<size_t> gr_n, gr_points;
  std::optional<double> gr_t_end;
  gr->add_option("--model", gr_model, "Constitutive model (default tevp)")
      ->check(CLI::IsMember({"tevp", "giesekus", "oldroydb"}));
  gr->add_option("--protocol", gr_protocol, "Deformation protocol (default grf)")
      ->check(CLI::IsMember({"grf", "oscillatory", "shear", "extension"}));
  gr->add_option("--n-samples", gr_n, "Number of samples");
  gr->add_option("--n-points", gr_points, "Time points per sample");
  gr->add_option("--t-end", gr_t_end, "Final time in seconds");
  gr->add_option("--config", gr_config, "JSON file with generator options")
      ->check(CLI::ExistingFile);
  gr->add_option("--seed", seed, "Random seed")->envname("RHEO_SEED");
  gr->add_option("--out", gr_out, "Output dataset")->required();

  // gen-flow1d
  auto* gf = app.add_subcommand("gen-flow1d", "Generate start-up channel-flow sequences");
  std::string gf_out, gf_config;
  std::optional<size_t> gf_n;
  std::optional<double> gf_min, gf_max;
  gf->add_option("--n-samples", gf_n, "Number of sequences");
  gf->add_option("--dpdx-min", gf_min, "Most negative pressure gradient");
  gf->add_option("--dpdx-max", gf_max, "Least negative pressure gradient");
  gf->add_option("--config", gf_config, "JSON file with generator options")
      ->check(CLI::ExistingFile);
  gf->add_option("--seed", seed, "Accepted for uniformity; the solver is deterministic")
      ->envname("RHEO_SEED");
  gf->add_option("--out", gf_out, "Output dataset")->required();

  // export-planar
  auto* ep = app.add_subcommand("export-planar", "Lay channel-flow data out on a 2-D point cloud");
  std::string ep_data, ep_out;
  size_t ep_nx = 8;
  double ep_length = 4.0;
  ep->add_option("--data", ep_data, "Channel-flow dataset")->required()->check(CLI::ExistingFile);
  ep->add_option("--nx", ep_nx, "Columns along the flow direction");
  ep->add_option("--length", ep_length, "Streamwise extent");
  ep->add_option("--out", ep_out, "Output dataset")->required();

  // train
  auto* tr = app.add_subcommand("train", "Fit a surrogate");
  std::string tr_data, tr_config, tr_out, tr_history;
  size_t tr_every = 10;
  tr->add_option("--data", tr_data, "Training dataset")->required()->check(CLI::ExistingFile);
  tr->add_option("--config", tr_config, "JSON with model, task, train and split objects")
      ->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--history", tr_history, "Loss table (default <out stem>.history.csv)");
  tr->add_option("--log-every", tr_every, "Progress line every N epochs, 0 for none");
  tr->add_option("--seed", seed, "Random seed")->envname("RHEO_SEED");

  // predict
  auto* pr = app.add_subcommand("predict", "Predict fields with a trained surrogate");
  std::string pr_ckpt, pr_data, pr_out;
  std::optional<size_t> pr_k;
  pr->add_option("--checkpoint", pr_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  pr->add_option("--data", pr_data, "Input dataset")->required()->check(CLI::ExistingFile);
  pr->add_option("--condition-steps", pr_k, "Conditioning snapshots (default: as trained)");
  pr->add_option("--out", pr_out, "Output dataset")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a surrogate against reference data");
  std::string ev_ckpt, ev_data, ev_report, ev_errors;
  std::optional<size_t> ev_k;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "Reference dataset")->required()->check(CLI::ExistingFile);
  ev->add_option("--condition-steps", ev_k, "Conditioning snapshots (default: as trained)");
  ev->add_option("--report", ev_report, "Report path (JSON)")->required();
  ev->add_option("--errors", ev_errors, "Error-field dataset (default <report stem>.errors.rheo)");

  // plot
  auto* pl = app.add_subcommand("plot", "Emit SVG figures with CSV sidecars");
  std::string pl_data, pl_report, pl_what = "series", pl_channel, pl_out;
  size_t pl_sample = 0, pl_step = 0;
  auto* pl_data_opt =
      pl->add_option("--data", pl_data, "Dataset to plot")->check(CLI::ExistingFile);
  auto* pl_report_opt =
      pl->add_option("--report", pl_report, "Evaluation report to plot")->check(CLI::ExistingFile);
  pl_data_opt->excludes(pl_report_opt);
  pl->add_option("--what", pl_what, "Figure kind")
      ->check(CLI::IsMember({"series", "heatmap", "error"}));
  pl->add_option("--sample", pl_sample, "Sample index");
  pl->add_option("--channel", pl_channel, "Channel name");
  pl->add_option("--step", pl_step, "Snapshot index");
  pl->add_option("--out", pl_out, "Output stem")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gr) {
      json opts = gr_config.empty() ? json::object() : load_json_file(gr_config);
      if (gr_model) opts["model"] = *gr_model;
      if (gr_protocol) opts["protocol"] = *gr_protocol;
      if (gr_n) opts["n_samples"] = *gr_n;
      if (gr_points) opts["n_points"] = *gr_points;
      if (gr_t_end) opts["t_end"] = *gr_t_end;
      if (seed) opts["seed"] = *seed;
      Dataset d;
      check(rheo_generate_rheometric(opts.dump().c_str(), &d.p), "gen-rheometric");
      check(rheo_dataset_write(d.p, gr_out.c_str()), "write " + gr_out);
      summarize(d, gr_out);
    } else if (*gf) {
      json opts = gf_config.empty() ? json::object() : load_json_file(gf_config);
      if (gf_n) opts["n_samples"] = *gf_n;
      if (gf_min) opts["dpdx_min"] = *gf_min;
      if (gf_max) opts["dpdx_max"] = *gf_max;
      Dataset d;
      check(rheo_generate_flow1d(opts.dump().c_str(), &d.p), "gen-flow1d");
      check(rheo_dataset_write(d.p, gf_out.c_str()), "write " + gf_out);
      summarize(d, gf_out);
    } else if (*ep) {
      Dataset in, out;
      check(rheo_dataset_read(ep_data.c_str(), &in.p), "read " + ep_data);
      check(rheo_export_planar(in.p, ep_nx, ep_length, &out.p), "export-planar");
      check(rheo_dataset_write(out.p, ep_out.c_str()), "write " + ep_out);
      summarize(out, ep_out);
    } else if (*tr) {
      json cfg = tr_config.empty() ? json::object() : load_json_file(tr_config);
      if (seed) cfg["train"]["seed"] = *seed;
      Dataset d;
      check(rheo_dataset_read(tr_data.c_str(), &d.p), "read " + tr_data);
      Surrogate s;
      check(rheo_train(d.p, cfg.dump().c_str(), on_epoch, &tr_every, &s.p), "train");
      check(rheo_surrogate_save(s.p, tr_out.c_str()), "write " + tr_out);
      const std::string history = tr_history.empty() ? stem_of(tr_out) + ".history.csv" : tr_history;
      check(rheo_surrogate_write_history(s.p, history.c_str()), "write " + history);
      std::cout << "wrote " << tr_out << " and " << history << "\n";
    } else if (*pr) {
      Surrogate s;
      check(rheo_surrogate_load(pr_ckpt.c_str(), &s.p), "read " + pr_ckpt);
      size_t k = 0;
      check(rheo_surrogate_condition_steps(s.p, &k), "checkpoint");
      if (pr_k) k = *pr_k;
      Dataset d, out;
      check(rheo_dataset_read(pr_data.c_str(), &d.p), "read " + pr_data);
      check(rheo_predict(s.p, d.p, k, &out.p), "predict");
      check(rheo_dataset_write(out.p, pr_out.c_str()), "write " + pr_out);
      summarize(out, pr_out);
    } else if (*ev) {
      Surrogate s;
      check(rheo_surrogate_load(ev_ckpt.c_str(), &s.p), "read " + ev_ckpt);
      size_t k = 0;
      check(rheo_surrogate_condition_steps(s.p, &k), "checkpoint");
      if (ev_k) k = *ev_k;
      Dataset d;
      check(rheo_dataset_read(ev_data.c_str(), &d.p), "read " + ev_data);
      const std::string errors = ev_errors.empty() ? stem_of(ev_report) + ".errors.rheo" : ev_errors;
      double mean = 0.0;
      check(rheo_evaluate(s.p, d.p, k, ev_report.c_str(), errors.c_str(), &mean), "eval");
      std::cout << "mean relative L2 " << mean << "\nwrote " << ev_report << " and " << errors
                << "\n";
    } else if (*pl) {
      if (pl_data.empty() == pl_report.empty()) {
        throw CliError{RHEO_ERR_INVALID_ARGUMENT, "plot needs exactly one of --data, --report"};
      }
      if (!pl_report.empty()) {
        check(rheo_plot_report(pl_report.c_str(), pl_out.c_str()), "plot");
      } else {
        Dataset d;
        check(rheo_dataset_read(pl_data.c_str(), &d.p), "read " + pl_data);
        check(rheo_plot_dataset(d.p, pl_what.c_str(), pl_sample,
                                pl_channel.empty() ? nullptr : pl_channel.c_str(), pl_step,
                                pl_out.c_str()),
              "plot");
      }
      std::cout << "wrote figure " << pl_out << "\n";
    }
  } catch (const CliError& e) {
    std::cerr << "rheo: " << e.message << "\n";
    return e.code == 0 ? 1 : e.code;
  }
  return 0;
}
