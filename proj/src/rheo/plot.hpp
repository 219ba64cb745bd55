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

// SVG figures, each with a CSV sidecar holding the plotted numbers.

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "rheo/field.hpp"

namespace rheo::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Figure {
  std::string svg;
  std::string csv;
};

Figure line_plot(const std::string& title, const std::string& xlabel,
                 const std::string& ylabel, const std::vector<Series>& series);

// Cells are drawn as squares centred on (x[i], y[i]).
Figure heatmap(const std::string& title, const std::string& xlabel,
               const std::string& ylabel, const std::vector<double>& x,
               const std::vector<double>& y, const std::vector<double>& value);

struct PlotRequest {
  std::string what = "series";  // series | heatmap | error
  std::size_t sample = 0;
  std::string channel;  // empty: first channel
  std::size_t step = 0;
};

// series: every channel against the coordinate at `step` (1-D data).
// heatmap: 1-D data as time x coordinate, 2-D data as the point cloud at `step`.
// error: on an error-field dataset, a heatmap of the first .rel_err channel.
Figure plot_dataset(const Dataset& data, const PlotRequest& request);

// Per-sample mean relative L2 against the condition value.
Figure plot_report(const nlohmann::json& report);

// Writes <stem>.svg and <stem>.csv; a trailing .svg on `out` is dropped.
void write_figure(const std::string& out, const Figure& figure);

}  // namespace rheo::plot
