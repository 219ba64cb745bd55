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

#include "rheo/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "rheo/error.hpp"
#include "rheo/io.hpp"

namespace rheo::plot {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 140.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                             "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo <= 0.0) {
      const double pad = std::max(1e-12, std::abs(lo) * 0.05 + 0.5);
      lo -= pad;
      hi += pad;
    }
  }
  double frac(double v) const { return (v - lo) / (hi - lo); }
};

std::string number(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::string header(const std::string& title) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(title) << "</text>\n";
  return s.str();
}

std::string axes(const Range& xr, const Range& yr, const std::string& xlabel,
                 const std::string& ylabel) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::ostringstream s;
  s << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\""
    << y0 - y1 << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    const double px = x0 + f * (x1 - x0);
    const double py = y0 - f * (y0 - y1);
    s << "<text x=\"" << px << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">"
      << number(xr.lo + f * (xr.hi - xr.lo)) << "</text>\n";
    s << "<text x=\"" << x0 - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">"
      << number(yr.lo + f * (yr.hi - yr.lo)) << "</text>\n";
  }
  s << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
    << escape(xlabel) << "</text>\n";
  s << "<text transform=\"translate(16," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(ylabel) << "</text>\n";
  return s.str();
}

// Five-stop blue-green-yellow ramp.
std::string colour(double f) {
  static const std::array<std::array<double, 3>, 5> stops = {
      {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  if (!std::isfinite(f)) return "#cccccc";
  f = std::clamp(f, 0.0, 1.0) * 4.0;
  const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(f));
  const double t = f - static_cast<double>(i);
  char buf[8];
  int rgb[3];
  for (int k = 0; k < 3; ++k) {
    rgb[k] = static_cast<int>(std::lround(stops[i][k] + t * (stops[i + 1][k] - stops[i][k])));
  }
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

std::size_t channel_of(const Dataset& d, const std::string& name) {
  if (name.empty()) return 0;
  return d.channel_index(name);
}

double min_gap(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) g = std::min(g, v[i] - v[i - 1]);
  return std::isfinite(g) ? g : 1.0;
}

}  // namespace

Figure line_plot(const std::string& title, const std::string& xlabel,
                 const std::string& ylabel, const std::vector<Series>& series) {
  Range xr, yr;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) fail(ErrorCode::ShapeMismatch, "series x and y differ in length");
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.finish();
  yr.finish();
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::ostringstream svg;
  svg << header(title) << axes(xr, yr, xlabel, ylabel);
  std::ostringstream csv;
  csv.precision(17);
  csv << "series," << csv_field(xlabel) << ',' << csv_field(ylabel) << '\n';
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* col = kPalette[k % kPalette.size()];
    svg << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      csv << csv_field(s.name) << ',' << s.x[i] << ',' << s.y[i] << '\n';
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      svg << x0 + xr.frac(s.x[i]) * (x1 - x0) << ',' << y0 - yr.frac(s.y[i]) * (y0 - y1) << ' ';
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << x1 + 10 << "\" y=\"" << y1 + 14 + 16.0 * static_cast<double>(k)
        << "\" fill=\"" << col << "\">" << escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return {svg.str(), csv.str()};
}

Figure heatmap(const std::string& title, const std::string& xlabel, const std::string& ylabel,
               const std::vector<double>& x, const std::vector<double>& y,
               const std::vector<double>& value) {
  if (x.size() != y.size() || x.size() != value.size()) {
    fail(ErrorCode::ShapeMismatch, "heatmap arrays differ in length");
  }
  Range xr, yr, vr;
  for (std::size_t i = 0; i < x.size(); ++i) xr.add(x[i]), yr.add(y[i]), vr.add(value[i]);
  xr.finish();
  yr.finish();
  vr.finish();
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const double cw = min_gap(x) / (xr.hi - xr.lo) * (x1 - x0);
  const double ch = min_gap(y) / (yr.hi - yr.lo) * (y0 - y1);
  std::ostringstream svg;
  svg << header(title);
  std::ostringstream csv;
  csv.precision(17);
  csv << csv_field(xlabel) << ',' << csv_field(ylabel) << ",value\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    csv << x[i] << ',' << y[i] << ',' << value[i] << '\n';
    const double px = x0 + xr.frac(x[i]) * (x1 - x0);
    const double py = y0 - yr.frac(y[i]) * (y0 - y1);
    svg << "<rect x=\"" << px - cw / 2 << "\" y=\"" << py - ch / 2 << "\" width=\"" << cw
        << "\" height=\"" << ch << "\" fill=\"" << colour(vr.frac(value[i])) << "\"/>\n";
  }
  svg << axes(xr, yr, xlabel, ylabel);
  for (int i = 0; i <= 10; ++i) {
    const double f = i / 10.0;
    svg << "<rect x=\"" << x1 + 20 << "\" y=\"" << y0 - f * (y0 - y1) - (y0 - y1) / 20
        << "\" width=\"16\" height=\"" << (y0 - y1) / 10 << "\" fill=\"" << colour(f) << "\"/>\n";
  }
  svg << "<text x=\"" << x1 + 40 << "\" y=\"" << y1 + 4 << "\">" << number(vr.hi) << "</text>\n"
      << "<text x=\"" << x1 + 40 << "\" y=\"" << y0 + 4 << "\">" << number(vr.lo) << "</text>\n"
      << "</svg>\n";
  return {svg.str(), csv.str()};
}

Figure plot_dataset(const Dataset& d, const PlotRequest& r) {
  d.validate();
  if (r.sample >= d.n_samples()) fail(ErrorCode::InvalidArgument, "sample index out of range");
  if (r.step >= d.n_steps) fail(ErrorCode::InvalidArgument, "step index out of range");
  const std::string sample_tag = " (sample " + std::to_string(r.sample) + ")";
  if (r.what == "series") {
    if (d.coord_dim != 1) fail(ErrorCode::InvalidArgument, "series plots need 1-D coordinates");
    std::vector<Series> all;
    for (std::size_t c = 0; c < d.n_channels(); ++c) {
      if (!r.channel.empty() && d.channels[c] != r.channel) continue;
      Series s{d.channels[c], d.coords, {}};
      for (std::size_t p = 0; p < d.n_points; ++p) s.y.push_back(d.value(r.sample, r.step, p, c));
      all.push_back(std::move(s));
    }
    if (all.empty()) fail(ErrorCode::Schema, "unknown channel '" + r.channel + "'");
    return line_plot("step " + std::to_string(r.step) + sample_tag, "x", "value", all);
  }
  std::size_t c = channel_of(d, r.channel);
  if (r.what == "error") {
    if (r.channel.empty()) {
      auto it = std::find_if(d.channels.begin(), d.channels.end(), [](const std::string& n) {
        return n.size() > 8 && n.compare(n.size() - 8, 8, ".rel_err") == 0;
      });
      if (it == d.channels.end()) fail(ErrorCode::Schema, "dataset carries no .rel_err channel");
      c = static_cast<std::size_t>(it - d.channels.begin());
    }
  } else if (r.what != "heatmap") {
    fail(ErrorCode::InvalidArgument, "unknown plot kind '" + r.what + "'");
  }
  std::vector<double> x, y, v;
  if (d.coord_dim == 1) {
    for (std::size_t s = 0; s < d.n_steps; ++s) {
      for (std::size_t p = 0; p < d.n_points; ++p) {
        x.push_back(static_cast<double>(s) * d.dt);
        y.push_back(d.coords[p]);
        v.push_back(d.value(r.sample, s, p, c));
      }
    }
    return heatmap(d.channels[c] + sample_tag, "t", "x", x, y, v);
  }
  for (std::size_t p = 0; p < d.n_points; ++p) {
    x.push_back(d.coords[p * d.coord_dim]);
    y.push_back(d.coords[p * d.coord_dim + 1]);
    v.push_back(d.value(r.sample, r.step, p, c));
  }
  return heatmap(d.channels[c] + " step " + std::to_string(r.step) + sample_tag, "x", "y", x, y, v);
}

Figure plot_report(const nlohmann::json& report) {
  if (!report.is_object() || !report.contains("samples")) {
    fail(ErrorCode::Schema, "not an evaluation report");
  }
  std::vector<std::pair<double, double>> pts;
  for (const auto& s : report["samples"]) {
    const double cond = s.value("condition", nlohmann::json()).is_number()
                            ? s["condition"].get<double>()
                            : s.value("index", 0.0);
    pts.emplace_back(cond, s.value("mean_relative_l2", 0.0));
  }
  std::sort(pts.begin(), pts.end());
  Series s{"mean relative L2", {}, {}};
  for (const auto& [c, e] : pts) s.x.push_back(c), s.y.push_back(e);
  return line_plot("evaluation error", report.value("condition_key", std::string("condition")),
                   "relative L2", {s});
}

void write_figure(const std::string& out, const Figure& figure) {
  std::string stem = out;
  if (stem.size() > 4 && stem.compare(stem.size() - 4, 4, ".svg") == 0) stem.resize(stem.size() - 4);
  io::write_file_atomic(stem + ".svg", figure.svg);
  io::write_file_atomic(stem + ".csv", figure.csv);
}

}  // namespace rheo::plot
