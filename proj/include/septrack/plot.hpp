// Copyright 2026 The septrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// @file plot.hpp
/// Minimal SVG line and scatter plots with optional log axes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "septrack/io.hpp"

namespace septrack {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = true;
  bool logy = false;
  int width = 640;
  int height = 420;
};

namespace detail {

inline constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                           "#d62728", "#9467bd", "#8c564b",
                                           "#e377c2", "#7f7f7f"};

inline std::string xml_escape(std::string_view s) {
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

// Fixed short formatting for coordinates and tick labels.
inline std::string fmt(double v, int prec = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

inline std::string tick_label(double v, bool log) {
  char buf[48];
  if (log) std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(std::lround(v)));
  else std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;

  double map(double v) const { return log ? std::log10(v) : v; }
  bool usable(double v) const {
    return std::isfinite(v) && (!log || v > 0.0);
  }
  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double e = std::ceil(lo); e <= hi + 1e-9; e += 1.0) out.push_back(e);
      if (out.size() > 12) {
        std::vector<double> thin;
        const auto step = (out.size() + 9) / 10;
        for (std::size_t i = 0; i < out.size(); i += step) thin.push_back(out[i]);
        out = thin;
      }
      return out;
    }
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {2.0, 5.0, 10.0})
      if (raw > step) step = m * mag;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step)
      out.push_back(v);
    return out;
  }
};

inline void finish_range(Axis& a) {
  if (!(a.lo < a.hi)) {
    const double c = std::isfinite(a.lo) ? a.lo : 0.0;
    a.lo = c - 0.5;
    a.hi = c + 0.5;
  }
}

}  // namespace detail

/// Polyline plot. Points that cannot be drawn on a log axis are dropped.
inline std::string svg_line_plot(const PlotSpec& spec,
                                 const std::vector<PlotSeries>& series) {
  using detail::fmt;
  detail::Axis ax{std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity(), spec.logx};
  detail::Axis ay{ax.lo, ax.hi, spec.logy};
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
      ax.lo = std::min(ax.lo, ax.map(s.x[i]));
      ax.hi = std::max(ax.hi, ax.map(s.x[i]));
      ay.lo = std::min(ay.lo, ay.map(s.y[i]));
      ay.hi = std::max(ay.hi, ay.map(s.y[i]));
    }
  }
  detail::finish_range(ax);
  detail::finish_range(ay);

  const double ml = 70, mr = 150, mt = 36, mb = 50;
  const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
  auto px = [&](double v) { return ml + (v - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return mt + ph - (v - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
       std::to_string(spec.width) + "\" height=\"" +
       std::to_string(spec.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" +
       detail::xml_escape(spec.title) + "</text>\n";
  o += "<rect x=\"" + fmt(ml) + "\" y=\"" + fmt(mt) + "\" width=\"" + fmt(pw) +
       "\" height=\"" + fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks()) {
    const double x = px(t);
    o += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(mt + ph) + "\" x2=\"" + fmt(x) +
         "\" y2=\"" + fmt(mt + ph + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(mt + ph + 18) +
         "\" text-anchor=\"middle\">" + detail::tick_label(t, ax.log) + "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double y = py(t);
    o += "<line x1=\"" + fmt(ml - 5) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(ml) +
         "\" y2=\"" + fmt(y) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + fmt(ml - 8) + "\" y=\"" + fmt(y + 4) +
         "\" text-anchor=\"end\">" + detail::tick_label(t, ay.log) + "</text>\n";
  }
  o += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"" + fmt(spec.height - 10.0) +
       "\" text-anchor=\"middle\">" + detail::xml_escape(spec.xlabel) + "</text>\n";
  o += "<text transform=\"translate(16," + fmt(mt + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" +
       detail::xml_escape(spec.ylabel) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
      pts += fmt(px(ax.map(s.x[i]))) + ',' + fmt(py(ay.map(s.y[i]))) + ' ';
    }
    if (!pts.empty()) pts.pop_back();
    o += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
         "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    const double ly = mt + 14 + 16 * static_cast<double>(k);
    o += "<line x1=\"" + fmt(ml + pw + 10) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" +
         fmt(ml + pw + 30) + "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + fmt(ml + pw + 35) + "\" y=\"" + fmt(ly) + "\">" +
         detail::xml_escape(s.label) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

/// Scatter of 2-d points with the line {x : w^T x = 0} and the margin
/// line {x : w^T x = 1}.
inline std::string svg_scatter_2d(const std::string& title,
                                  const std::vector<double>& xs,
                                  const std::vector<double>& ys, double w1,
                                  double w2, int size = 420) {
  using detail::fmt;
  double r = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    r = std::max({r, std::abs(xs[i]), std::abs(ys[i])});
  r = r > 0.0 ? 1.05 * r : 1.0;
  const double m = 30, p = size - 2 * m;
  auto px = [&](double v) { return m + (v + r) / (2 * r) * p; };
  auto py = [&](double v) { return m + p - (v + r) / (2 * r) * p; };
  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size) +
       "\" height=\"" + std::to_string(size) +
       "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + fmt(size / 2.0) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" +
       detail::xml_escape(title) + "</text>\n";
  o += "<rect x=\"" + fmt(m) + "\" y=\"" + fmt(m) + "\" width=\"" + fmt(p) +
       "\" height=\"" + fmt(p) + "\" fill=\"none\" stroke=\"black\"/>\n";
  auto line = [&](double level, const char* style) {
    // Points on w1 x + w2 y = level, clipped to the square by parametrization.
    const double nn = w1 * w1 + w2 * w2;
    if (nn == 0.0) return;
    const double cx = level * w1 / nn, cy = level * w2 / nn;
    const double dx = -w2, dy = w1, len = 4 * r / std::sqrt(nn);
    o += "<line x1=\"" + fmt(px(cx - len * dx)) + "\" y1=\"" + fmt(py(cy - len * dy)) +
         "\" x2=\"" + fmt(px(cx + len * dx)) + "\" y2=\"" + fmt(py(cy + len * dy)) +
         "\" stroke=\"black\" " + style + "/>\n";
  };
  o += "<clipPath id=\"c\"><rect x=\"" + fmt(m) + "\" y=\"" + fmt(m) + "\" width=\"" +
       fmt(p) + "\" height=\"" + fmt(p) + "\"/></clipPath>\n<g clip-path=\"url(#c)\">\n";
  line(0.0, "stroke-width=\"1.5\"");
  line(1.0, "stroke-dasharray=\"4 3\"");
  for (std::size_t i = 0; i < xs.size(); ++i)
    o += "<circle cx=\"" + fmt(px(xs[i])) + "\" cy=\"" + fmt(py(ys[i])) +
         "\" r=\"2\" fill=\"#1f77b4\"/>\n";
  o += "</g>\n</svg>\n";
  return o;
}

}  // namespace septrack
