// Copyright 2026 The Apex Racing Control Authors
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

#include "svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

namespace apex::cli
{

namespace
{

constexpr double kWidth = 900.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

std::string fixed(double v, int digits = 2)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

std::string escape(const std::string & s)
{
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

// 1, 2 or 5 times a power of ten, about `target` ticks across the span
double tick_step(double span, int target)
{
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (const double m : {1.0, 2.0, 5.0}) {
    if (m * mag >= raw) {
      return m * mag;
    }
  }
  return 10.0 * mag;
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
: title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label))
{
}

void SvgPlot::line(
  const std::vector<double> & x, const std::vector<double> & y, const std::string & color,
  const std::string & label, bool dashed)
{
  items_.push_back({Kind::Line, x, y, {}, color, label, 1.0, dashed});
}

void SvgPlot::markers(
  const std::vector<double> & x, const std::vector<double> & y, const std::string & color,
  const std::string & label)
{
  items_.push_back({Kind::Markers, x, y, {}, color, label, 1.0, false});
}

void SvgPlot::rect(
  double x0, double y0, double x1, double y1, const std::string & color, double opacity,
  const std::string & label)
{
  items_.push_back({Kind::Rect, {x0, x1}, {y0, y1}, {}, color, label, opacity, false});
}

void SvgPlot::band(
  const std::vector<double> & x, const std::vector<double> & lo, const std::vector<double> & hi,
  const std::string & color, double opacity, const std::string & label)
{
  items_.push_back({Kind::Band, x, lo, hi, color, label, opacity, false});
}

void SvgPlot::set_y_range(double lo, double hi)
{
  fixed_y_ = true;
  y_lo_ = lo;
  y_hi_ = hi;
}

void SvgPlot::write(std::ostream & out) const
{
  constexpr double inf = std::numeric_limits<double>::infinity();
  double x_lo = inf;
  double x_hi = -inf;
  double y_lo = inf;
  double y_hi = -inf;
  for (const auto & it : items_) {
    for (const double v : it.x) {
      if (std::isfinite(v)) {
        x_lo = std::min(x_lo, v);
        x_hi = std::max(x_hi, v);
      }
    }
    for (const auto * ys : {&it.y, &it.y2}) {
      for (const double v : *ys) {
        if (std::isfinite(v)) {
          y_lo = std::min(y_lo, v);
          y_hi = std::max(y_hi, v);
        }
      }
    }
  }
  if (!(x_lo < x_hi)) {
    x_lo = std::isfinite(x_lo) ? x_lo - 1.0 : 0.0;
    x_hi = x_lo + 2.0;
  }
  if (fixed_y_) {
    y_lo = y_lo_;
    y_hi = y_hi_;
  } else if (!(y_lo < y_hi)) {
    y_lo = std::isfinite(y_lo) ? y_lo - 1.0 : 0.0;
    y_hi = y_lo + 2.0;
  } else {
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (v - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double v) { return kTop + (y_hi - std::clamp(v, y_lo, y_hi)) / (y_hi - y_lo) * ph; };
  auto point = [&](double x, double y) { return fixed(px(x)) + "," + fixed(py(y)); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<defs><clipPath id=\"plot\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
      << "\" height=\"" << ph << "\"/></clipPath></defs>\n";
  out << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"15\">" << escape(title_) << "</text>\n";

  // axes and ticks
  out << "<g stroke=\"#999\" stroke-width=\"0.5\">\n";
  const double xs = tick_step(x_hi - x_lo, 8);
  for (double t = std::ceil(x_lo / xs) * xs; t <= x_hi + 1e-9 * xs; t += xs) {
    out << "<line x1=\"" << fixed(px(t)) << "\" y1=\"" << kTop << "\" x2=\"" << fixed(px(t)) << "\" y2=\""
        << kTop + ph << "\" stroke-dasharray=\"2,3\"/>\n";
  }
  const double ys = tick_step(y_hi - y_lo, 6);
  for (double t = std::ceil(y_lo / ys) * ys; t <= y_hi + 1e-9 * ys; t += ys) {
    out << "<line x1=\"" << kLeft << "\" y1=\"" << fixed(py(t)) << "\" x2=\"" << kLeft + pw << "\" y2=\""
        << fixed(py(t)) << "\" stroke-dasharray=\"2,3\"/>\n";
  }
  out << "</g>\n";
  const int x_digits = xs < 1.0 ? static_cast<int>(std::ceil(-std::log10(xs))) : 0;
  const int y_digits = ys < 1.0 ? static_cast<int>(std::ceil(-std::log10(ys))) : 0;
  for (double t = std::ceil(x_lo / xs) * xs; t <= x_hi + 1e-9 * xs; t += xs) {
    out << "<text x=\"" << fixed(px(t)) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
        << fixed(t, x_digits) << "</text>\n";
  }
  for (double t = std::ceil(y_lo / ys) * ys; t <= y_hi + 1e-9 * ys; t += ys) {
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(py(t) + 4) << "\" text-anchor=\"end\">"
        << fixed(t, y_digits) << "</text>\n";
  }
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 14 << "\" text-anchor=\"middle\">"
      << escape(x_label_) << "</text>\n";
  out << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(y_label_) << "</text>\n";

  out << "<g clip-path=\"url(#plot)\">\n";
  for (const auto & it : items_) {
    switch (it.kind) {
      case Kind::Rect: {
        const double x0 = px(std::min(it.x[0], it.x[1]));
        const double x1 = px(std::max(it.x[0], it.x[1]));
        const double y0 = py(std::max(it.y[0], it.y[1]));
        const double y1 = py(std::min(it.y[0], it.y[1]));
        out << "<rect x=\"" << fixed(x0) << "\" y=\"" << fixed(y0) << "\" width=\"" << fixed(x1 - x0)
            << "\" height=\"" << fixed(y1 - y0) << "\" fill=\"" << it.color << "\" fill-opacity=\""
            << fixed(it.opacity) << "\" stroke=\"" << it.color << "\"/>\n";
        break;
      }
      case Kind::Band: {
        out << "<polygon fill=\"" << it.color << "\" fill-opacity=\"" << fixed(it.opacity)
            << "\" stroke=\"none\" points=\"";
        for (size_t i = 0; i < it.x.size(); ++i) {
          out << point(it.x[i], it.y2[i]) << ' ';
        }
        for (size_t i = it.x.size(); i-- > 0;) {
          out << point(it.x[i], it.y[i]) << ' ';
        }
        out << "\"/>\n";
        break;
      }
      case Kind::Line: {
        out << "<polyline fill=\"none\" stroke=\"" << it.color << "\" stroke-width=\"1.5\""
            << (it.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
        for (size_t i = 0; i < it.x.size(); ++i) {
          out << point(it.x[i], it.y[i]) << ' ';
        }
        out << "\"/>\n";
        break;
      }
      case Kind::Markers:
        for (size_t i = 0; i < it.x.size(); ++i) {
          out << "<circle cx=\"" << fixed(px(it.x[i])) << "\" cy=\"" << fixed(py(it.y[i]))
              << "\" r=\"4\" fill=\"" << it.color << "\"/>\n";
        }
        break;
    }
  }
  out << "</g>\n";

  // legend
  double ly = kTop + 10;
  for (const auto & it : items_) {
    if (it.label.empty()) {
      continue;
    }
    const double lx = kLeft + pw + 12;
    if (it.kind == Kind::Line) {
      out << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 20 << "\" y2=\"" << ly << "\" stroke=\""
          << it.color << "\" stroke-width=\"2\"" << (it.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
    } else {
      out << "<rect x=\"" << lx << "\" y=\"" << ly - 6 << "\" width=\"20\" height=\"12\" fill=\"" << it.color
          << "\" fill-opacity=\"" << fixed(std::max(it.opacity, 0.3)) << "\"/>\n";
    }
    out << "<text x=\"" << lx + 26 << "\" y=\"" << ly + 4 << "\">" << escape(it.label) << "</text>\n";
    ly += 18;
  }
  out << "</svg>\n";
}

}  // namespace apex::cli
