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

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace apex::cli
{

/// Minimal line/box chart written as plain SVG primitives.
class SvgPlot
{
public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);

  void line(
    const std::vector<double> & x, const std::vector<double> & y, const std::string & color,
    const std::string & label = {}, bool dashed = false);
  void markers(
    const std::vector<double> & x, const std::vector<double> & y, const std::string & color,
    const std::string & label = {});
  void rect(
    double x0, double y0, double x1, double y1, const std::string & color, double opacity,
    const std::string & label = {});
  /// Shaded region between two curves over a shared x grid.
  void band(
    const std::vector<double> & x, const std::vector<double> & lo, const std::vector<double> & hi,
    const std::string & color, double opacity, const std::string & label = {});
  void set_y_range(double lo, double hi);

  void write(std::ostream & out) const;

private:
  enum class Kind { Line, Markers, Rect, Band };
  struct Item
  {
    Kind kind;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> y2;
    std::string color;
    std::string label;
    double opacity{1.0};
    bool dashed{false};
  };

  std::string title_;
  std::string x_label_;
  std::string y_label_;
  std::vector<Item> items_;
  bool fixed_y_{false};
  double y_lo_{0.0};
  double y_hi_{1.0};
};

}  // namespace apex::cli
