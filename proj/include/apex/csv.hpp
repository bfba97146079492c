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

#include <Eigen/Dense>

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace apex::csv
{

/// Shortest round-trip decimal, locale independent.
inline std::string number(double v)
{
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string join(const Eigen::Ref<const Eigen::VectorXd> & v)
{
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) {
      out += ',';
    }
    out += number(v(i));
  }
  return out;
}

/// Splits one CSV line into doubles; throws std::invalid_argument on a bad field.
std::vector<double> parse_numbers(std::string_view line);

}  // namespace apex::csv
