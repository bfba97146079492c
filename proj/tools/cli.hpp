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

/// Process exit codes.
enum ExitCode : int {
  kClean = 0,
  kConfigError = 1,
  kCollision = 2,
  kInfeasible = 3,
  kAllFail = 4,
};

/// Grid spec: comma-separated items, each a number or `start:step:end`.
std::vector<double> parse_grid(const std::string & spec);

/// Entry point behind `apex`; args exclude the program name.
int run(const std::vector<std::string> & args, std::ostream & out, std::ostream & err);

}  // namespace apex::cli
