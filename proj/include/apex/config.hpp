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

#include "apex/errors.hpp"
#include "apex/scenarios.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace apex::config
{

/// Parse or range error; `line` is 0 when no single line is to blame.
class ConfigError : public Error
{
public:
  ConfigError(const std::string & source, int line, const std::string & message);
  const std::string & source() const { return source_; }
  int line() const { return line_; }

private:
  std::string source_;
  int line_;
};

struct Entry
{
  std::string value;
  std::string source;
  int line{0};
};

/// Sections in file order; keys before the first section go to "".
struct Document
{
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, Entry>> sections;

  const std::map<std::string, Entry> * section(const std::string & name) const;
};

/// INI syntax only: `[section]`, `key = value`, `#` comments. A top-level
/// `include = path` (relative to the including file) is read first and may be
/// overridden by later keys.
Document parse(std::istream & in, const std::string & source);
Document load(const std::filesystem::path & path);

/// Builds a validated scenario; every key is optional and defaults to the
/// reference car and the built-in scenario defaults.
scenarios::Scenario to_scenario(const Document & doc);
scenarios::Scenario load_scenario(const std::filesystem::path & path);

}  // namespace apex::config
