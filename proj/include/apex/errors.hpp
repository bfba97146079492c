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

#include <stdexcept>
#include <string>

namespace apex
{

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error
{
public:
  using Error::Error;
};

/// Matrix exponential produced non-finite or out-of-range entries.
class ConditioningError : public Error
{
public:
  ConditioningError(const std::string & what, double max_entry)
  : Error(what), max_entry_(max_entry)
  {
  }
  double max_entry() const { return max_entry_; }

private:
  double max_entry_;
};

class NotPositiveDefiniteError : public Error
{
public:
  using Error::Error;
};

class UncontrollableError : public Error
{
public:
  using Error::Error;
};

class UnstableError : public Error
{
public:
  using Error::Error;
};

class NotConvergedError : public Error
{
public:
  using Error::Error;
};

class EmptySetError : public Error
{
public:
  using Error::Error;
};

class FullBlockageError : public Error
{
public:
  using Error::Error;
};

class PlantError : public Error
{
public:
  using Error::Error;
};

class StudyError : public Error
{
public:
  using Error::Error;
};

}  // namespace apex
