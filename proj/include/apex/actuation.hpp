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

#include <cstdint>
#include <vector>

namespace apex::actuation
{

/// Sampling ranges for the steering lag and transport delay, s. A frozen
/// quantity always takes the midpoint of its range.
struct ActuatorRanges
{
  double tau_min{0.05};
  double tau_max{0.5};
  double delay_min{0.015};
  double delay_max{0.125};
  bool freeze_tau{false};
  bool freeze_delay{false};

  void validate() const;
};

struct ActuatorRealization
{
  double tau{0.1};    // s
  double delay{0.0};  // s
};

/// Independent uniform draws keyed by (seed, index) only.
ActuatorRealization sample_realization(
  std::uint64_t seed, std::uint64_t index, const ActuatorRanges & ranges);

/// Steer-by-wire chain: ring-buffer transport delay then a first-order lag,
/// output clamped to +/- limit. Column angle units.
class Actuator
{
public:
  Actuator(ActuatorRealization realization, double dt, double limit, double initial = 0.0);

  /// Pushes the command, advances one step and returns the applied angle.
  double step(double command);
  double output() const { return state_; }
  std::size_t buffer_length() const { return buffer_.size(); }
  const ActuatorRealization & realization() const { return realization_; }

private:
  ActuatorRealization realization_;
  double dt_;
  double limit_;
  double state_;
  std::vector<double> buffer_;
  std::size_t head_{0};
};

}  // namespace apex::actuation
