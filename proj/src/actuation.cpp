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

#include "apex/actuation.hpp"

#include "apex/errors.hpp"
#include "apex/rng.hpp"

#include <algorithm>
#include <cmath>

namespace apex::actuation
{

void ActuatorRanges::validate() const
{
  if (!(tau_min > 0.0) || !(tau_max >= tau_min)) {
    throw Error("lag range must satisfy 0 < tau_min <= tau_max");
  }
  if (!(delay_min >= 0.0) || !(delay_max >= delay_min)) {
    throw Error("delay range must satisfy 0 <= delay_min <= delay_max");
  }
}

ActuatorRealization sample_realization(
  std::uint64_t seed, std::uint64_t index, const ActuatorRanges & ranges)
{
  ranges.validate();
  auto pick = [&](std::uint64_t stream, double lo, double hi, bool frozen) {
    if (frozen) {
      return 0.5 * (lo + hi);
    }
    return lo + (hi - lo) * rng::uniform(seed, stream, index);
  };
  return {pick(1, ranges.tau_min, ranges.tau_max, ranges.freeze_tau),
          pick(2, ranges.delay_min, ranges.delay_max, ranges.freeze_delay)};
}

Actuator::Actuator(ActuatorRealization realization, double dt, double limit, double initial)
: realization_(realization), dt_(dt), limit_(limit), state_(std::clamp(initial, -limit, limit))
{
  if (!(dt > 0.0) || !(limit > 0.0)) {
    throw Error("actuator needs a positive step and limit");
  }
  if (!(realization.tau >= dt)) {
    throw Error("actuator lag must be at least one plant step");
  }
  if (!(realization.delay >= 0.0)) {
    throw Error("actuator delay must be nonnegative");
  }
  // slack absorbs delays that are whole multiples of dt up to rounding
  const auto length = static_cast<std::size_t>(std::ceil(realization.delay / dt - 1e-9));
  buffer_.assign(length, state_);
}

double Actuator::step(double command)
{
  double delayed = command;
  if (!buffer_.empty()) {
    delayed = buffer_[head_];
    buffer_[head_] = command;
    head_ = (head_ + 1) % buffer_.size();
  }
  state_ += dt_ * (delayed - state_) / realization_.tau;
  state_ = std::clamp(state_, -limit_, limit_);
  return state_;
}

}  // namespace apex::actuation
