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

#include "apex/actuation.hpp"
#include "apex/dynamics.hpp"
#include "apex/mpc.hpp"
#include "apex/tube.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace apex::scenarios
{

enum class ControllerKind { NominalMpc, TubeMpc };
enum class PlantFidelity { LinearIdeal, NonlinearIdeal, NonlinearWithActuator };

const char * to_string(ControllerKind kind);
const char * to_string(PlantFidelity plant);

/// Lateral force at the CG over [start, start + duration), N.
struct Disturbance
{
  double force{0.0};
  double start{0.0};
  double duration{0.0};

  double at(double t) const { return (t >= start && t < start + duration) ? force : 0.0; }
};

struct Scenario
{
  dynamics::VehicleParams vehicle{dynamics::VehicleParams::reference()};
  double u0{80.56};
  /// Road edges; the CG corridor is inset by half the vehicle width.
  double track_y_min{0.0};
  double track_y_max{12.0};
  double initial_y{3.0};
  double y_ref{3.0};
  std::vector<mpc::ObstacleBox> obstacles;
  Disturbance disturbance;
  ControllerKind controller{ControllerKind::NominalMpc};
  double control_frequency{20.0};
  double preview_time{1.5};
  PlantFidelity plant{PlantFidelity::NonlinearIdeal};
  double duration{10.0};
  double plant_dt{0.001};
  std::uint64_t seed{1};
  std::uint64_t run_index{0};

  Eigen::Matrix2d output_weight{Eigen::Vector2d(1.0, 10.0).asDiagonal()};
  double control_weight{0.5};
  double terminal_scale{10.0};

  tube::TubeConfig tube;
  /// Sampling ranges for the actuator plant; `realization` overrides sampling.
  actuation::ActuatorRanges actuator;
  std::optional<actuation::ActuatorRealization> realization;

  double control_period() const { return 1.0 / control_frequency; }
  int horizon() const;
  int substeps() const;
  double half_width() const { return 0.5 * vehicle.width; }
  double corridor_min() const { return track_y_min + half_width(); }
  double corridor_max() const { return track_y_max - half_width(); }
  actuation::ActuatorRealization actuator_realization() const;
  mpc::MpcWeights weights(Eigen::Index state_dim) const;
  /// Throws Error on an invalid field and ConditioningError when the control
  /// period is beyond the discretization floor.
  void validate() const;
};

struct TraceRecord
{
  double t{0.0};
  double x{0.0};
  double y{0.0};
  double yaw{0.0};
  double yaw_rate{0.0};
  double sideslip{0.0};
  double steer_command{0.0};
  double steer_actual{0.0};
  bool feasible{true};
  double slip_front{0.0};
  double slip_rear{0.0};
};

struct SimTrace
{
  std::vector<TraceRecord> records;
  bool diverged{false};
  int control_steps{0};
  int infeasible_steps{0};
  std::vector<double> solve_times;  // s, one per control step
  actuation::ActuatorRealization realization;

  static const char * csv_header();
  void write_csv(std::ostream & out) const;
};

/// Tube artifacts for the scenario's speed, control period and corridor.
std::shared_ptr<const tube::TubeDesign> design_for(const Scenario & scenario);

/// `design` is reused when given (TubeMpc only).
SimTrace run_closed_loop(
  const Scenario & scenario, std::shared_ptr<const tube::TubeDesign> design = nullptr);

/// First time the footprint (square of half-width `half_width` around the CG)
/// overlaps an obstacle or leaves the road, or nullopt.
std::optional<double> collision_check(
  const SimTrace & trace, const std::vector<mpc::ObstacleBox> & obstacles, double track_y_min,
  double track_y_max, double half_width = 1.0);

std::optional<double> collision_check(const SimTrace & trace, const Scenario & scenario);

/// Pass = completed without divergence, collision or infeasible control step.
struct RunOutcome
{
  std::optional<double> collision_time;
  bool diverged{false};
  int infeasible_steps{0};

  bool passed() const { return !collision_time && !diverged && infeasible_steps == 0; }
};

RunOutcome evaluate(const SimTrace & trace, const Scenario & scenario);

/// Overtake of a slower car holding the inside lane, with a lateral gust.
Scenario overtake_scenario();
/// Stationary box blocking the inside half of the road `lead` seconds ahead.
Scenario obstacle_scenario(double u0, double lead);
/// Obstacle scenario on the steer-by-wire plant, with the actuator sampled
/// from the tube's design ranges.
Scenario monte_carlo_scenario();

struct FrequencyRow
{
  double frequency{0.0};
  RunOutcome outcome;
  SimTrace trace;
};

struct FrequencySweep
{
  /// Lowest passing frequency.
  std::optional<double> threshold;
  std::vector<FrequencyRow> table;
  /// Pass region is an up-set of the grid.
  bool monotone{true};
};

/// Throws StudyError when no grid frequency passes.
/// Runs every grid frequency; `threshold` stays empty when none passes.
FrequencySweep sweep_frequencies(const Scenario & scenario, const std::vector<double> & grid);
/// As above; throws StudyError when no grid frequency passes.
FrequencySweep min_update_frequency(const Scenario & scenario, const std::vector<double> & grid);

/// Largest control period accepted by discretize_zoh, scanned upward in
/// `step` increments up to `limit`; returns the implied minimum frequency.
struct DiscretizationFloor
{
  double max_period{0.0};
  double min_frequency{0.0};
};
/// Longest control period whose ZOH model passes the conditioning check,
/// resolved to `step`.
DiscretizationFloor discretization_floor(
  const dynamics::VehicleParams & params, double u0, double step = 0.01, double limit = 1e9);

struct PerceptionResult
{
  double speed{0.0};
  int horizon{0};
  double preview_time{0.0};
  double distance{0.0};
  int evaluations{0};
};

/// Smallest preview (whole control periods, at most `max_preview` s) for which
/// the obstacle scenario passes. Throws StudyError when none does.
PerceptionResult min_perception_distance(
  const Scenario & scenario, double max_preview = 5.0,
  std::shared_ptr<const tube::TubeDesign> design = nullptr);

/// Obstacle scenario at `speed`, then the study above. The nominal controller
/// runs on the linear plant it models; the tube controller on the
/// steer-by-wire plant at the midpoint of its design ranges.
/// `base` at another speed with its obstacles at the same time headway. The
/// nominal controller runs on the linear plant; the tube controller on the
/// actuator plant with the midpoint of its design ranges.
Scenario perception_scenario(const Scenario & base, double speed, ControllerKind controller);

PerceptionResult min_perception_distance(double speed, ControllerKind controller);

struct RunSummary
{
  std::uint64_t index{0};
  actuation::ActuatorRealization realization;
  RunOutcome outcome;
  double max_deviation{0.0};  // max |Y - Y_nominal|, m
};

struct EnvelopeBin
{
  double x{0.0};  // bin start
  double y_min{0.0};
  double y_max{0.0};
};

struct MonteCarloReport
{
  int runs{0};
  int collisions{0};
  int diverged{0};
  int infeasible_runs{0};
  double collision_probability{0.0};
  double bin_width{1.0};
  std::vector<RunSummary> per_run;
  std::vector<EnvelopeBin> envelope;
  /// Same controller on the ideal-actuator nonlinear plant.
  SimTrace nominal;
  /// Tube controller only: see tightened_clearance().
  std::optional<double> tightened_clearance;

  void write_summary_csv(std::ostream & out) const;
  void write_runs_csv(std::ostream & out) const;
  void write_envelope_csv(std::ostream & out) const;
};

/// Worker count from APEX_THREADS (unset or 0 = hardware concurrency).
unsigned worker_count();

/// Runs on the actuator plant with realization (seed, index). Results are
/// keyed by index, so the report does not depend on the worker count.
MonteCarloReport monte_carlo(
  const Scenario & scenario, int runs, std::uint64_t seed, unsigned workers = 0,
  std::shared_ptr<const tube::TubeDesign> design = nullptr);

/// Every trajectory sample lies inside its envelope bin.
bool envelope_contains(const MonteCarloReport & report, const SimTrace & trace);

/// Smallest distance from the envelope to the tube-tightened corridor: track
/// edges moved in by the tube margins and each stationary obstacle grown by
/// half the vehicle width plus the margin on the side the envelope passes.
/// Positive when the envelope lies strictly inside.
double tightened_clearance(
  const MonteCarloReport & report, const Scenario & scenario, const tube::TubeDesign & design);

}  // namespace apex::scenarios
