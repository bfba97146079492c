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

#include "apex/dynamics.hpp"
#include "apex/mpc.hpp"
#include "apex/sets.hpp"

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <numbers>
#include <utility>
#include <vector>

namespace apex::tube
{

/// Augmented state [yaw, yaw_rate, sideslip, Y, x_steer, x_delay]; the two
/// actuator states are column angles.
namespace aug
{
inline constexpr Eigen::Index kSteer = 4;
inline constexpr Eigen::Index kDelay = 5;
inline constexpr Eigen::Index kDim = 6;
}  // namespace aug

/// Ranges of the steering lag time constant and the transport delay, s.
struct ActuatorRange
{
  double tau_min{0.05};
  double tau_max{0.5};
  double delay_min{0.015};
  double delay_max{0.125};

  void validate() const;
};

struct AugmentedModel
{
  sets::UncertainModel uncertain;
  std::vector<std::pair<double, double>> corners;  // (tau, delay) per vertex
  double dt{0.0};
  double u0{0.0};
};

/// Continuous augmented pair for one (tau, delay); delay must be positive.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> augmented_continuous(
  const dynamics::LinearModel & lin, double tau, double delay);

/// Discrete augmented pair. A zero delay makes x_delay copy the command.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> augmented_discrete(
  const dynamics::LinearModel & lin, double tau, double delay, double dt);

/// J = 4 uses the corners of the tau x delay rectangle, J = 1 its midpoint.
AugmentedModel build_augmented_model(
  const dynamics::LinearModel & lin, const ActuatorRange & range, double dt, int vertices = 4);

struct TubeConfig
{
  /// Narrower than the full actuator ranges: with those, K S exceeds any
  /// steering envelope and the tightened command interval is empty.
  ActuatorRange actuator{0.12, 0.18, 0.045, 0.055};
  int vertices{4};
  /// Default poles are the open-loop eigenvalues of the mean model scaled by this.
  double pole_scale{0.8};
  std::vector<std::complex<double>> poles;  // overrides pole_scale when set
  /// Box on x_steer, x_delay and the applied command (column rad) inside
  /// which the disturbance set is valid; the tightened command interval keeps
  /// the applied command inside it.
  double steer_envelope{17.0 * std::numbers::pi / 180.0};
  /// Boxes on the first three states. They bound the state set only; the
  /// vertices share the vehicle block, so W does not depend on them.
  double yaw_box{30.0 * std::numbers::pi / 180.0};
  double yaw_rate_box{60.0 * std::numbers::pi / 180.0};
  double sideslip_box{10.0 * std::numbers::pi / 180.0};
  sets::InvariantSetOptions invariant{};
};

/// Offline tube artifacts, immutable after construction.
struct TubeDesign
{
  AugmentedModel model;
  sets::FeedbackGain gain;
  Eigen::MatrixXd a_k;  // A_mean + B_mean K
  sets::Zonotope disturbance;
  sets::InvariantSetResult invariant;
  /// Constraint rows per step over the augmented state: Y upper, Y lower,
  /// front slip +/-, rear slip +/-.
  Eigen::MatrixXd row_state;
  Eigen::VectorXd row_margin;  // h_S(row), subtracted from each bound
  mpc::InputBounds input;      // tightened command interval
  double max_slip{0.0};
  double steer_envelope{0.0};
  /// max_j rho(A_j + B_j K); below 1 means every vertex is stabilised by K.
  double vertex_spectral_radius{0.0};

  const sets::Zonotope & tube() const { return invariant.set; }
  /// Distance the upper and lower corridor edges move inward.
  double y_margin_upper() const { return row_margin(0); }
  double y_margin_lower() const { return row_margin(1); }
};

TubeDesign design_tube(
  const dynamics::VehicleParams & params, double u0, double dt, double track_y_min,
  double track_y_max, const TubeConfig & config);

/// Stage bounds (r x N) for the central MPC: corridor and fixed limits minus the tube margins.
Eigen::MatrixXd tightened_bounds(const TubeDesign & design, const mpc::CorridorConstraints & corridor);

struct TubeStep
{
  double command{0.0};  // sigma* + K (x - z)
  double nominal{0.0};  // sigma*
  bool feasible{false};
  mpc::MpcSolution central;
};

/// Central MPC on the mean model from the nominal state plus the ancillary
/// feedback. Stateful, one instance per simulation.
class TubeController
{
public:
  TubeController(
    std::shared_ptr<const TubeDesign> design, int horizon,
    mpc::MpcWeights weights = mpc::MpcWeights::defaults(aug::kDim));

  /// z = x0 and a cold warm-start cache.
  void reset(const Eigen::VectorXd & x0);
  /// Solves the central problem from z, returns the composite command and advances z.
  TubeStep step(
    const Eigen::VectorXd & x_measured, const std::vector<Eigen::Vector2d> & y_ref,
    const mpc::CorridorConstraints & corridor);

  const Eigen::VectorXd & nominal_state() const { return z_; }
  const TubeDesign & design() const { return *design_; }
  mpc::LinearMpc & engine() { return engine_; }

private:
  std::shared_ptr<const TubeDesign> design_;
  mpc::LinearMpc engine_;
  Eigen::VectorXd z_;
  double held_{0.0};
};

}  // namespace apex::tube
