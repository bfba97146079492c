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

#include <optional>

namespace apex::dynamics
{

inline constexpr double kGravity = 9.81;

/// Magic Formula coefficients for one axle (nondimensional).
struct PacejkaParams
{
  double B{17.0};
  double C{1.6};
  double D{1.6};
  double E{0.1};

  void validate() const;
  /// Slope of the friction curve at zero slip.
  double cornering_slope() const { return B * C * D; }
};

struct VehicleParams
{
  double mass{750.0};
  double yaw_inertia{1000.0};
  double cg_to_front{1.7};
  double cg_to_rear{1.3};
  PacejkaParams front_tire{};
  PacejkaParams rear_tire{};
  double front_axle_load{3188.25};
  double rear_axle_load{4169.25};
  double max_slip{0.0872664626};    // rad
  double max_steer{3.4906585040};   // column angle, rad
  double steering_ratio{10.0};
  double width{2.0};
  /// Gain of the ideal longitudinal speed governor, 1/s.
  double speed_gain{5.0};

  double wheelbase() const { return cg_to_front + cg_to_rear; }
  double front_cornering_stiffness() const;
  double rear_cornering_stiffness() const;
  void validate() const;

  /// The checked-in reference car (see params/reference.cfg).
  static VehicleParams reference();
};

/// Pose and velocity of the planar single-track plant.
struct VehicleState
{
  double u{0.0};         // longitudinal velocity, m/s
  double v{0.0};         // lateral velocity, m/s
  double yaw{0.0};       // rad
  double yaw_rate{0.0};  // rad/s
  double x{0.0};         // inertial X, m
  double y{0.0};         // inertial Y, m

  double sideslip() const;
  bool finite() const;
};

/// Time derivative of VehicleState, same field order.
struct StateRate
{
  double u_dot{0.0};
  double v_dot{0.0};
  double yaw_accel{0.0};
  double yaw_rate{0.0};
  double x_dot{0.0};
  double y_dot{0.0};
};

struct SlipAngles
{
  double front{0.0};
  double rear{0.0};
};

/// Continuous lateral dynamics, state [yaw, yaw_rate, sideslip, Y], input column angle.
struct LinearModel
{
  Eigen::Matrix4d A{Eigen::Matrix4d::Zero()};
  Eigen::Vector4d B{Eigen::Vector4d::Zero()};
  double u0{0.0};
};

struct DiscreteModel
{
  Eigen::Matrix4d Ad{Eigen::Matrix4d::Identity()};
  Eigen::Vector4d Bd{Eigen::Vector4d::Zero()};
  double dt{0.0};
  double u0{0.0};
  /// max |entry| of Ad
  double conditioning{1.0};
};

namespace idx
{
inline constexpr int kYaw = 0;
inline constexpr int kYawRate = 1;
inline constexpr int kSideslip = 2;
inline constexpr int kY = 3;
}  // namespace idx

double tire_lateral_mu(const PacejkaParams & tire, double slip);

SlipAngles slip_angles(const VehicleParams & params, const VehicleState & state, double steer);

/// Equations of motion in the body frame. `steer` is the column angle; the
/// speed governor drives u toward `speed_target` (defaults to holding u).
StateRate derivatives(
  const VehicleParams & params, const VehicleState & state, double steer, double lateral_force,
  std::optional<double> speed_target = std::nullopt);

/// One fixed-step RK4 step with inputs held over the step.
VehicleState integrate_step(
  const VehicleParams & params, const VehicleState & state, double steer, double lateral_force,
  double dt, std::optional<double> speed_target = std::nullopt);

LinearModel linearize(const VehicleParams & params, double u0);

/// Column of the linear model driven by a lateral force at the CG, per newton.
Eigen::Vector4d lateral_force_input(const VehicleParams & params, double u0);

struct ZohOptions
{
  /// Entries of [Ad Bd] beyond this magnitude are reported as a conditioning failure.
  double max_entry{1e12};
};

DiscreteModel discretize_zoh(const LinearModel & model, double dt, const ZohOptions & options = {});

/// exp([[A, B], [0, 0]] * dt) split into (Ad, Bd) for any state/input size.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> zoh(
  const Eigen::MatrixXd & A, const Eigen::MatrixXd & B, double dt,
  const ZohOptions & options = {});

/// Scaling-and-squaring with a degree-6 Pade approximant.
Eigen::MatrixXd expm(const Eigen::MatrixXd & M);

/// Lowest speed at which the linearized lateral dynamics turn unstable, or
/// nullopt when none exists below `search_limit`.
std::optional<double> critical_speed(const VehicleParams & params, double search_limit = 200.0);

/// Largest real part among the sideslip/yaw-rate eigenvalues at speed u0.
double lateral_stability_margin(const VehicleParams & params, double u0);

}  // namespace apex::dynamics
