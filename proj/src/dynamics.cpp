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

#include "apex/dynamics.hpp"

#include "apex/errors.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <sstream>

namespace apex::dynamics
{

void PacejkaParams::validate() const
{
  if (!(B > 0.0) || !(D > 0.0) || !(C > 0.0 && C < 3.0) || !std::isfinite(E)) {
    throw Error("Pacejka parameters out of range (need B > 0, D > 0, 0 < C < 3)");
  }
}

double VehicleParams::front_cornering_stiffness() const
{
  return front_axle_load * front_tire.cornering_slope();
}

double VehicleParams::rear_cornering_stiffness() const
{
  return rear_axle_load * rear_tire.cornering_slope();
}

void VehicleParams::validate() const
{
  auto require = [](bool ok, const char * what) {
    if (!ok) {
      throw Error(std::string("invalid vehicle parameter: ") + what);
    }
  };
  require(mass > 0.0, "mass must be positive");
  require(yaw_inertia > 0.0, "yaw inertia must be positive");
  require(cg_to_front > 0.0, "CG-to-front distance must be positive");
  require(cg_to_rear > 0.0, "CG-to-rear distance must be positive");
  require(max_slip > 0.0, "max slip angle must be positive");
  require(max_steer > 0.0, "max steering angle must be positive");
  require(steering_ratio > 0.0, "steering ratio must be positive");
  require(width > 0.0, "width must be positive");
  require(front_axle_load > 0.0 && rear_axle_load > 0.0, "axle loads must be positive");
  const double weight = mass * kGravity;
  require(
    std::abs(front_axle_load + rear_axle_load - weight) <= 0.01 * weight,
    "axle loads must sum to m*g within 1%");
  front_tire.validate();
  rear_tire.validate();
}

VehicleParams VehicleParams::reference()
{
  VehicleParams p;
  p.front_tire = PacejkaParams{17.0, 1.6, 1.6, 0.1};
  p.rear_tire = PacejkaParams{15.0, 1.6, 1.65, 0.1};
  return p;
}

double VehicleState::sideslip() const { return std::atan2(v, u); }

bool VehicleState::finite() const
{
  return std::isfinite(u) && std::isfinite(v) && std::isfinite(yaw) && std::isfinite(yaw_rate) &&
         std::isfinite(x) && std::isfinite(y);
}

double tire_lateral_mu(const PacejkaParams & tire, double slip)
{
  const double bx = tire.B * slip;
  return tire.D * std::sin(tire.C * std::atan(bx - tire.E * (bx - std::atan(bx))));
}

SlipAngles slip_angles(const VehicleParams & params, const VehicleState & state, double steer)
{
  const double beta = state.sideslip();
  const double roadwheel = steer / params.steering_ratio;
  return {
    beta + state.yaw_rate * params.cg_to_front / state.u - roadwheel,
    beta - state.yaw_rate * params.cg_to_rear / state.u};
}

StateRate derivatives(
  const VehicleParams & params, const VehicleState & state, double steer, double lateral_force,
  std::optional<double> speed_target)
{
  if (!(state.u > 0.0)) {
    std::ostringstream msg;
    msg << "longitudinal speed must be positive, got " << state.u;
    throw PlantError(msg.str());
  }
  const double roadwheel = steer / params.steering_ratio;
  const SlipAngles slip = slip_angles(params, state, steer);

  // lateral tire forces oppose slip
  const double fy_front =
    -tire_lateral_mu(params.front_tire, slip.front) * params.front_axle_load * std::cos(roadwheel);
  const double fy_rear = -tire_lateral_mu(params.rear_tire, slip.rear) * params.rear_axle_load;

  StateRate rate;
  rate.u_dot = params.speed_gain * (speed_target.value_or(state.u) - state.u);
  rate.v_dot = (fy_front + fy_rear + lateral_force) / params.mass - state.yaw_rate * state.u;
  rate.yaw_accel =
    (params.cg_to_front * fy_front - params.cg_to_rear * fy_rear) / params.yaw_inertia;
  rate.yaw_rate = state.yaw_rate;
  rate.x_dot = state.u * std::cos(state.yaw) - state.v * std::sin(state.yaw);
  rate.y_dot = state.u * std::sin(state.yaw) + state.v * std::cos(state.yaw);
  return rate;
}

namespace
{
VehicleState advance(const VehicleState & s, const StateRate & r, double h)
{
  return {
    s.u + h * r.u_dot,       s.v + h * r.v_dot, s.yaw + h * r.yaw_rate,
    s.yaw_rate + h * r.yaw_accel, s.x + h * r.x_dot, s.y + h * r.y_dot};
}
}  // namespace

VehicleState integrate_step(
  const VehicleParams & params, const VehicleState & state, double steer, double lateral_force,
  double dt, std::optional<double> speed_target)
{
  const auto f = [&](const VehicleState & s) {
    return derivatives(params, s, steer, lateral_force, speed_target);
  };
  const StateRate k1 = f(state);
  const StateRate k2 = f(advance(state, k1, 0.5 * dt));
  const StateRate k3 = f(advance(state, k2, 0.5 * dt));
  const StateRate k4 = f(advance(state, k3, dt));
  StateRate sum;
  sum.u_dot = k1.u_dot + 2.0 * k2.u_dot + 2.0 * k3.u_dot + k4.u_dot;
  sum.v_dot = k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot;
  sum.yaw_rate = k1.yaw_rate + 2.0 * k2.yaw_rate + 2.0 * k3.yaw_rate + k4.yaw_rate;
  sum.yaw_accel = k1.yaw_accel + 2.0 * k2.yaw_accel + 2.0 * k3.yaw_accel + k4.yaw_accel;
  sum.x_dot = k1.x_dot + 2.0 * k2.x_dot + 2.0 * k3.x_dot + k4.x_dot;
  sum.y_dot = k1.y_dot + 2.0 * k2.y_dot + 2.0 * k3.y_dot + k4.y_dot;
  return advance(state, sum, dt / 6.0);
}

LinearModel linearize(const VehicleParams & params, double u0)
{
  if (!(u0 > 0.0)) {
    throw Error("linearization speed must be positive");
  }
  const double cf = params.front_cornering_stiffness();
  const double cr = params.rear_cornering_stiffness();
  const double a = params.cg_to_front;
  const double b = params.cg_to_rear;
  const double m = params.mass;
  const double izz = params.yaw_inertia;
  const double ratio = params.steering_ratio;

  LinearModel lin;
  lin.u0 = u0;
  auto & A = lin.A;
  A(idx::kYaw, idx::kYawRate) = 1.0;
  A(idx::kYawRate, idx::kYawRate) = -(a * a * cf + b * b * cr) / (izz * u0);
  A(idx::kYawRate, idx::kSideslip) = -(a * cf - b * cr) / izz;
  A(idx::kSideslip, idx::kYawRate) = -(a * cf - b * cr) / (m * u0 * u0) - 1.0;
  A(idx::kSideslip, idx::kSideslip) = -(cf + cr) / (m * u0);
  // small-angle expansion of Y_dot = u sin(psi) + v cos(psi)
  A(idx::kY, idx::kYaw) = u0;
  A(idx::kY, idx::kSideslip) = u0;

  lin.B(idx::kYawRate) = a * cf / (izz * ratio);
  lin.B(idx::kSideslip) = cf / (m * u0 * ratio);
  return lin;
}

Eigen::Vector4d lateral_force_input(const VehicleParams & params, double u0)
{
  Eigen::Vector4d e = Eigen::Vector4d::Zero();
  e(idx::kSideslip) = 1.0 / (params.mass * u0);
  return e;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd & M)
{
  const Eigen::Index n = M.rows();
  const double norm = M.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / 0.5))));
  }
  const Eigen::MatrixXd X = M / std::ldexp(1.0, squarings);

  // diagonal Pade coefficients, p = q = 6
  std::array<double, 7> c{};
  c[0] = 1.0;
  for (int k = 1; k <= 6; ++k) {
    c[k] = c[k - 1] * (6.0 - k + 1.0) / (k * (12.0 - k + 1.0));
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd power = I;
  Eigen::MatrixXd num = c[0] * I;
  Eigen::MatrixXd den = c[0] * I;
  for (int k = 1; k <= 6; ++k) {
    power = power * X;
    num += c[k] * power;
    den += ((k % 2 == 0) ? c[k] : -c[k]) * power;
  }
  Eigen::MatrixXd E = den.partialPivLu().solve(num);
  for (int i = 0; i < squarings; ++i) {
    E = E * E;
  }
  return E;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> zoh(
  const Eigen::MatrixXd & A, const Eigen::MatrixXd & B, double dt, const ZohOptions & options)
{
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw DimensionError("zoh: A must be square and B must have as many rows as A");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error("zoh: sampling period must be positive and finite");
  }
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = A * dt;
  M.topRightCorner(n, m) = B * dt;
  const Eigen::MatrixXd phi = expm(M);

  const Eigen::MatrixXd ad = phi.topLeftCorner(n, n);
  const Eigen::MatrixXd bd = phi.topRightCorner(n, m);
  const bool finite = ad.allFinite() && bd.allFinite();
  const double largest =
    finite ? std::max(ad.cwiseAbs().maxCoeff(), m > 0 ? bd.cwiseAbs().maxCoeff() : 0.0)
           : std::numeric_limits<double>::infinity();
  if (!finite || largest > options.max_entry) {
    std::ostringstream msg;
    msg << "zoh: discretization at dt = " << dt << " s is ill-conditioned (max |entry| = "
        << largest << ")";
    throw ConditioningError(msg.str(), largest);
  }
  return {ad, bd};
}

DiscreteModel discretize_zoh(const LinearModel & model, double dt, const ZohOptions & options)
{
  const auto [ad, bd] = zoh(model.A, model.B, dt, options);
  DiscreteModel d;
  d.Ad = ad;
  d.Bd = bd;
  d.dt = dt;
  d.u0 = model.u0;
  d.conditioning = ad.cwiseAbs().maxCoeff();
  return d;
}

double lateral_stability_margin(const VehicleParams & params, double u0)
{
  const LinearModel lin = linearize(params, u0);
  const double a11 = lin.A(idx::kYawRate, idx::kYawRate);
  const double a12 = lin.A(idx::kYawRate, idx::kSideslip);
  const double a21 = lin.A(idx::kSideslip, idx::kYawRate);
  const double a22 = lin.A(idx::kSideslip, idx::kSideslip);
  const double tr = a11 + a22;
  const double det = a11 * a22 - a12 * a21;
  const double disc = tr * tr - 4.0 * det;
  return disc >= 0.0 ? 0.5 * (tr + std::sqrt(disc)) : 0.5 * tr;
}

std::optional<double> critical_speed(const VehicleParams & params, double search_limit)
{
  constexpr double kScanStep = 0.5;
  double lo = kScanStep;
  if (lateral_stability_margin(params, lo) > 0.0) {
    return lo;
  }
  std::optional<double> hi;
  for (double u = lo + kScanStep; u <= search_limit + 1e-12; u += kScanStep) {
    if (lateral_stability_margin(params, u) > 0.0) {
      hi = u;
      break;
    }
    lo = u;
  }
  if (!hi) {
    return std::nullopt;
  }
  double upper = *hi;
  while (upper - lo > 1e-9 * upper) {
    const double mid = 0.5 * (lo + upper);
    if (lateral_stability_margin(params, mid) > 0.0) {
      upper = mid;
    } else {
      lo = mid;
    }
  }
  return upper;
}

}  // namespace apex::dynamics
