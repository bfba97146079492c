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

#include "apex/tube.hpp"

#include "apex/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace apex::tube
{

void ActuatorRange::validate() const
{
  if (!(tau_min > 0.0) || !(tau_max >= tau_min)) {
    throw Error("steering lag range must satisfy 0 < tau_min <= tau_max");
  }
  if (!(delay_min >= 0.0) || !(delay_max >= delay_min)) {
    throw Error("transport delay range must satisfy 0 <= delay_min <= delay_max");
  }
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> augmented_continuous(
  const dynamics::LinearModel & lin, double tau, double delay)
{
  if (!(tau > 0.0) || !(delay > 0.0)) {
    throw Error("continuous augmented model needs positive lag and delay");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(aug::kDim, aug::kDim);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(aug::kDim, 1);
  a.topLeftCorner(4, 4) = lin.A;
  a.block(0, aug::kSteer, 4, 1) = lin.B;
  a(aug::kSteer, aug::kSteer) = -1.0 / tau;
  a(aug::kSteer, aug::kDelay) = 1.0 / tau;
  a(aug::kDelay, aug::kDelay) = -1.0 / delay;
  b(aug::kDelay, 0) = 1.0 / delay;
  return {a, b};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> augmented_discrete(
  const dynamics::LinearModel & lin, double tau, double delay, double dt)
{
  if (delay > 0.0) {
    const auto [a, b] = augmented_continuous(lin, tau, delay);
    return dynamics::zoh(a, b, dt);
  }
  if (!(tau > 0.0)) {
    throw Error("steering lag must be positive");
  }
  // no delay: the lag is driven by the command and x_delay holds it
  Eigen::MatrixXd a5 = Eigen::MatrixXd::Zero(5, 5);
  Eigen::MatrixXd b5 = Eigen::MatrixXd::Zero(5, 1);
  a5.topLeftCorner(4, 4) = lin.A;
  a5.block(0, aug::kSteer, 4, 1) = lin.B;
  a5(aug::kSteer, aug::kSteer) = -1.0 / tau;
  b5(aug::kSteer, 0) = 1.0 / tau;
  const auto [ad5, bd5] = dynamics::zoh(a5, b5, dt);
  Eigen::MatrixXd ad = Eigen::MatrixXd::Zero(aug::kDim, aug::kDim);
  Eigen::MatrixXd bd = Eigen::MatrixXd::Zero(aug::kDim, 1);
  ad.topLeftCorner(5, 5) = ad5;
  bd.topRows(5) = bd5;
  bd(aug::kDelay, 0) = 1.0;
  return {ad, bd};
}

AugmentedModel build_augmented_model(
  const dynamics::LinearModel & lin, const ActuatorRange & range, double dt, int vertices)
{
  range.validate();
  if (!(dt > 0.0)) {
    throw Error("sample time must be positive");
  }
  AugmentedModel m;
  m.dt = dt;
  m.u0 = lin.u0;
  if (vertices == 1) {
    m.corners = {{0.5 * (range.tau_min + range.tau_max), 0.5 * (range.delay_min + range.delay_max)}};
  } else if (vertices == 4) {
    m.corners = {
      {range.tau_min, range.delay_min},
      {range.tau_max, range.delay_min},
      {range.tau_min, range.delay_max},
      {range.tau_max, range.delay_max}};
  } else {
    throw Error("vertex count must be 1 (midpoint) or 4 (corners)");
  }
  std::vector<Eigen::MatrixXd> as;
  std::vector<Eigen::MatrixXd> bs;
  for (const auto & [tau, delay] : m.corners) {
    auto [a, b] = augmented_discrete(lin, tau, delay, dt);
    as.push_back(std::move(a));
    bs.push_back(std::move(b));
  }
  m.uncertain = sets::UncertainModel::from_vertices(std::move(as), std::move(bs));
  return m;
}

TubeDesign design_tube(
  const dynamics::VehicleParams & params, double u0, double dt, double track_y_min,
  double track_y_max, const TubeConfig & config)
{
  params.validate();
  if (!(config.steer_envelope > 0.0) || config.steer_envelope > params.max_steer) {
    throw Error("tube steering envelope must lie in (0, max_steer]");
  }
  TubeDesign d;
  d.model = build_augmented_model(dynamics::linearize(params, u0), config.actuator, dt, config.vertices);
  const auto & unc = d.model.uncertain;

  std::vector<std::complex<double>> poles = config.poles;
  if (poles.empty()) {
    if (!(config.pole_scale > 0.0) || !(config.pole_scale < 1.0)) {
      throw Error("pole scale must lie in (0, 1)");
    }
    for (const auto & ev : sets::sorted_eigenvalues(unc.A_mean)) {
      poles.push_back(config.pole_scale * ev);
    }
  }
  d.gain = sets::pole_place(unc.A_mean, unc.B_mean, poles);
  d.a_k = unc.A_mean + unc.B_mean * d.gain.K;
  for (int j = 0; j < unc.vertex_count(); ++j) {
    d.vertex_spectral_radius = std::max(
      d.vertex_spectral_radius,
      sets::spectral_radius(unc.A[static_cast<size_t>(j)] + unc.B[static_cast<size_t>(j)] * d.gain.K));
  }

  const double env = config.steer_envelope;
  Eigen::VectorXd lo(aug::kDim);
  Eigen::VectorXd hi(aug::kDim);
  lo << -config.yaw_box, -config.yaw_rate_box, -config.sideslip_box, track_y_min, -env, -env;
  hi << config.yaw_box, config.yaw_rate_box, config.sideslip_box, track_y_max, env, env;
  d.disturbance = sets::disturbance_set(unc, sets::HalfspaceSet::box(lo, hi), {-env, env});
  d.invariant = sets::invariant_set(d.a_k, d.disturbance, config.invariant);

  const mpc::StageRows base = mpc::vehicle_rows(
    params, u0, mpc::CorridorConstraints::uniform(1, track_y_min, track_y_max, params.max_slip, params.max_steer),
    aug::kDim, aug::kSteer);
  // no rows on x_steer and x_delay: both are convex combinations of past
  // commands, so the envelope on the applied command already bounds them
  d.row_state = base.state;
  d.row_margin.resize(d.row_state.rows());
  for (Eigen::Index r = 0; r < d.row_state.rows(); ++r) {
    d.row_margin(r) = sets::support(d.tube(), d.row_state.row(r).transpose());
  }
  d.max_slip = params.max_slip;
  d.steer_envelope = env;
  for (Eigen::Index r = 2; r < d.row_state.rows(); ++r) {
    if (!(params.max_slip - d.row_margin(r) > 0.0)) {
      std::ostringstream msg;
      msg << "tube margin " << d.row_margin(r) << " consumes the slip limit on row " << r;
      throw EmptySetError(msg.str());
    }
  }
  const Eigen::VectorXd k = d.gain.K.transpose();
  d.input.upper = env - sets::support(d.tube(), k);
  d.input.lower = -env + sets::support(d.tube(), -k);
  if (!(d.input.lower < d.input.upper)) {
    throw EmptySetError("tightened steering interval is empty");
  }
  return d;
}

Eigen::MatrixXd tightened_bounds(const TubeDesign & design, const mpc::CorridorConstraints & corridor)
{
  corridor.validate();
  const int n = corridor.horizon();
  Eigen::MatrixXd bound(design.row_state.rows(), n);
  for (int j = 0; j < n; ++j) {
    bound(0, j) = corridor.y_max[static_cast<size_t>(j)];
    bound(1, j) = -corridor.y_min[static_cast<size_t>(j)];
    bound.block(2, j, 4, 1).setConstant(design.max_slip);
    bound.col(j) -= design.row_margin;
  }
  return bound;
}

TubeController::TubeController(
  std::shared_ptr<const TubeDesign> design, int horizon, mpc::MpcWeights weights)
: design_(std::move(design)),
  engine_(
    design_->model.uncertain.A_mean, design_->model.uncertain.B_mean, horizon, std::move(weights),
    design_->row_state, Eigen::VectorXd::Zero(design_->row_state.rows()), design_->input),
  z_(Eigen::VectorXd::Zero(aug::kDim))
{
}

void TubeController::reset(const Eigen::VectorXd & x0)
{
  if (x0.size() != aug::kDim) {
    throw DimensionError("tube controller state must have 6 entries");
  }
  z_ = x0;
  held_ = 0.0;
  engine_.reset_warm_start();
}

TubeStep TubeController::step(
  const Eigen::VectorXd & x_measured, const std::vector<Eigen::Vector2d> & y_ref,
  const mpc::CorridorConstraints & corridor)
{
  if (x_measured.size() != aug::kDim) {
    throw DimensionError("tube controller state must have 6 entries");
  }
  TubeStep out;
  out.central = engine_.solve(z_, y_ref, tightened_bounds(*design_, corridor));
  out.feasible = out.central.feasible;
  if (out.feasible) {
    held_ = out.central.steering.front();
  }
  out.nominal = held_;
  out.command = held_ + design_->gain.K.dot(x_measured - z_);
  const auto & unc = design_->model.uncertain;
  z_ = unc.A_mean * z_ + unc.B_mean * held_;
  return out;
}

}  // namespace apex::tube
