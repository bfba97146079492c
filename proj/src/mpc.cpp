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

#include "apex/mpc.hpp"

#include "apex/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace apex::mpc
{

using dynamics::idx::kSideslip;
using dynamics::idx::kY;
using dynamics::idx::kYaw;
using dynamics::idx::kYawRate;

Eigen::MatrixXd output_matrix(Eigen::Index state_dim)
{
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, state_dim);
  c(0, kY) = 1.0;
  c(1, kYaw) = 1.0;
  return c;
}

MpcWeights MpcWeights::lifted(
  const Eigen::Matrix2d & output, double control, double terminal_scale, Eigen::Index state_dim)
{
  const Eigen::MatrixXd c = output_matrix(state_dim);
  MpcWeights w;
  w.output = output;
  w.control = control;
  w.terminal = terminal_scale * c.transpose() * output * c;
  return w;
}

MpcWeights MpcWeights::defaults(Eigen::Index state_dim)
{
  return lifted(Eigen::Vector2d(1.0, 10.0).asDiagonal(), 0.5, 10.0, state_dim);
}

void MpcWeights::validate(Eigen::Index state_dim) const
{
  if (terminal.rows() != state_dim || terminal.cols() != state_dim) {
    throw DimensionError("terminal weight must be nx x nx");
  }
  auto psd = [](const Eigen::MatrixXd & m) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
      return false;
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    return es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
  };
  if (!psd(terminal) || !psd(output)) {
    throw Error("MPC weights must be symmetric positive semidefinite");
  }
  if (!(control > 0.0)) {
    throw Error("MPC control weight must be positive");
  }
}

void CorridorConstraints::validate() const
{
  if (y_min.size() != y_max.size() || y_min.empty()) {
    throw DimensionError("corridor bounds must have one entry per horizon step");
  }
  for (size_t i = 0; i < y_min.size(); ++i) {
    if (!(y_min[i] < y_max[i])) {
      std::ostringstream msg;
      msg << "corridor is empty at step " << i + 1 << " (" << y_min[i] << " >= " << y_max[i] << ")";
      throw Error(msg.str());
    }
  }
  if (!(max_slip > 0.0) || !(max_steer > 0.0)) {
    throw Error("slip and steering limits must be positive");
  }
}

CorridorConstraints CorridorConstraints::uniform(
  int horizon, double y_min, double y_max, double max_slip, double max_steer)
{
  CorridorConstraints c;
  c.y_min.assign(static_cast<size_t>(horizon), y_min);
  c.y_max.assign(static_cast<size_t>(horizon), y_max);
  c.max_slip = max_slip;
  c.max_steer = max_steer;
  return c;
}

Prediction build_prediction(const Eigen::MatrixXd & ad, const Eigen::MatrixXd & bd, int horizon)
{
  if (horizon < 1) {
    throw Error("prediction horizon must be at least one step");
  }
  if (ad.rows() != ad.cols() || bd.rows() != ad.rows() || bd.cols() != 1) {
    throw DimensionError("prediction needs a square A and a single-column B");
  }
  const Eigen::Index nx = ad.rows();
  Prediction p;
  p.state_dim = nx;
  p.horizon = horizon;
  p.phi.resize(nx * horizon, nx);
  p.gamma = Eigen::MatrixXd::Zero(nx * horizon, horizon);
  Eigen::MatrixXd power = ad;
  for (int i = 1; i <= horizon; ++i) {
    p.phi.middleRows((i - 1) * nx, nx) = power;
    power = ad * power;
  }
  // gamma_i column j = A^(i-1-j) B
  for (int i = 1; i <= horizon; ++i) {
    p.gamma.block((i - 1) * nx, i - 1, nx, 1) = bd;
    if (i > 1) {
      p.gamma.block((i - 1) * nx, 0, nx, i - 1) =
        ad * p.gamma.block((i - 2) * nx, 0, nx, i - 1);
    }
  }
  return p;
}

Prediction build_prediction(const dynamics::DiscreteModel & model, int horizon)
{
  return build_prediction(Eigen::MatrixXd(model.Ad), Eigen::MatrixXd(model.Bd), horizon);
}

qp::QpProblem build_condensed_qp(
  const Prediction & prediction, const MpcWeights & weights, const StageRows & rows,
  const InputBounds & input, const Eigen::VectorXd & x0, const std::vector<Eigen::Vector2d> & y_ref)
{
  const Eigen::Index nx = prediction.state_dim;
  const int n = prediction.horizon;
  if (x0.size() != nx || static_cast<int>(y_ref.size()) != n) {
    throw DimensionError("initial state or reference does not match the prediction");
  }
  if (rows.state.cols() != nx || rows.input.size() != rows.state.rows() ||
      rows.bound.rows() != rows.state.rows() || rows.bound.cols() != n) {
    throw DimensionError("stage rows do not match the prediction");
  }
  weights.validate(nx);
  const Eigen::MatrixXd c = output_matrix(nx);

  qp::QpProblem qp;
  qp.H = Eigen::MatrixXd::Zero(n, n);
  qp.g = Eigen::VectorXd::Zero(n);
  for (int i = 1; i < n; ++i) {
    const Eigen::MatrixXd cg = c * prediction.gamma_block(i);
    const Eigen::Vector2d err = c * prediction.phi_block(i) * x0 - y_ref[static_cast<size_t>(i - 1)];
    qp.H += 2.0 * cg.transpose() * weights.output * cg;
    qp.g += 2.0 * cg.transpose() * weights.output * err;
    qp.H(i, i) += 2.0 * weights.control;
  }
  const Eigen::VectorXd x_ref = c.transpose() * y_ref.back();
  const Eigen::MatrixXd gn = prediction.gamma_block(n);
  qp.H += 2.0 * gn.transpose() * weights.terminal * gn;
  qp.g += 2.0 * gn.transpose() * weights.terminal * (prediction.phi_block(n) * x0 - x_ref);
  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();

  const Eigen::Index r = rows.rows();
  const Eigen::Index m = r * n + 2 * n;
  qp.G = Eigen::MatrixXd::Zero(m, n);
  qp.h = Eigen::VectorXd::Zero(m);
  for (int j = 1; j <= n; ++j) {
    const Eigen::Index base = (j - 1) * r;
    for (Eigen::Index k = 0; k < r; ++k) {
      // a row with a move term reads the state that move is applied at
      const bool move_row = rows.input(k) != 0.0;
      const int step = move_row ? j - 1 : j;
      const auto c_row = rows.state.row(k);
      double fixed = c_row.dot(x0);
      if (step > 0) {
        qp.G.row(base + k) = c_row * prediction.gamma_block(step);
        fixed = (c_row * prediction.phi_block(step) * x0)(0);
      }
      if (move_row) {
        qp.G(base + k, j - 1) += rows.input(k);
      }
      qp.h(base + k) = rows.bound(k, j - 1) - fixed;
    }
  }
  for (int i = 0; i < n; ++i) {
    const Eigen::Index base = r * n + 2 * i;
    qp.G(base, i) = 1.0;
    qp.h(base) = input.upper;
    qp.G(base + 1, i) = -1.0;
    qp.h(base + 1) = -input.lower;
  }
  return qp;
}

StageRows vehicle_rows(
  const dynamics::VehicleParams & params, double u0, const CorridorConstraints & corridor,
  Eigen::Index state_dim, std::optional<Eigen::Index> steer_state)
{
  corridor.validate();
  if (state_dim < 4 || (steer_state && (*steer_state < 4 || *steer_state >= state_dim))) {
    throw DimensionError("vehicle rows need the 4 vehicle states first");
  }
  const int n = corridor.horizon();
  StageRows rows;
  rows.state = Eigen::MatrixXd::Zero(6, state_dim);
  rows.input = Eigen::VectorXd::Zero(6);
  rows.bound = Eigen::MatrixXd::Zero(6, n);

  Eigen::RowVectorXd front = Eigen::RowVectorXd::Zero(state_dim);
  front(kSideslip) = 1.0;
  front(kYawRate) = params.cg_to_front / u0;
  double front_input = 0.0;
  if (steer_state) {
    front(*steer_state) = -1.0 / params.steering_ratio;
  } else {
    front_input = -1.0 / params.steering_ratio;
  }
  Eigen::RowVectorXd rear = Eigen::RowVectorXd::Zero(state_dim);
  rear(kSideslip) = 1.0;
  rear(kYawRate) = -params.cg_to_rear / u0;

  rows.state(0, kY) = 1.0;
  rows.state(1, kY) = -1.0;
  rows.state.row(2) = front;
  rows.state.row(3) = -front;
  rows.state.row(4) = rear;
  rows.state.row(5) = -rear;
  rows.input(2) = front_input;
  rows.input(3) = -front_input;
  for (int j = 0; j < n; ++j) {
    rows.bound(0, j) = corridor.y_max[static_cast<size_t>(j)];
    rows.bound(1, j) = -corridor.y_min[static_cast<size_t>(j)];
    rows.bound.block(2, j, 4, 1).setConstant(corridor.max_slip);
  }
  return rows;
}

qp::QpProblem build_qp(
  const dynamics::DiscreteModel & model, const dynamics::VehicleParams & params,
  const MpcWeights & weights, const CorridorConstraints & constraints, const Eigen::Vector4d & x_k,
  const std::vector<Eigen::Vector2d> & y_ref)
{
  const Prediction pred = build_prediction(model, constraints.horizon());
  const StageRows rows = vehicle_rows(params, model.u0, constraints, 4);
  return build_condensed_qp(
    pred, weights, rows, {-constraints.max_steer, constraints.max_steer}, x_k, y_ref);
}

namespace
{

std::vector<int> shift_working_set(
  const std::vector<int> & active, Eigen::Index rows_per_step, int horizon)
{
  std::vector<int> shifted;
  const auto stage_rows = static_cast<int>(rows_per_step) * horizon;
  for (int idx : active) {
    if (idx < stage_rows) {
      const int step = idx / static_cast<int>(rows_per_step);
      if (step >= 1) {
        shifted.push_back(idx - static_cast<int>(rows_per_step));
      }
    } else {
      const int move = (idx - stage_rows) / 2;
      if (move >= 1) {
        shifted.push_back(idx - 2);
      }
    }
  }
  return shifted;
}

}  // namespace

LinearMpc::LinearMpc(
  Eigen::MatrixXd ad, Eigen::MatrixXd bd, int horizon, MpcWeights weights,
  Eigen::MatrixXd row_state, Eigen::VectorXd row_input, InputBounds input)
: prediction_(build_prediction(ad, bd, horizon)),
  weights_(std::move(weights)),
  row_state_(std::move(row_state)),
  row_input_(std::move(row_input)),
  input_(input)
{
  weights_.validate(prediction_.state_dim);
  if (row_state_.cols() != prediction_.state_dim || row_input_.size() != row_state_.rows()) {
    throw DimensionError("constraint rows do not match the model");
  }
}

MpcSolution LinearMpc::solve(
  const Eigen::VectorXd & x0, const std::vector<Eigen::Vector2d> & y_ref,
  const Eigen::MatrixXd & bound, const InputBounds & input)
{
  const auto start = std::chrono::steady_clock::now();
  const StageRows rows{row_state_, row_input_, bound};
  const qp::QpProblem problem = build_condensed_qp(prediction_, weights_, rows, input, x0, y_ref);
  const qp::QpSolution qs =
    solve_qp(problem, warm_enabled_ ? warm_start_ : std::optional<std::vector<int>>{});

  MpcSolution sol;
  sol.status = qs.status;
  sol.iterations = qs.iterations;
  sol.feasible = qs.optimal();
  if (sol.feasible) {
    const int n = prediction_.horizon;
    sol.steering.assign(qs.x.data(), qs.x.data() + qs.x.size());
    sol.predicted.resize(n + 1, prediction_.state_dim);
    sol.predicted.row(0) = x0.transpose();
    const Eigen::VectorXd traj = prediction_.phi * x0 + prediction_.gamma * qs.x;
    for (int i = 1; i <= n; ++i) {
      sol.predicted.row(i) = traj.segment((i - 1) * prediction_.state_dim, prediction_.state_dim);
    }
    warm_start_ = shift_working_set(qs.active_set, row_state_.rows(), n);
  } else {
    warm_start_.reset();
  }
  sol.solve_time =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

namespace
{
StageRows template_rows(const dynamics::VehicleParams & params, double u0)
{
  return vehicle_rows(
    params, u0, CorridorConstraints::uniform(1, -1.0, 1.0, params.max_slip, params.max_steer), 4);
}
}  // namespace

VehicleMpc::VehicleMpc(
  const dynamics::DiscreteModel & model, const dynamics::VehicleParams & params, int horizon,
  MpcWeights weights)
: model_(model),
  params_(params),
  engine_(
    model.Ad, model.Bd, horizon, std::move(weights), template_rows(params, model.u0).state,
    template_rows(params, model.u0).input, {-params.max_steer, params.max_steer})
{
}

MpcSolution VehicleMpc::solve(
  const Eigen::Vector4d & x_k, const std::vector<Eigen::Vector2d> & y_ref,
  const CorridorConstraints & constraints)
{
  if (constraints.horizon() != engine_.horizon()) {
    throw DimensionError("corridor length does not match the controller horizon");
  }
  const StageRows rows = vehicle_rows(params_, model_.u0, constraints, 4);
  return engine_.solve(
    x_k, y_ref, rows.bound, {-constraints.max_steer, constraints.max_steer});
}

CorridorConstraints obstacle_to_corridor(
  double track_y_min, double track_y_max, const std::vector<ObstacleBox> & obstacles,
  const CorridorQuery & q)
{
  if (q.horizon < 1 || !(q.dt > 0.0)) {
    throw Error("corridor query needs a positive horizon and step");
  }
  CorridorConstraints c =
    CorridorConstraints::uniform(q.horizon, track_y_min, track_y_max, q.max_slip, q.max_steer);
  for (const ObstacleBox & ob : obstacles) {
    const double lower_edge = ob.y_min - q.half_width;
    const double upper_edge = ob.y_max + q.half_width;
    const bool pass_above = (track_y_max - upper_edge) >= (lower_edge - track_y_min);
    // relative travel over one step plus the footprint's half-length
    const double grow = std::abs(q.u0 - ob.speed) * q.dt + q.half_width;
    for (int i = 1; i <= q.horizon; ++i) {
      const double t = q.t_now + i * q.dt;
      const double xi = q.x_now + q.u0 * i * q.dt;
      if (xi < ob.x_min_at(t) - grow || xi > ob.x_max_at(t) + grow) {
        continue;
      }
      auto & lo = c.y_min[static_cast<size_t>(i - 1)];
      auto & hi = c.y_max[static_cast<size_t>(i - 1)];
      if (pass_above) {
        lo = std::max(lo, upper_edge);
      } else {
        hi = std::min(hi, lower_edge);
      }
      if (!(lo < hi)) {
        std::ostringstream msg;
        msg << "obstacle at X = [" << ob.x_min_at(t) << ", " << ob.x_max_at(t)
            << "] leaves no room to pass at horizon step " << i;
        throw FullBlockageError(msg.str());
      }
    }
  }
  return c;
}

}  // namespace apex::mpc
