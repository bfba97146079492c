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
#include "apex/qp.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace apex::mpc
{

/// Output selection y = [Y, yaw] shared by the 4-state and augmented models.
Eigen::MatrixXd output_matrix(Eigen::Index state_dim);

struct MpcWeights
{
  Eigen::MatrixXd terminal;  // Q_N, nx x nx
  Eigen::Matrix2d output{Eigen::Vector2d(1.0, 10.0).asDiagonal()};
  double control{0.5};

  /// Q_N = scale * C' Q_y C on the output rows.
  static MpcWeights lifted(
    const Eigen::Matrix2d & output, double control, double terminal_scale, Eigen::Index state_dim);
  static MpcWeights defaults(Eigen::Index state_dim = 4);
  void validate(Eigen::Index state_dim) const;
};

/// Per-step lateral position bounds plus the slip and steering limits.
struct CorridorConstraints
{
  std::vector<double> y_min;  // steps 1..N
  std::vector<double> y_max;
  double max_slip{0.0};
  double max_steer{0.0};

  int horizon() const { return static_cast<int>(y_min.size()); }
  void validate() const;
  static CorridorConstraints uniform(
    int horizon, double y_min, double y_max, double max_slip, double max_steer);
};

/// x_{k+i} = phi_i x_k + gamma_i [u_k .. u_{k+N-1}], blocks stacked by step.
struct Prediction
{
  Eigen::MatrixXd phi;    // (nx N) x nx
  Eigen::MatrixXd gamma;  // (nx N) x N
  Eigen::Index state_dim{0};
  int horizon{0};

  auto phi_block(int step) const { return phi.middleRows((step - 1) * state_dim, state_dim); }
  auto gamma_block(int step) const { return gamma.middleRows((step - 1) * state_dim, state_dim); }
};

Prediction build_prediction(const Eigen::MatrixXd & ad, const Eigen::MatrixXd & bd, int horizon);
Prediction build_prediction(const dynamics::DiscreteModel & model, int horizon);

/// Linear rows enforced once per horizon step j = 1..N. A row without a move
/// term constrains the predicted state: state * x_j <= bound(:, j-1). A row
/// with one pairs each move with the state it is applied at:
///   state * x_{j-1} + input * u_{j-1} <= bound(:, j-1)
struct StageRows
{
  Eigen::MatrixXd state;  // r x nx
  Eigen::VectorXd input;  // r
  Eigen::MatrixXd bound;  // r x N

  Eigen::Index rows() const { return state.rows(); }
};

struct InputBounds
{
  double lower{0.0};
  double upper{0.0};
};

/// Condensed QP over the N moves. Stage cost runs over steps 1..N-1 (outputs
/// and the matching moves), with the terminal weight on the step-N deviation
/// from the lifted output reference. Row layout: stage rows step-major, then
/// (upper, lower) input rows per move.
qp::QpProblem build_condensed_qp(
  const Prediction & prediction, const MpcWeights & weights, const StageRows & rows,
  const InputBounds & input, const Eigen::VectorXd & x0, const std::vector<Eigen::Vector2d> & y_ref);

/// Corridor, front-slip and rear-slip rows for the single-track model. With
/// `steer_state` set, the front-slip rows read the roadwheel angle from that
/// state (column units) instead of the move.
StageRows vehicle_rows(
  const dynamics::VehicleParams & params, double u0, const CorridorConstraints & corridor,
  Eigen::Index state_dim, std::optional<Eigen::Index> steer_state = std::nullopt);

qp::QpProblem build_qp(
  const dynamics::DiscreteModel & model, const dynamics::VehicleParams & params,
  const MpcWeights & weights, const CorridorConstraints & constraints, const Eigen::Vector4d & x_k,
  const std::vector<Eigen::Vector2d> & y_ref);

struct MpcSolution
{
  std::vector<double> steering;  // u_k .. u_{k+N-1}
  Eigen::MatrixXd predicted;     // (N+1) x nx, row 0 = x_k
  bool feasible{false};
  double solve_time{0.0};        // s
  qp::QpStatus status{qp::QpStatus::Infeasible};
  int iterations{0};
};

/// Receding-horizon controller over an arbitrary discrete single-input model.
/// Holds the warm-start cache only; one instance per simulation.
class LinearMpc
{
public:
  LinearMpc(
    Eigen::MatrixXd ad, Eigen::MatrixXd bd, int horizon, MpcWeights weights,
    Eigen::MatrixXd row_state, Eigen::VectorXd row_input, InputBounds input);

  /// `bound` is r x N; solved with the previous working set shifted one step.
  MpcSolution solve(
    const Eigen::VectorXd & x0, const std::vector<Eigen::Vector2d> & y_ref,
    const Eigen::MatrixXd & bound, const InputBounds & input);
  MpcSolution solve(
    const Eigen::VectorXd & x0, const std::vector<Eigen::Vector2d> & y_ref,
    const Eigen::MatrixXd & bound)
  {
    return solve(x0, y_ref, bound, input_);
  }

  void reset_warm_start() { warm_start_.reset(); }
  void set_warm_start_enabled(bool enabled) { warm_enabled_ = enabled; }
  const Prediction & prediction() const { return prediction_; }
  int horizon() const { return prediction_.horizon; }
  Eigen::Index rows_per_step() const { return row_state_.rows(); }

private:
  Prediction prediction_;
  MpcWeights weights_;
  Eigen::MatrixXd row_state_;
  Eigen::VectorXd row_input_;
  InputBounds input_;
  std::optional<std::vector<int>> warm_start_;
  bool warm_enabled_{true};
};

/// Nominal lateral MPC on the 4-state model.
class VehicleMpc
{
public:
  VehicleMpc(
    const dynamics::DiscreteModel & model, const dynamics::VehicleParams & params, int horizon,
    MpcWeights weights = MpcWeights::defaults());

  MpcSolution solve(
    const Eigen::Vector4d & x_k, const std::vector<Eigen::Vector2d> & y_ref,
    const CorridorConstraints & constraints);

  LinearMpc & engine() { return engine_; }
  const dynamics::DiscreteModel & model() const { return model_; }

private:
  dynamics::DiscreteModel model_;
  dynamics::VehicleParams params_;
  LinearMpc engine_;
};

/// Axis-aligned obstacle; extents at t = 0, moving along +X at `speed`.
struct ObstacleBox
{
  double x_min{0.0};
  double x_max{0.0};
  double y_min{0.0};
  double y_max{0.0};
  double speed{0.0};

  double x_min_at(double t) const { return x_min + speed * t; }
  double x_max_at(double t) const { return x_max + speed * t; }
};

struct CorridorQuery
{
  double x_now{0.0};
  double t_now{0.0};
  double u0{0.0};
  double dt{0.0};
  int horizon{0};
  double half_width{1.0};
  double max_slip{0.0};
  double max_steer{0.0};
};

/// Track CG bounds tightened around each obstacle whose X-extent (grown by the
/// relative travel over one step and by half the vehicle width) covers a predicted X_i = x_now + u0 i dt.
/// The bound on the obstacle's side moves to its edge plus half the vehicle
/// width; the vehicle passes on the side with more room. Throws
/// FullBlockageError when no room is left.
CorridorConstraints obstacle_to_corridor(
  double track_y_min, double track_y_max, const std::vector<ObstacleBox> & obstacles,
  const CorridorQuery & query);

}  // namespace apex::mpc
