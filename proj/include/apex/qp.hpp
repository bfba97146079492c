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
#include <vector>

namespace apex::qp
{

/// minimize 0.5 x'Hx + g'x  subject to  Gx <= h
struct QpProblem
{
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;

  Eigen::Index num_variables() const { return H.rows(); }
  Eigen::Index num_constraints() const { return G.rows(); }
  double objective(const Eigen::VectorXd & x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
  /// Throws DimensionError on inconsistent sizes or an asymmetric Hessian.
  void validate() const;
};

enum class QpStatus { Optimal, Infeasible, MaxIterations };

const char * to_string(QpStatus status);

struct QpSolution
{
  Eigen::VectorXd x;
  double objective{0.0};
  /// Working set at termination, ascending constraint indices.
  std::vector<int> active_set;
  /// One multiplier per constraint row; zero off the active set.
  Eigen::VectorXd multipliers;
  int iterations{0};
  QpStatus status{QpStatus::Infeasible};
  /// Objective after each primal step taken from a feasible point.
  std::vector<double> objective_history;

  bool optimal() const { return status == QpStatus::Optimal; }
};

struct QpOptions
{
  /// 0 selects 50 * (n + m).
  int max_iterations{0};
  double feasibility_tol{1e-9};
  double phase1_tol{1e-8};
};

/// Dense primal active-set method. Cold starts project the unconstrained
/// minimizer onto the feasible set (Euclidean metric) to obtain a feasible
/// point; a warm start first tries the equality-constrained minimizer on the
/// given working set. Throws NotPositiveDefiniteError when H has no Cholesky factor.
QpSolution solve_qp(
  const QpProblem & problem, const std::optional<std::vector<int>> & warm_start = std::nullopt,
  const QpOptions & options = {});

struct KktReport
{
  double stationarity{0.0};
  double primal_feasibility{0.0};
  double complementarity{0.0};
  double dual_feasibility{0.0};

  double worst() const;
};

KktReport check_kkt(const QpProblem & problem, const QpSolution & solution);

}  // namespace apex::qp
