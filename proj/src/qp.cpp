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

#include "apex/qp.hpp"

#include "apex/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace apex::qp
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Marks rows whose normal duplicates an earlier-kept row; the tightest bound
/// survives, lowest index on equal bounds.
std::vector<bool> shadowed_rows(const Eigen::MatrixXd & G, const Eigen::VectorXd & h)
{
  const Eigen::Index m = G.rows();
  std::vector<int> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&](int a, int b) {
    for (Eigen::Index c = 0; c < G.cols(); ++c) {
      if (G(a, c) != G(b, c)) {
        return G(a, c) < G(b, c);
      }
    }
    if (h(a) != h(b)) {
      return h(a) < h(b);
    }
    return a < b;
  };
  std::sort(order.begin(), order.end(), row_less);
  std::vector<bool> shadowed(static_cast<size_t>(m), false);
  // sorted by bound then index, so the first member of each run is kept
  for (size_t k = 1; k < order.size(); ++k) {
    if (G.row(order[k - 1]) == G.row(order[k])) {
      shadowed[static_cast<size_t>(order[k])] = true;
    }
  }
  return shadowed;
}

struct ProjectionResult
{
  Eigen::VectorXd x;
  std::vector<int> active;
  bool feasible{false};
  bool exhausted{false};
};

/// Euclidean projection of x0 onto {x : Gx <= h} by the dual method of
/// Goldfarb and Idnani specialised to an identity Hessian.
ProjectionResult project_feasible(
  const Eigen::MatrixXd & G, const Eigen::VectorXd & h, const std::vector<bool> & shadowed,
  const Eigen::VectorXd & x0, double tol, int max_iterations)
{
  const Eigen::Index m = G.rows();
  ProjectionResult res;
  res.x = x0;
  std::vector<int> active;
  std::vector<double> mult;

  for (int outer = 0; outer < max_iterations; ++outer) {
    // most violated row not yet active, lowest index on ties
    int p = -1;
    double worst = -tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (shadowed[static_cast<size_t>(i)]) {
        continue;
      }
      if (std::find(active.begin(), active.end(), static_cast<int>(i)) != active.end()) {
        continue;
      }
      const double slack = h(i) - G.row(i).dot(res.x);
      if (slack < worst) {
        worst = slack;
        p = static_cast<int>(i);
      }
    }
    if (p < 0) {
      res.active = active;
      res.feasible = true;
      return res;
    }

    // n'x >= b form of row p
    const Eigen::VectorXd np = -G.row(p).transpose();
    double mult_p = 0.0;
    for (int inner = 0; inner < max_iterations; ++inner) {
      const auto q = static_cast<Eigen::Index>(active.size());
      Eigen::VectorXd r(q);
      Eigen::VectorXd z = np;
      if (q > 0) {
        Eigen::MatrixXd N(G.cols(), q);
        for (Eigen::Index j = 0; j < q; ++j) {
          N.col(j) = -G.row(active[static_cast<size_t>(j)]).transpose();
        }
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(N);
        const Eigen::MatrixXd Q = qr.householderQ();
        const Eigen::VectorXd qn = Q.transpose() * np;
        r = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(qn.head(q));
        z = Q.rightCols(G.cols() - q) * qn.tail(G.cols() - q);
      }
      double t1 = kInf;
      int drop = -1;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (r(j) > 1e-14) {
          const double ratio = mult[static_cast<size_t>(j)] / r(j);
          if (ratio < t1) {
            t1 = ratio;
            drop = static_cast<int>(j);
          }
        }
      }
      double t2 = kInf;
      const double zz = z.squaredNorm();
      if (zz > 1e-24 * std::max(1.0, np.squaredNorm())) {
        const double violation = -G.row(p).dot(res.x) + h(p);  // slack, negative when violated
        t2 = std::max(0.0, -violation) / zz;
      }
      const double t = std::min(t1, t2);
      if (t == kInf) {
        res.active = active;
        res.feasible = false;
        return res;
      }
      for (Eigen::Index j = 0; j < q; ++j) {
        mult[static_cast<size_t>(j)] -= t * r(j);
      }
      mult_p += t;
      if (t2 < kInf) {
        res.x += t * z;
      }
      if (t2 <= t1) {
        active.push_back(p);
        mult.push_back(mult_p);
        break;
      }
      active.erase(active.begin() + drop);
      mult.erase(mult.begin() + drop);
    }
  }
  res.active = active;
  res.exhausted = true;
  return res;
}

}  // namespace

void QpProblem::validate() const
{
  const Eigen::Index n = H.rows();
  if (n < 1 || H.cols() != n) {
    throw DimensionError("QP Hessian must be square with n >= 1");
  }
  if (g.size() != n) {
    throw DimensionError("QP gradient length must match the Hessian");
  }
  if (G.rows() != h.size() || (G.rows() > 0 && G.cols() != n)) {
    throw DimensionError("QP constraint matrix must be m x n with an m-vector bound");
  }
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DimensionError("QP Hessian must be symmetric");
  }
}

const char * to_string(QpStatus status)
{
  switch (status) {
    case QpStatus::Optimal:
      return "optimal";
    case QpStatus::Infeasible:
      return "infeasible";
    case QpStatus::MaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

QpSolution solve_qp(
  const QpProblem & problem, const std::optional<std::vector<int>> & warm_start,
  const QpOptions & options)
{
  problem.validate();
  const Eigen::Index n = problem.num_variables();
  const Eigen::Index m = problem.num_constraints();
  const int max_iterations =
    options.max_iterations > 0 ? options.max_iterations : static_cast<int>(50 * (n + m));

  const Eigen::LLT<Eigen::MatrixXd> llt(problem.H);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("QP Hessian is not positive definite");
  }
  // y = L'x turns the objective into 0.5|y|^2 + gh'y
  const Eigen::MatrixXd L = llt.matrixL();
  const auto Lt = L.transpose();
  const Eigen::VectorXd gh = L.triangularView<Eigen::Lower>().solve(problem.g);
  Eigen::MatrixXd Gh(m, n);
  if (m > 0) {
    Gh = L.triangularView<Eigen::Lower>().solve(problem.G.transpose()).transpose();
  }
  const Eigen::VectorXd & h = problem.h;
  const std::vector<bool> shadowed = shadowed_rows(problem.G, problem.h);
  const double tol = options.feasibility_tol;

  auto to_x = [&](const Eigen::VectorXd & y) -> Eigen::VectorXd {
    return Lt.triangularView<Eigen::Upper>().solve(y);
  };
  auto max_violation = [&](const Eigen::VectorXd & y) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!shadowed[static_cast<size_t>(i)]) {
        worst = std::max(worst, Gh.row(i).dot(y) - h(i));
      }
    }
    return worst;
  };
  // equality-constrained minimizer on a working set, with multipliers
  auto eqp = [&](const std::vector<int> & W, const Eigen::VectorXd & y, Eigen::VectorXd & step,
                 Eigen::VectorXd & lambda) {
    const Eigen::VectorXd grad = y + gh;
    const auto q = static_cast<Eigen::Index>(W.size());
    if (q == 0) {
      step = -grad;
      lambda.resize(0);
      return;
    }
    Eigen::MatrixXd At(n, q);
    for (Eigen::Index j = 0; j < q; ++j) {
      At.col(j) = Gh.row(W[static_cast<size_t>(j)]).transpose();
    }
    // orthogonal factors keep the null-space step clean when A is ill-conditioned
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(At);
    const Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::VectorXd qg = Q.transpose() * grad;
    lambda = -qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(qg.head(q));
    step = -Q.rightCols(n - q) * qg.tail(n - q);
  };

  QpSolution sol;
  sol.multipliers = Eigen::VectorXd::Zero(m);

  Eigen::VectorXd y;
  std::vector<int> W;
  bool started = false;

  if (warm_start) {
    // keep valid, unique, linearly independent rows
    std::vector<int> candidate;
    for (int i : *warm_start) {
      if (i >= 0 && i < m && !shadowed[static_cast<size_t>(i)] &&
          std::find(candidate.begin(), candidate.end(), i) == candidate.end()) {
        candidate.push_back(i);
      }
    }
    std::sort(candidate.begin(), candidate.end());
    for (int i : candidate) {
      if (static_cast<Eigen::Index>(W.size()) >= n) {
        break;
      }
      std::vector<int> trial = W;
      trial.push_back(i);
      Eigen::MatrixXd A(static_cast<Eigen::Index>(trial.size()), n);
      for (size_t j = 0; j < trial.size(); ++j) {
        A.row(static_cast<Eigen::Index>(j)) = Gh.row(trial[j]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
      lu.setThreshold(1e-10);
      if (lu.rank() == static_cast<Eigen::Index>(trial.size())) {
        W = std::move(trial);
      }
    }
    if (W.empty()) {
      y = -gh;
    } else {
      const auto q = static_cast<Eigen::Index>(W.size());
      Eigen::MatrixXd A(q, n);
      Eigen::VectorXd b(q);
      for (Eigen::Index j = 0; j < q; ++j) {
        A.row(j) = Gh.row(W[static_cast<size_t>(j)]);
        b(j) = h(W[static_cast<size_t>(j)]);
      }
      const Eigen::VectorXd lambda = -(A * A.transpose()).ldlt().solve(b + A * gh);
      y = -gh - A.transpose() * lambda;
    }
    started = max_violation(y) <= tol;
    if (!started) {
      W.clear();
    }
  }

  if (!started) {
    y = -gh;
    if (max_violation(y) > tol) {
      const Eigen::VectorXd x_unc = to_x(y);
      ProjectionResult proj =
        project_feasible(problem.G, h, shadowed, x_unc, 0.1 * options.phase1_tol, max_iterations);
      double residual = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (!shadowed[static_cast<size_t>(i)]) {
          residual = std::max(residual, problem.G.row(i).dot(proj.x) - h(i));
        }
      }
      if (!proj.feasible || residual > options.phase1_tol) {
        sol.x = proj.x;
        sol.objective = problem.objective(proj.x);
        sol.status = proj.exhausted ? QpStatus::MaxIterations : QpStatus::Infeasible;
        return sol;
      }
      y = Lt * proj.x;
      W = proj.active;
    }
  }

  const double step_tol = 1e-11;
  Eigen::VectorXd step;
  Eigen::VectorXd lambda;
  sol.objective_history.push_back(0.5 * y.squaredNorm() + gh.dot(y));
  // Bland's smallest-index rule after a zero-length step prevents cycling at
  // degenerate vertices
  bool degenerate = false;
  int iter = 0;
  for (;; ++iter) {
    if (iter >= max_iterations) {
      sol.status = QpStatus::MaxIterations;
      break;
    }
    eqp(W, y, step, lambda);
    if (step.norm() <= step_tol * std::max(1.0, (y + gh).norm())) {
      int drop = -1;
      double most_negative = 0.0;
      const double dual_tol = 1e-11 * std::max(1.0, lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0);
      for (Eigen::Index j = 0; j < lambda.size(); ++j) {
        const bool lower_index = drop < 0 || W[static_cast<size_t>(j)] < W[static_cast<size_t>(drop)];
        const bool better = degenerate ? lower_index
                                       : (lambda(j) < most_negative ||
                                          (lambda(j) == most_negative && lower_index));
        if (lambda(j) < -dual_tol && better) {
          most_negative = lambda(j);
          drop = static_cast<int>(j);
        }
      }
      if (drop < 0) {
        sol.status = QpStatus::Optimal;
        break;
      }
      W.erase(W.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (shadowed[static_cast<size_t>(i)] ||
          std::find(W.begin(), W.end(), static_cast<int>(i)) != W.end()) {
        continue;
      }
      const double rate = Gh.row(i).dot(step);
      if (rate <= 1e-14 * std::max(1.0, Gh.row(i).norm() * step.norm())) {
        continue;
      }
      const double ratio = std::max(0.0, h(i) - Gh.row(i).dot(y)) / rate;
      if (ratio < alpha) {
        alpha = ratio;
        blocking = static_cast<int>(i);
      }
    }
    degenerate = alpha * step.norm() <= step_tol * std::max(1.0, y.norm());
    y += alpha * step;
    if (blocking >= 0) {
      W.push_back(blocking);
    }
    sol.objective_history.push_back(0.5 * y.squaredNorm() + gh.dot(y));
  }

  sol.iterations = iter;
  sol.x = to_x(y);
  sol.objective = problem.objective(sol.x);
  eqp(W, y, step, lambda);
  for (size_t j = 0; j < W.size(); ++j) {
    sol.multipliers(W[j]) = lambda(static_cast<Eigen::Index>(j));
  }
  sol.active_set = W;
  std::sort(sol.active_set.begin(), sol.active_set.end());
  return sol;
}

double KktReport::worst() const
{
  return std::max({stationarity, primal_feasibility, complementarity, dual_feasibility});
}

KktReport check_kkt(const QpProblem & problem, const QpSolution & solution)
{
  const Eigen::VectorXd & x = solution.x;
  const Eigen::VectorXd & lambda = solution.multipliers;
  KktReport r;
  Eigen::VectorXd residual = problem.H * x + problem.g;
  if (problem.num_constraints() > 0) {
    residual += problem.G.transpose() * lambda;
    const Eigen::VectorXd slack = problem.h - problem.G * x;
    r.primal_feasibility = std::max(0.0, -slack.minCoeff());
    r.complementarity = lambda.cwiseProduct(slack).cwiseAbs().maxCoeff();
    r.dual_feasibility = std::max(0.0, -lambda.minCoeff());
  }
  r.stationarity = residual.cwiseAbs().maxCoeff();
  return r;
}

}  // namespace apex::qp
