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

#include <complex>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

namespace apex::sets
{

/// {c + G t : |t|_inf <= 1}
struct Zonotope
{
  Eigen::VectorXd center;
  Eigen::MatrixXd generators;  // n x m

  Eigen::Index dim() const { return center.size(); }
  Eigen::Index num_generators() const { return generators.cols(); }

  static Zonotope point(const Eigen::VectorXd & c);
  static Zonotope box(const Eigen::VectorXd & lower, const Eigen::VectorXd & upper);
};

Zonotope linear_map(const Eigen::MatrixXd & M, const Zonotope & z);
Zonotope minkowski_sum(const Zonotope & a, const Zonotope & b);
double support(const Zonotope & z, const Eigen::VectorXd & direction);
/// Smallest axis-aligned box containing z, as a zonotope.
Zonotope interval_hull(const Zonotope & z);
/// Keeps the `max_generators - n` longest generators and replaces the rest
/// by their interval hull in the coordinates of `basis` (columns; empty means
/// the axes). Result contains the input.
Zonotope reduce(
  const Zonotope & z, Eigen::Index max_generators, const Eigen::MatrixXd & basis = Eigen::MatrixXd());

void write_csv(std::ostream & out, const Zonotope & z);
Zonotope read_csv(std::istream & in);

/// {x : C x <= d}
struct HalfspaceSet
{
  Eigen::MatrixXd C;
  Eigen::VectorXd d;

  Eigen::Index dim() const { return C.cols(); }
  Eigen::Index rows() const { return C.rows(); }
  void validate() const;
  bool contains(const Eigen::VectorXd & x, double tol = 0.0) const;

  /// Rows +e_i, -e_i per coordinate.
  static HalfspaceSet box(const Eigen::VectorXd & lower, const Eigen::VectorXd & upper);
  /// Tightest axis bounds implied by the axis-aligned rows; throws Error
  /// when a coordinate is unbounded on either side.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> box_bounds() const;
};

/// Pontryagin difference row by row: c'x <= d - h_S(c).
HalfspaceSet tighten(const HalfspaceSet & constraints, const Zonotope & s);

/// Polytopic uncertainty co{(A_j, B_j)} and its vertex average.
struct UncertainModel
{
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::MatrixXd> B;
  Eigen::MatrixXd A_mean;
  Eigen::MatrixXd B_mean;

  static UncertainModel from_vertices(std::vector<Eigen::MatrixXd> a, std::vector<Eigen::MatrixXd> b);
  int vertex_count() const { return static_cast<int>(A.size()); }
  Eigen::Index state_dim() const { return A_mean.rows(); }
};

struct Interval
{
  double lower{0.0};
  double upper{0.0};
};

/// Box enclosing {(A - A_mean)x + (B - B_mean)u} over the vertices and the
/// state/input boxes.
Zonotope disturbance_set(const UncertainModel & model, const HalfspaceSet & x_box, Interval u_box);

struct FeedbackGain
{
  Eigen::RowVectorXd K;                // closed loop A + B K
  Eigen::VectorXcd closed_loop_poles;  // eig(A + B K)
};

/// Ackermann's formula for a single-input pair.
FeedbackGain pole_place(
  const Eigen::MatrixXd & A, const Eigen::MatrixXd & B, const std::vector<std::complex<double>> & poles);

/// Eigenvalues sorted by real part, then imaginary part.
std::vector<std::complex<double>> sorted_eigenvalues(const Eigen::MatrixXd & A);
double spectral_radius(const Eigen::MatrixXd & A);

/// 2n signed axis directions followed by `random_count` fixed unit directions.
std::vector<Eigen::VectorXd> probe_directions(Eigen::Index n, int random_count = 64);

/// Unit real eigenvectors of A (real and imaginary parts for a complex pair);
/// in these coordinates A acts per axis (per plane for a complex pair). A
/// repeated eigenvalue contributes an orthonormal basis of its generalized
/// eigenspace. Falls back to Schur vectors when the result is singular.
Eigen::MatrixXd contractive_basis(const Eigen::MatrixXd & A);

struct InvariantSetOptions
{
  double tol{1e-6};
  int max_iterations{200};
  /// Above this count the shortest generators are boxed in the contractive
  /// basis of A_K.
  Eigen::Index max_generators{200};
};

struct InvariantSetResult
{
  Zonotope set;
  int iterations{0};
  std::vector<Eigen::VectorXd> probes;
  /// Support of S_K(i) on each probe, i = 1..iterations.
  std::vector<Eigen::VectorXd> support_history;
};

/// S(i+1) = S(i) + A_K^i W until no probe support grows by more than tol
/// (absolute, and relative to the current support). `on_iterate` sees S(i).
InvariantSetResult invariant_set(
  const Eigen::MatrixXd & a_k, const Zonotope & w, const InvariantSetOptions & options = {},
  const std::function<void(int, const Zonotope &)> & on_iterate = {});

/// max over probes of h_{A S + W}(d) / h_S(d) - 1 (negative when strictly inside).
double invariance_margin(
  const Eigen::MatrixXd & a_k, const Zonotope & w, const Zonotope & s,
  const std::vector<Eigen::VectorXd> & probes);

}  // namespace apex::sets
