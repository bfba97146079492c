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

#include "apex/sets.hpp"

#include "apex/csv.hpp"
#include "apex/errors.hpp"
#include "apex/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace apex::sets
{

Zonotope Zonotope::point(const Eigen::VectorXd & c)
{
  return {c, Eigen::MatrixXd::Zero(c.size(), 0)};
}

Zonotope Zonotope::box(const Eigen::VectorXd & lower, const Eigen::VectorXd & upper)
{
  if (lower.size() != upper.size()) {
    throw DimensionError("box bounds differ in length");
  }
  if (!lower.allFinite() || !upper.allFinite()) {
    throw Error("box bounds must be finite");
  }
  if ((upper.array() < lower.array()).any()) {
    throw EmptySetError("box has a lower bound above its upper bound");
  }
  const Eigen::Index n = lower.size();
  Zonotope z;
  z.center = 0.5 * (lower + upper);
  std::vector<Eigen::Index> axes;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (upper(i) > lower(i)) {
      axes.push_back(i);
    }
  }
  z.generators = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(axes.size()));
  for (size_t k = 0; k < axes.size(); ++k) {
    const Eigen::Index i = axes[k];
    z.generators(i, static_cast<Eigen::Index>(k)) = 0.5 * (upper(i) - lower(i));
  }
  return z;
}

Zonotope linear_map(const Eigen::MatrixXd & M, const Zonotope & z)
{
  if (M.cols() != z.dim()) {
    throw DimensionError("linear map does not conform to the zonotope dimension");
  }
  return {M * z.center, M * z.generators};
}

Zonotope minkowski_sum(const Zonotope & a, const Zonotope & b)
{
  if (a.dim() != b.dim()) {
    throw DimensionError("Minkowski sum of zonotopes with different dimensions");
  }
  Zonotope z;
  z.center = a.center + b.center;
  z.generators.resize(a.dim(), a.num_generators() + b.num_generators());
  z.generators << a.generators, b.generators;
  return z;
}

double support(const Zonotope & z, const Eigen::VectorXd & direction)
{
  if (direction.size() != z.dim()) {
    throw DimensionError("support direction does not match the zonotope dimension");
  }
  if (direction.squaredNorm() == 0.0) {
    throw Error("support function needs a nonzero direction");
  }
  return direction.dot(z.center) + (direction.transpose() * z.generators).cwiseAbs().sum();
}

Zonotope interval_hull(const Zonotope & z)
{
  const Eigen::VectorXd radius = z.generators.cwiseAbs().rowwise().sum();
  return Zonotope::box(z.center - radius, z.center + radius);
}

Zonotope reduce(const Zonotope & z, Eigen::Index max_generators, const Eigen::MatrixXd & basis)
{
  const Eigen::Index n = z.dim();
  const Eigen::Index m = z.num_generators();
  if (m <= max_generators) {
    return z;
  }
  const bool axes = basis.size() == 0;
  if (!axes && (basis.rows() != n || basis.cols() != n)) {
    throw DimensionError("reduction basis must be n x n");
  }
  const Eigen::MatrixXd local = axes ? z.generators : Eigen::MatrixXd(basis.fullPivLu().solve(z.generators));
  const Eigen::Index keep = std::max<Eigen::Index>(0, max_generators - n);
  std::vector<Eigen::Index> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  // box the shortest generators; in a truncated series these are the late terms
  const Eigen::VectorXd score = local.colwise().norm().transpose();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return score(a) > score(b);
  });
  Eigen::MatrixXd kept(n, keep);
  Eigen::VectorXd radius = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index j = order[static_cast<size_t>(k)];
    if (k < keep) {
      kept.col(k) = z.generators.col(j);
    } else {
      radius += local.col(j).cwiseAbs();
    }
  }
  Eigen::MatrixXd boxed = radius.asDiagonal();
  if (!axes) {
    boxed = basis * boxed;
  }
  Zonotope out;
  out.center = z.center;
  out.generators.resize(n, keep + n);
  out.generators << kept, boxed;
  return out;
}

void write_csv(std::ostream & out, const Zonotope & z)
{
  out << csv::join(z.center) << '\n';
  for (Eigen::Index j = 0; j < z.num_generators(); ++j) {
    out << csv::join(z.generators.col(j)) << '\n';
  }
}

Zonotope read_csv(std::istream & in)
{
  std::string line;
  std::vector<std::vector<double>> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") {
      continue;
    }
    try {
      rows.push_back(csv::parse_numbers(line));
    } catch (const std::invalid_argument & e) {
      throw Error("zonotope CSV line " + std::to_string(line_no) + ": " + e.what());
    }
    if (rows.back().size() != rows.front().size()) {
      throw DimensionError("zonotope CSV line " + std::to_string(line_no) + " has the wrong width");
    }
  }
  if (rows.empty()) {
    throw Error("zonotope CSV has no center row");
  }
  const auto n = static_cast<Eigen::Index>(rows.front().size());
  Zonotope z;
  z.center = Eigen::Map<const Eigen::VectorXd>(rows.front().data(), n);
  z.generators.resize(n, static_cast<Eigen::Index>(rows.size()) - 1);
  for (size_t j = 1; j < rows.size(); ++j) {
    z.generators.col(static_cast<Eigen::Index>(j) - 1) = Eigen::Map<const Eigen::VectorXd>(rows[j].data(), n);
  }
  return z;
}

void HalfspaceSet::validate() const
{
  if (C.rows() != d.size()) {
    throw DimensionError("halfspace normals and offsets differ in count");
  }
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    if (C.row(i).squaredNorm() == 0.0) {
      throw Error("halfspace row " + std::to_string(i) + " has a zero normal");
    }
  }
}

bool HalfspaceSet::contains(const Eigen::VectorXd & x, double tol) const
{
  return ((C * x - d).array() <= tol).all();
}

HalfspaceSet HalfspaceSet::box(const Eigen::VectorXd & lower, const Eigen::VectorXd & upper)
{
  if (lower.size() != upper.size()) {
    throw DimensionError("box bounds differ in length");
  }
  const Eigen::Index n = lower.size();
  HalfspaceSet h;
  h.C = Eigen::MatrixXd::Zero(2 * n, n);
  h.d.resize(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h.C(2 * i, i) = 1.0;
    h.d(2 * i) = upper(i);
    h.C(2 * i + 1, i) = -1.0;
    h.d(2 * i + 1) = -lower(i);
  }
  return h;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> HalfspaceSet::box_bounds() const
{
  validate();
  const Eigen::Index n = dim();
  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -inf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, inf);
  for (Eigen::Index r = 0; r < rows(); ++r) {
    Eigen::Index axis = -1;
    int nonzero = 0;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (C(r, c) != 0.0) {
        axis = c;
        ++nonzero;
      }
    }
    if (nonzero != 1) {
      continue;
    }
    const double v = C(r, axis);
    if (v > 0.0) {
      hi(axis) = std::min(hi(axis), d(r) / v);
    } else {
      lo(axis) = std::max(lo(axis), d(r) / v);
    }
  }
  if (!lo.allFinite() || !hi.allFinite()) {
    throw Error("constraint set is not a bounded box");
  }
  return {lo, hi};
}

HalfspaceSet tighten(const HalfspaceSet & constraints, const Zonotope & s)
{
  constraints.validate();
  if (s.dim() != constraints.dim()) {
    throw DimensionError("tightening set dimension does not match the constraints");
  }
  if (!s.center.allFinite() || !s.generators.allFinite()) {
    throw Error("tightening set must be bounded");
  }
  HalfspaceSet out = constraints;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out.d(i) -= support(s, out.C.row(i).transpose());
  }
  // opposing rows c'x <= d1 and -k c'x <= d2 cross when d1 + d2 / k < 0
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double ni = out.C.row(i).norm();
    for (Eigen::Index j = i + 1; j < out.rows(); ++j) {
      const double nj = out.C.row(j).norm();
      if ((out.C.row(i) / ni + out.C.row(j) / nj).norm() > 1e-12) {
        continue;
      }
      const double width = out.d(i) / ni + out.d(j) / nj;
      if (width < 0.0) {
        std::ostringstream msg;
        msg << "tightened rows " << i << " and " << j << " cross by " << -width;
        throw EmptySetError(msg.str());
      }
    }
  }
  return out;
}

UncertainModel UncertainModel::from_vertices(std::vector<Eigen::MatrixXd> a, std::vector<Eigen::MatrixXd> b)
{
  if (a.empty() || a.size() != b.size()) {
    throw DimensionError("uncertain model needs matching, nonempty vertex lists");
  }
  UncertainModel m;
  const Eigen::Index n = a.front().rows();
  m.A_mean = Eigen::MatrixXd::Zero(n, n);
  m.B_mean = Eigen::MatrixXd::Zero(n, b.front().cols());
  for (size_t j = 0; j < a.size(); ++j) {
    if (a[j].rows() != n || a[j].cols() != n || b[j].rows() != n || b[j].cols() != m.B_mean.cols()) {
      throw DimensionError("uncertain model vertices differ in shape");
    }
    m.A_mean += a[j];
    m.B_mean += b[j];
  }
  const double inv = 1.0 / static_cast<double>(a.size());
  m.A_mean *= inv;
  m.B_mean *= inv;
  m.A = std::move(a);
  m.B = std::move(b);
  return m;
}

Zonotope disturbance_set(const UncertainModel & model, const HalfspaceSet & x_box, Interval u_box)
{
  const Eigen::Index n = model.state_dim();
  const Eigen::Index nu = model.B_mean.cols();
  if (x_box.dim() != n || nu != 1) {
    throw DimensionError("disturbance set needs a state box and a single input");
  }
  if (!std::isfinite(u_box.lower) || !std::isfinite(u_box.upper) || u_box.upper < u_box.lower) {
    throw Error("input interval must be bounded");
  }
  const auto [x_lo, x_hi] = x_box.box_bounds();
  Eigen::VectorXd center(n + 1);
  Eigen::VectorXd half(n + 1);
  center << 0.5 * (x_lo + x_hi), 0.5 * (u_box.lower + u_box.upper);
  half << 0.5 * (x_hi - x_lo), 0.5 * (u_box.upper - u_box.lower);

  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, inf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, -inf);
  for (int j = 0; j < model.vertex_count(); ++j) {
    Eigen::MatrixXd M(n, n + 1);
    M << model.A[static_cast<size_t>(j)] - model.A_mean, model.B[static_cast<size_t>(j)] - model.B_mean;
    const Eigen::VectorXd c = M * center;
    const Eigen::VectorXd r = M.cwiseAbs() * half;
    lo = lo.cwiseMin(c - r);
    hi = hi.cwiseMax(c + r);
  }
  return Zonotope::box(lo, hi);
}

namespace
{

/// Real monic polynomial coefficients (highest first) with the given roots.
Eigen::VectorXd characteristic_coefficients(const std::vector<std::complex<double>> & roots)
{
  std::vector<std::complex<double>> c{1.0};
  for (const auto & r : roots) {
    std::vector<std::complex<double>> next(c.size() + 1, 0.0);
    for (size_t k = 0; k < c.size(); ++k) {
      next[k] += c[k];
      next[k + 1] -= r * c[k];
    }
    c = std::move(next);
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(c.size()));
  for (size_t k = 0; k < c.size(); ++k) {
    if (std::abs(c[k].imag()) > 1e-9 * std::max(1.0, std::abs(c[k]))) {
      throw Error("requested poles are not closed under conjugation");
    }
    out(static_cast<Eigen::Index>(k)) = c[k].real();
  }
  return out;
}

}  // namespace

std::vector<std::complex<double>> sorted_eigenvalues(const Eigen::MatrixXd & A)
{
  const Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + A.rows());
  std::sort(ev.begin(), ev.end(), [](const auto & a, const auto & b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return ev;
}

double spectral_radius(const Eigen::MatrixXd & A)
{
  const Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

FeedbackGain pole_place(
  const Eigen::MatrixXd & A, const Eigen::MatrixXd & B, const std::vector<std::complex<double>> & poles)
{
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || B.cols() != 1) {
    throw DimensionError("pole placement needs a square A and a single-column B");
  }
  if (static_cast<Eigen::Index>(poles.size()) != n) {
    throw DimensionError("pole placement needs one pole per state");
  }
  for (const auto & p : poles) {
    if (!(std::abs(p) < 1.0)) {
      throw Error("requested discrete poles must lie inside the unit circle");
    }
  }
  const Eigen::VectorXd coeff = characteristic_coefficients(poles);

  Eigen::MatrixXd ctrb(n, n);
  ctrb.col(0) = B;
  for (Eigen::Index k = 1; k < n; ++k) {
    ctrb.col(k) = A * ctrb.col(k - 1);
  }
  // state scaling so every row of the controllability matrix has unit norm
  Eigen::VectorXd scale = ctrb.rowwise().norm();
  if ((scale.array() == 0.0).any()) {
    throw UncontrollableError("a state is untouched by the input");
  }
  const Eigen::MatrixXd As = scale.cwiseInverse().asDiagonal() * A * scale.asDiagonal();
  const Eigen::MatrixXd Cs = scale.cwiseInverse().asDiagonal() * ctrb;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(Cs);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv(n - 1) < 1e-8 * sv(0)) {
    std::ostringstream msg;
    msg << "controllability matrix is rank deficient (singular value ratio " << sv(n - 1) / sv(0) << ")";
    throw UncontrollableError(msg.str());
  }
  // p(A) by Horner
  Eigen::MatrixXd pa = Eigen::MatrixXd::Identity(n, n) * coeff(0);
  for (Eigen::Index k = 1; k <= n; ++k) {
    pa = (As * pa).eval();
    pa.diagonal().array() += coeff(k);
  }
  Eigen::VectorXd en = Eigen::VectorXd::Zero(n);
  en(n - 1) = 1.0;
  const Eigen::VectorXd w = Cs.transpose().fullPivLu().solve(en);
  const Eigen::RowVectorXd k_scaled = -(w.transpose() * pa);

  FeedbackGain gain;
  gain.K = k_scaled * scale.cwiseInverse().asDiagonal();
  const Eigen::EigenSolver<Eigen::MatrixXd> es(A + B * gain.K, false);
  gain.closed_loop_poles = es.eigenvalues();
  return gain;
}

std::vector<Eigen::VectorXd> probe_directions(Eigen::Index n, int random_count)
{
  std::vector<Eigen::VectorXd> probes;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(i) = 1.0;
    probes.push_back(e);
    probes.push_back(-e);
  }
  constexpr std::uint64_t kProbeSeed = 0x5eed0f5e7ULL;
  std::uint64_t counter = 0;
  for (int k = 0; k < random_count; ++k) {
    Eigen::VectorXd v(n);
    do {
      // Box-Muller pairs give an isotropic direction
      for (Eigen::Index i = 0; i < n; ++i) {
        const double u1 = 1.0 - rng::uniform(kProbeSeed, 0, counter++);
        const double u2 = rng::uniform(kProbeSeed, 0, counter++);
        v(i) = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      }
    } while (v.norm() < 1e-6);
    probes.push_back(v.normalized());
  }
  return probes;
}

namespace
{
Eigen::VectorXd probe_supports(const Zonotope & z, const std::vector<Eigen::VectorXd> & probes)
{
  Eigen::VectorXd h(static_cast<Eigen::Index>(probes.size()));
  for (size_t k = 0; k < probes.size(); ++k) {
    h(static_cast<Eigen::Index>(k)) = support(z, probes[k]);
  }
  return h;
}
}  // namespace

Eigen::MatrixXd contractive_basis(const Eigen::MatrixXd & A)
{
  const Eigen::Index n = A.rows();
  const Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  const Eigen::VectorXcd lambda = es.eigenvalues();
  const Eigen::MatrixXcd ev = es.eigenvectors();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);

  // numerically split repeated eigenvalues stay within this distance
  const double cluster_tol = 1e-5 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  std::vector<bool> used(static_cast<size_t>(n), false);
  Eigen::MatrixXd v(n, n);
  Eigen::Index col = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (used[static_cast<size_t>(j)] || lambda(j).imag() < 0.0) {
      continue;
    }
    std::vector<Eigen::Index> members;
    for (Eigen::Index k = j; k < n; ++k) {
      if (!used[static_cast<size_t>(k)] && lambda(k).imag() >= 0.0 &&
          std::abs(lambda(k) - lambda(j)) <= cluster_tol) {
        members.push_back(k);
        used[static_cast<size_t>(k)] = true;
      }
    }
    const auto m = static_cast<Eigen::Index>(members.size());
    const bool complex = lambda(j).imag() > cluster_tol;
    if (m == 1) {
      v.col(col++) = ev.col(j).real();
      if (complex && col < n) {
        // a conjugate pair spans the plane of its real and imaginary parts
        v.col(col++) = ev.col(j).imag();
      }
      continue;
    }
    // repeated eigenvalue: orthonormal basis of its generalized eigenspace,
    // since the near-parallel eigenvectors of a Jordan block are ill-conditioned
    Eigen::MatrixXd factor;
    Eigen::Index dim = m;
    if (complex) {
      const double re = lambda(j).real();
      const double mod2 = std::norm(lambda(j));
      factor = A * A - 2.0 * re * A + mod2 * eye;
      dim = 2 * m;
    } else {
      factor = A - lambda(j).real() * eye;
    }
    Eigen::MatrixXd power = eye;
    for (Eigen::Index k = 0; k < m; ++k) {
      power = power * factor;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> null_svd(power, Eigen::ComputeFullV);
    const Eigen::Index take = std::min(dim, n - col);
    v.middleCols(col, take) = null_svd.matrixV().rightCols(take);
    col += take;
  }

  if (col == n) {
    v.colwise().normalize();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
    const Eigen::VectorXd sv = svd.singularValues();
    if (sv(n - 1) > 1e-10 * sv(0)) {
      return v;
    }
  }
  // fall back to the orthogonal Schur vectors
  const Eigen::RealSchur<Eigen::MatrixXd> schur(A);
  return schur.matrixU();
}

InvariantSetResult invariant_set(
  const Eigen::MatrixXd & a_k, const Zonotope & w, const InvariantSetOptions & options,
  const std::function<void(int, const Zonotope &)> & on_iterate)
{
  if (a_k.rows() != a_k.cols() || a_k.rows() != w.dim()) {
    throw DimensionError("closed-loop matrix does not match the disturbance set");
  }
  const double rho = spectral_radius(a_k);
  if (!(rho < 1.0)) {
    std::ostringstream msg;
    msg << "closed-loop spectral radius " << rho << " is not below 1";
    throw UnstableError(msg.str());
  }
  InvariantSetResult res;
  res.probes = probe_directions(w.dim());
  const Eigen::MatrixXd basis = contractive_basis(a_k);
  Zonotope s = w;
  Zonotope term = w;
  Eigen::VectorXd h = probe_supports(s, res.probes);
  res.support_history.push_back(h);
  if (on_iterate) {
    on_iterate(1, s);
  }
  for (int i = 1; i <= options.max_iterations; ++i) {
    term = linear_map(a_k, term);
    const Zonotope next = reduce(minkowski_sum(s, term), options.max_generators, basis);
    const Eigen::VectorXd h_next = probe_supports(next, res.probes);
    const Eigen::VectorXd growth = h_next - h;
    bool settled = true;
    for (Eigen::Index k = 0; k < growth.size(); ++k) {
      if (growth(k) > options.tol * std::min(1.0, std::abs(h(k)))) {
        settled = false;
        break;
      }
    }
    if (settled) {
      res.set = s;
      res.iterations = i;
      return res;
    }
    s = next;
    h = h_next;
    res.support_history.push_back(h);
    if (on_iterate) {
      on_iterate(i + 1, s);
    }
  }
  std::ostringstream msg;
  msg << "invariant set did not settle within " << options.max_iterations << " iterations";
  throw NotConvergedError(msg.str());
}

double invariance_margin(
  const Eigen::MatrixXd & a_k, const Zonotope & w, const Zonotope & s,
  const std::vector<Eigen::VectorXd> & probes)
{
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto & d : probes) {
    const double hs = support(s, d);
    const Eigen::VectorXd ad = a_k.transpose() * d;
    const double lhs = (ad.squaredNorm() > 0.0 ? support(s, ad) : 0.0) + support(w, d);
    if (hs > 0.0) {
      worst = std::max(worst, lhs / hs - 1.0);
    } else if (lhs > hs) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return worst;
}

}  // namespace apex::sets
