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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "apex/errors.hpp"
#include "apex/sets.hpp"

#include <random>
#include <sstream>

using namespace apex;
using namespace apex::sets;

namespace
{

Eigen::MatrixXd random_matrix(std::mt19937 & rng, Eigen::Index r, Eigen::Index c)
{
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      m(i, j) = normal(rng);
    }
  }
  return m;
}

Zonotope random_zonotope(std::mt19937 & rng, Eigen::Index n, Eigen::Index m)
{
  return {random_matrix(rng, n, 1), random_matrix(rng, n, m)};
}

// sample a point of z with generator weights in [-1, 1]
Eigen::VectorXd sample(std::mt19937 & rng, const Zonotope & z)
{
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::VectorXd t(z.num_generators());
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    // bias toward vertices, where containment is tight
    const double u = unit(rng);
    t(j) = std::abs(u) > 0.5 ? (u > 0 ? 1.0 : -1.0) : 2.0 * u;
  }
  return z.center + z.generators * t;
}

}  // namespace

TEST_CASE("linear map")
{
  std::mt19937 rng(1);
  const Zonotope z = random_zonotope(rng, 3, 5);
  const Zonotope same = linear_map(Eigen::MatrixXd::Identity(3, 3), z);
  CHECK((same.center - z.center).norm() == 0.0);
  CHECK((same.generators - z.generators).norm() == 0.0);
  const Zonotope zero = linear_map(Eigen::MatrixXd::Zero(3, 3), z);
  CHECK(support(zero, Eigen::Vector3d(1, 2, 3)) == 0.0);
  for (int k = 0; k < 100; ++k) {
    const Eigen::MatrixXd M = random_matrix(rng, 2, 3);
    const Eigen::VectorXd d = random_matrix(rng, 2, 1);
    CHECK(support(linear_map(M, z), d) == doctest::Approx(support(z, M.transpose() * d)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(linear_map(Eigen::MatrixXd::Identity(2, 2), z), DimensionError);
}

TEST_CASE("Minkowski sum")
{
  std::mt19937 rng(2);
  const Zonotope a = random_zonotope(rng, 4, 3);
  const Zonotope b = random_zonotope(rng, 4, 6);
  const Zonotope s = minkowski_sum(a, b);
  CHECK(s.num_generators() == 9);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd d = random_matrix(rng, 4, 1);
    CHECK(support(s, d) == doctest::Approx(support(a, d) + support(b, d)).epsilon(1e-12));
  }
  const Zonotope with_zero = minkowski_sum(a, Zonotope::point(Eigen::VectorXd::Zero(4)));
  CHECK((with_zero.generators - a.generators).norm() == 0.0);
  const Zonotope unit = Zonotope::box(-Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones());
  const Zonotope hull = interval_hull(minkowski_sum(unit, unit));
  CHECK(support(hull, Eigen::Vector2d(1, 0)) == 2.0);
  CHECK(support(hull, Eigen::Vector2d(0, -1)) == 2.0);
  CHECK(support(hull, Eigen::Vector2d(1, 1)) == 4.0);
  CHECK_THROWS_AS(minkowski_sum(a, Zonotope::point(Eigen::VectorXd::Zero(2))), DimensionError);
}

TEST_CASE("support function")
{
  const Zonotope unit = Zonotope::box(-Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones());
  CHECK(support(unit, Eigen::Vector2d(1, 0)) == 1.0);
  CHECK_THROWS_AS(support(unit, Eigen::Vector2d::Zero()), Error);
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Zonotope z = random_zonotope(rng, 3, 8);
    const Eigen::VectorXd d = random_matrix(rng, 3, 1);
    double best = -1e300;
    for (int mask = 0; mask < (1 << 8); ++mask) {
      Eigen::VectorXd t(8);
      for (int j = 0; j < 8; ++j) {
        t(j) = (mask >> j) & 1 ? 1.0 : -1.0;
      }
      best = std::max(best, d.dot(z.center + z.generators * t));
    }
    CHECK(support(z, d) == doctest::Approx(best).epsilon(1e-12));
    Zonotope sym = z;
    sym.center.setZero();
    CHECK(support(sym, -d) == doctest::Approx(support(sym, d)));
  }
}

TEST_CASE("generator reduction encloses the original")
{
  std::mt19937 rng(4);
  const Zonotope z = random_zonotope(rng, 3, 40);
  const Zonotope r = reduce(z, 10);
  CHECK(r.num_generators() <= 10);
  for (const auto & d : probe_directions(3)) {
    CHECK(support(r, d) >= support(z, d) - 1e-12);
  }
  CHECK(reduce(z, 40).num_generators() == 40);
}

TEST_CASE("CSV round trip")
{
  std::mt19937 rng(5);
  const Zonotope z = random_zonotope(rng, 3, 4);
  std::stringstream ss;
  write_csv(ss, z);
  const Zonotope back = read_csv(ss);
  CHECK((back.center - z.center).norm() == 0.0);
  CHECK((back.generators - z.generators).norm() == 0.0);
  std::stringstream bad("1,2\n3,x\n");
  CHECK_THROWS_AS(read_csv(bad), Error);
}

TEST_CASE("disturbance set")
{
  const HalfspaceSet xbox = HalfspaceSet::box(Eigen::Vector2d(-1, -2), Eigen::Vector2d(1, 2));
  SUBCASE("one vertex has no disturbance")
  {
    Eigen::Matrix2d a;
    a << 1, 0.1, 0, 0.9;
    const auto model = UncertainModel::from_vertices({a}, {Eigen::Vector2d(0, 0.1)});
    const Zonotope w = disturbance_set(model, xbox, {-1.0, 1.0});
    CHECK(w.num_generators() == 0);
    CHECK(w.center.norm() == 0.0);
  }
  SUBCASE("symmetric vertices")
  {
    Eigen::Matrix2d a;
    a << 1, 0.1, 0, 0.9;
    Eigen::Matrix2d da;
    da << 0, 0.02, 0.01, -0.05;
    const auto model = UncertainModel::from_vertices(
      {a + da, a - da}, {Eigen::Vector2d(0, 0.12), Eigen::Vector2d(0, 0.08)});
    const Zonotope w = disturbance_set(model, xbox, {-1.0, 1.0});
    for (const auto & d : probe_directions(2)) {
      CHECK(support(w, d) == doctest::Approx(support(w, -d)));
    }
  }
  SUBCASE("contains sampled disturbances")
  {
    std::mt19937 rng(6);
    std::vector<Eigen::MatrixXd> as;
    std::vector<Eigen::MatrixXd> bs;
    for (int j = 0; j < 4; ++j) {
      as.push_back(Eigen::Matrix2d::Identity() + 0.1 * random_matrix(rng, 2, 2));
      bs.push_back(random_matrix(rng, 2, 1));
    }
    const auto model = UncertainModel::from_vertices(as, bs);
    const HalfspaceSet shifted = HalfspaceSet::box(Eigen::Vector2d(0, -1), Eigen::Vector2d(3, 2));
    const Zonotope w = disturbance_set(model, shifted, {-0.5, 1.5});
    const auto [lo, hi] = shifted.box_bounds();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int outside = 0;
    for (int k = 0; k < 100000; ++k) {
      Eigen::Vector4d theta(unit(rng), unit(rng), unit(rng), unit(rng));
      theta /= theta.sum();
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 1);
      for (int j = 0; j < 4; ++j) {
        a += theta(j) * as[static_cast<size_t>(j)];
        b += theta(j) * bs[static_cast<size_t>(j)];
      }
      const Eigen::Vector2d x(lo(0) + (hi(0) - lo(0)) * unit(rng), lo(1) + (hi(1) - lo(1)) * unit(rng));
      const double u = -0.5 + 2.0 * unit(rng);
      const Eigen::VectorXd dist = (a - model.A_mean) * x + (b - model.B_mean) * u;
      const Zonotope hull = interval_hull(w);
      for (const auto & d : probe_directions(2, 0)) {
        if (d.dot(dist) > support(hull, d) + 1e-12) {
          ++outside;
        }
      }
    }
    CHECK(outside == 0);
  }
  SUBCASE("unbounded box")
  {
    HalfspaceSet half;
    half.C = Eigen::RowVector2d(1, 0);
    half.d = Eigen::VectorXd::Ones(1);
    const auto model = UncertainModel::from_vertices({Eigen::Matrix2d::Identity()}, {Eigen::Vector2d(0, 1)});
    CHECK_THROWS_AS(disturbance_set(model, half, {-1.0, 1.0}), Error);
  }
}

TEST_CASE("pole placement")
{
  SUBCASE("double integrator by hand")
  {
    Eigen::Matrix2d a;
    a << 1, 1, 0, 1;
    const Eigen::Vector2d b(0.5, 1.0);
    const auto gain = pole_place(a, b, {0.5, 0.5});
    // trace(A + bK) = 2 + k1/2 + k2 = 1 and det = 1 + k2 - k1/2 = 0.25
    CHECK(gain.K(0) == doctest::Approx(-0.25));
    CHECK(gain.K(1) == doctest::Approx(-0.875));
  }
  SUBCASE("random systems hit the requested poles")
  {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::MatrixXd a = 0.5 * random_matrix(rng, 6, 6);
      const Eigen::MatrixXd b = random_matrix(rng, 6, 1);
      const std::vector<std::complex<double>> poles{
        {0.3, 0.2}, {0.3, -0.2}, {-0.4, 0.0}, {0.1, 0.0}, {0.6, 0.0}, {-0.2, 0.5}};
      std::vector<std::complex<double>> request = poles;
      request.back() = {-0.2, -0.5};
      request[4] = {-0.2, 0.5};
      const auto gain = pole_place(a, b, request);
      const auto got = sorted_eigenvalues(a + b * gain.K);
      std::vector<std::complex<double>> want = request;
      std::sort(want.begin(), want.end(), [](const auto & x, const auto & y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
      });
      for (size_t i = 0; i < want.size(); ++i) {
        CHECK(std::abs(got[i] - want[i]) < 1e-6);
      }
    }
  }
  SUBCASE("open-loop poles need no feedback")
  {
    Eigen::Matrix3d a;
    a << 0.5, 0.1, 0.0, 0.0, 0.7, 0.2, 0.0, 0.0, 0.3;
    const Eigen::Vector3d b(0.0, 0.5, 1.0);
    const auto gain = pole_place(a, b, sorted_eigenvalues(a));
    CHECK(gain.K.norm() < 1e-10);
  }
  SUBCASE("errors")
  {
    Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
    CHECK_THROWS_AS(pole_place(a, Eigen::Vector2d(1, 0), {0.5, 0.4}), UncontrollableError);
    Eigen::Matrix2d di;
    di << 1, 1, 0, 1;
    CHECK_THROWS_AS(pole_place(di, Eigen::Vector2d(0.5, 1), {0.5, 1.2}), Error);
    CHECK_THROWS_AS(pole_place(di, Eigen::Vector2d(0.5, 1), {{0.5, 0.1}, {0.5, 0.2}}), Error);
    CHECK_THROWS_AS(pole_place(di, Eigen::Vector2d(0.5, 1), {0.5}), DimensionError);
  }
}

TEST_CASE("invariant set")
{
  SUBCASE("nilpotent closed loop stops at W")
  {
    const Zonotope w = Zonotope::box(-Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones());
    const auto res = invariant_set(Eigen::Matrix2d::Zero(), w);
    CHECK(res.iterations == 1);
    CHECK(support(res.set, Eigen::Vector2d(1, 0)) == 1.0);
  }
  SUBCASE("scalar geometric series")
  {
    const Zonotope w = Zonotope::box(-Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1));
    const auto res = invariant_set(Eigen::MatrixXd::Constant(1, 1, 0.5), w);
    CHECK(support(res.set, Eigen::VectorXd::Ones(1)) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(support(res.set, -Eigen::VectorXd::Ones(1)) == doctest::Approx(2.0).epsilon(1e-6));
  }
  SUBCASE("monotone supports, certificate and iterate callback")
  {
    std::mt19937 rng(8);
    Eigen::MatrixXd a = random_matrix(rng, 4, 4);
    a *= 0.6 / spectral_radius(a);
    Zonotope w = random_zonotope(rng, 4, 3);
    w.center.setZero();  // disturbance sets contain the origin
    int calls = 0;
    const auto res = invariant_set(a, w, {}, [&](int, const Zonotope &) { ++calls; });
    CHECK(calls == res.iterations);
    for (size_t i = 1; i < res.support_history.size(); ++i) {
      CHECK(((res.support_history[i] - res.support_history[i - 1]).array() >= -1e-12).all());
    }
    CHECK(res.set.num_generators() <= 200);
    CHECK(invariance_margin(a, w, res.set, res.probes) <= 1e-5);
  }
  SUBCASE("compressed iterates still enclose the exact sum")
  {
    std::mt19937 rng(10);
    Eigen::MatrixXd a = random_matrix(rng, 4, 4);
    a *= 0.9 / spectral_radius(a);
    Zonotope w = random_zonotope(rng, 4, 3);
    w.center.setZero();
    InvariantSetOptions loose;
    loose.max_generators = 100000;
    const auto exact = invariant_set(a, w, loose);
    const auto packed = invariant_set(a, w);
    CHECK(packed.set.num_generators() <= 200);
    CHECK(exact.set.num_generators() > 200);
    for (const auto & d : packed.probes) {
      CHECK(support(packed.set, d) >= support(exact.set, d) - 1e-9);
    }
  }
  SUBCASE("errors")
  {
    const Zonotope w = Zonotope::box(-Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1));
    CHECK_THROWS_AS(invariant_set(Eigen::MatrixXd::Constant(1, 1, 1.0), w), UnstableError);
    InvariantSetOptions few;
    few.max_iterations = 3;
    CHECK_THROWS_AS(invariant_set(Eigen::MatrixXd::Constant(1, 1, 0.9), w, few), NotConvergedError);
  }
}

TEST_CASE("probe directions are fixed unit vectors")
{
  const auto p1 = probe_directions(6);
  const auto p2 = probe_directions(6);
  REQUIRE(p1.size() == 12 + 64);
  for (size_t k = 0; k < p1.size(); ++k) {
    CHECK(p1[k].norm() == doctest::Approx(1.0));
    CHECK((p1[k] - p2[k]).norm() == 0.0);
  }
}

TEST_CASE("tightening")
{
  const HalfspaceSet big = HalfspaceSet::box(-2.0 * Eigen::Vector2d::Ones(), 2.0 * Eigen::Vector2d::Ones());
  const Zonotope unit = Zonotope::box(-Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones());
  const auto t = tighten(big, unit);
  const auto [lo, hi] = t.box_bounds();
  CHECK((lo + Eigen::Vector2d::Ones()).norm() == 0.0);
  CHECK((hi - Eigen::Vector2d::Ones()).norm() == 0.0);
  const auto same = tighten(big, Zonotope::point(Eigen::Vector2d::Zero()));
  CHECK((same.d - big.d).norm() == 0.0);
  CHECK_THROWS_AS(tighten(HalfspaceSet::box(-0.5 * Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones()), unit),
                  EmptySetError);

  std::mt19937 rng(9);
  HalfspaceSet poly;
  poly.C = random_matrix(rng, 8, 3);
  poly.d = Eigen::VectorXd::Constant(8, 5.0);
  const Zonotope s = random_zonotope(rng, 3, 5);
  Zonotope small = s;
  small.center *= 0.1;
  small.generators *= 0.1;
  const auto tight = tighten(poly, small);
  std::uniform_real_distribution<double> box(-5.0, 5.0);
  int tested = 0;
  int violations = 0;
  while (tested < 100000) {
    const Eigen::Vector3d z(box(rng), box(rng), box(rng));
    if (!tight.contains(z)) {
      continue;
    }
    ++tested;
    if (!poly.contains(z + sample(rng, small), 1e-12)) {
      ++violations;
    }
  }
  CHECK(violations == 0);
}
