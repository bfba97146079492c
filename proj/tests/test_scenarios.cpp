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
#include "apex/scenarios.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace apex;
using namespace apex::scenarios;

namespace
{

std::string csv_of(const SimTrace & t)
{
  std::ostringstream out;
  t.write_csv(out);
  return out.str();
}

double max_offset(const SimTrace & t, double y0)
{
  double m = 0.0;
  for (const auto & r : t.records) {
    m = std::max(m, std::abs(r.y - y0));
  }
  return m;
}

// footprint sampled on a grid that includes points just inside every edge
std::optional<double> dense_oracle(
  const SimTrace & trace, const std::vector<mpc::ObstacleBox> & boxes, double y_lo, double y_hi,
  double hw)
{
  const int m = 40;
  for (const auto & r : trace.records) {
    for (int i = 0; i <= m; ++i) {
      for (int j = 0; j <= m; ++j) {
        const double inner = hw - 1e-9;
        const double px = r.x - inner + 2.0 * inner * i / m;
        const double py = r.y - inner + 2.0 * inner * j / m;
        if (py < y_lo || py > y_hi) {
          return r.t;
        }
        for (const auto & o : boxes) {
          if (px > o.x_min_at(r.t) && px < o.x_max_at(r.t) && py > o.y_min && py < o.y_max) {
            return r.t;
          }
        }
      }
    }
  }
  return std::nullopt;
}

SimTrace straight_trace(double x0, double vx, double y0, double vy, int n, double dt)
{
  SimTrace t;
  for (int k = 0; k < n; ++k) {
    TraceRecord r;
    r.t = k * dt;
    r.x = x0 + vx * r.t;
    r.y = y0 + vy * r.t;
    t.records.push_back(r);
  }
  return t;
}

}  // namespace

TEST_CASE("equilibrium hold")
{
  for (const auto plant :
       {PlantFidelity::LinearIdeal, PlantFidelity::NonlinearIdeal, PlantFidelity::NonlinearWithActuator}) {
    for (const auto kind : {ControllerKind::NominalMpc, ControllerKind::TubeMpc}) {
      Scenario sc;
      sc.plant = plant;
      sc.controller = kind;
      sc.initial_y = 6.0;
      sc.y_ref = 6.0;
      sc.duration = 10.0;
      const SimTrace t = run_closed_loop(sc);
      CAPTURE(to_string(plant));
      CAPTURE(to_string(kind));
      CHECK(max_offset(t, 6.0) < 0.01);
      CHECK(t.infeasible_steps == 0);
      CHECK_FALSE(t.diverged);
      CHECK_FALSE(collision_check(t, sc));
    }
  }
}

TEST_CASE("trace layout")
{
  Scenario sc = overtake_scenario();
  sc.duration = 2.0;
  const SimTrace t = run_closed_loop(sc);
  REQUIRE(t.records.size() == 2001);
  CHECK(t.control_steps == 40);
  CHECK(t.solve_times.size() == 40);
  for (size_t k = 1; k < t.records.size(); ++k) {
    CHECK(t.records[k].t == doctest::Approx(k * 0.001).epsilon(1e-12));
    CHECK(t.records[k].t > t.records[k - 1].t);
  }
  // zero-order hold: the command changes only at control instants
  for (size_t k = 1; k < t.records.size(); ++k) {
    if (k % 50 != 0) {
      CHECK(t.records[k].steer_command == t.records[k - 1].steer_command);
    }
  }
  const std::string text = csv_of(t);
  CHECK(text.rfind("t,X,Y,yaw,yaw_rate,sideslip,steer_command,steer_actual,feasible,slip_front,slip_rear\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2002);
  CHECK(text.find('\r') == std::string::npos);
}

TEST_CASE("collision check")
{
  const std::vector<mpc::ObstacleBox> none;
  const SimTrace inside = straight_trace(0.0, 80.0, 6.0, 0.0, 500, 0.001);
  CHECK_FALSE(collision_check(inside, none, 0.0, 12.0, 1.0));

  // straight through the centre of a box at X in [20, 25]
  const std::vector<mpc::ObstacleBox> box{{20.0, 25.0, 3.0, 9.0, 0.0}};
  const auto hit = collision_check(inside, box, 0.0, 12.0, 1.0);
  REQUIRE(hit);
  // front edge of the footprint passes X = 20 just after t = 19 / 80
  CHECK(*hit == doctest::Approx(0.238));
  CHECK(*hit > 19.0 / 80.0);

  const SimTrace drifting = straight_trace(0.0, 80.0, 6.0, 10.0, 1000, 0.001);
  const auto exit = collision_check(drifting, none, 0.0, 12.0, 1.0);
  REQUIRE(exit);
  CHECK(*exit == doctest::Approx(0.501));

  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int hits = 0;
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<mpc::ObstacleBox> boxes;
    for (int b = 0; b < 2; ++b) {
      mpc::ObstacleBox o;
      o.x_min = 5.0 + 40.0 * u(rng);
      o.x_max = o.x_min + 1.0 + 5.0 * u(rng);
      o.y_min = 12.0 * u(rng);
      o.y_max = std::min(12.0, o.y_min + 1.0 + 4.0 * u(rng));
      o.speed = trial % 3 == 0 ? 30.0 * u(rng) : 0.0;
      boxes.push_back(o);
    }
    const SimTrace t = straight_trace(0.0, 60.0 + 20.0 * u(rng), 2.0 + 8.0 * u(rng), 8.0 * (u(rng) - 0.5), 800, 0.001);
    const auto fast = collision_check(t, boxes, 0.0, 12.0, 1.0);
    const auto slow = dense_oracle(t, boxes, 0.0, 12.0, 1.0);
    CAPTURE(trial);
    REQUIRE(fast.has_value() == slow.has_value());
    if (fast) {
      ++hits;
      CHECK(*slow == *fast);
    }
  }
  CHECK(hits > 5);
}

TEST_CASE("determinism")
{
  Scenario sc = overtake_scenario();
  sc.duration = 3.0;
  CHECK(csv_of(run_closed_loop(sc)) == csv_of(run_closed_loop(sc)));

  Scenario mc = monte_carlo_scenario();
  mc.seed = 4;
  mc.run_index = 2;
  const SimTrace a = run_closed_loop(mc);
  const SimTrace b = run_closed_loop(mc);
  CHECK(csv_of(a) == csv_of(b));
  CHECK(a.realization.tau == actuation::sample_realization(4, 2, mc.actuator).tau);
}

TEST_CASE("scenario validation")
{
  Scenario sc;
  CHECK_NOTHROW(sc.validate());
  CHECK(sc.horizon() == 30);
  CHECK(sc.substeps() == 50);
  sc.plant_dt = 0.0007;
  CHECK_THROWS_AS(sc.validate(), Error);
  sc = Scenario{};
  sc.u0 = -1.0;
  CHECK_THROWS_AS(sc.validate(), Error);
  sc = Scenario{};
  sc.track_y_max = 1.5;
  CHECK_THROWS_AS(sc.validate(), Error);
  sc = Scenario{};
  sc.obstacles.push_back({10.0, 5.0, 0.0, 1.0, 0.0});
  CHECK_THROWS_AS(sc.validate(), Error);
  // above the critical speed the lateral modes grow and long periods overflow
  sc = Scenario{};
  sc.u0 = 120.0;
  sc.control_frequency = 0.01;
  sc.duration = 100.0;
  sc.plant_dt = 0.01;
  CHECK_THROWS_AS(sc.validate(), ConditioningError);
}

TEST_CASE("full blockage is flagged infeasible")
{
  Scenario sc = obstacle_scenario(60.0, 1.0);
  sc.obstacles[0].y_max = 12.0;
  const SimTrace t = run_closed_loop(sc);
  CHECK(t.infeasible_steps > 0);
  const RunOutcome o = evaluate(t, sc);
  CHECK_FALSE(o.passed());
  CHECK(o.collision_time.has_value());
}

TEST_CASE("discretization floor")
{
  const auto params = dynamics::VehicleParams::reference();
  const DiscretizationFloor f = discretization_floor(params, 80.56);
  CHECK(f.max_period > 0.0);
  CHECK(f.min_frequency == doctest::Approx(1.0 / f.max_period));
  const auto lin = dynamics::linearize(params, 80.56);
  CHECK_NOTHROW(dynamics::discretize_zoh(lin, f.max_period));
  CHECK_THROWS_AS(dynamics::discretize_zoh(lin, f.max_period + 0.01), ConditioningError);
  CHECK_THROWS_AS(discretization_floor(params, 80.56, 0.01, 100.0), StudyError);
  // beyond the critical speed the floor drops sharply
  CHECK(discretization_floor(params, 120.0).max_period < f.max_period);
}

TEST_CASE("frequency sweep")
{
  Scenario benign = overtake_scenario();
  benign.disturbance.force = 0.0;
  benign.preview_time = 0.5;
  const FrequencySweep one = min_update_frequency(benign, {100.0});
  CHECK(one.threshold == std::optional<double>(100.0));
  REQUIRE(one.table.size() == 1);
  CHECK(one.table[0].outcome.passed());
  CHECK(one.monotone);

  CHECK_THROWS_AS(min_update_frequency(benign, {}), Error);
  CHECK_THROWS_AS(min_update_frequency(benign, {50.0, 10.0}), Error);
  CHECK_THROWS_AS(min_update_frequency(overtake_scenario(), {2.0}), StudyError);
}

TEST_CASE("perception distance is speed times preview")
{
  Scenario sc = obstacle_scenario(40.0, 3.0);
  const PerceptionResult r = min_perception_distance(sc, 3.0);
  CHECK(r.preview_time == r.horizon / sc.control_frequency);
  CHECK(r.distance == sc.u0 * r.preview_time);
  CHECK(r.horizon >= 1);
  // one period shorter fails, the reported horizon passes
  Scenario at = sc;
  at.preview_time = r.preview_time;
  CHECK(evaluate(run_closed_loop(at), at).passed());
  if (r.horizon > 1) {
    Scenario below = sc;
    below.preview_time = (r.horizon - 1) / sc.control_frequency;
    CHECK_FALSE(evaluate(run_closed_loop(below), below).passed());
  }
  CHECK_THROWS_AS(min_perception_distance(sc, 0.01), StudyError);
  CHECK_THROWS_AS(min_perception_distance(-1.0, ControllerKind::NominalMpc), Error);
}

TEST_CASE("Monte Carlo bookkeeping")
{
  Scenario sc = monte_carlo_scenario();
  const auto design = design_for(sc);

  SUBCASE("single frozen run matches the closed loop")
  {
    Scenario frozen = sc;
    frozen.realization = actuation::ActuatorRealization{0.15, 0.05};
    const MonteCarloReport rep = monte_carlo(frozen, 1, 9, 1, design);
    Scenario single = frozen;
    single.plant = PlantFidelity::NonlinearWithActuator;
    const SimTrace t = run_closed_loop(single, design);
    const RunOutcome o = evaluate(t, single);
    REQUIRE(rep.per_run.size() == 1);
    CHECK(rep.per_run[0].outcome.collision_time == o.collision_time);
    CHECK(rep.per_run[0].outcome.infeasible_steps == o.infeasible_steps);
    CHECK(rep.collisions == (o.passed() ? 0 : 1));
    CHECK((rep.collision_probability == 0.0 || rep.collision_probability == 1.0));
    CHECK(envelope_contains(rep, t));
  }

  SUBCASE("parallel and serial reports agree")
  {
    const MonteCarloReport serial = monte_carlo(sc, 6, 77, 1, design);
    const MonteCarloReport parallel = monte_carlo(sc, 6, 77, 3, design);
    std::ostringstream a;
    std::ostringstream b;
    serial.write_summary_csv(a);
    serial.write_runs_csv(a);
    serial.write_envelope_csv(a);
    parallel.write_summary_csv(b);
    parallel.write_runs_csv(b);
    parallel.write_envelope_csv(b);
    CHECK(a.str() == b.str());
    CHECK(serial.collision_probability == static_cast<double>(serial.collisions) / serial.runs);

    // every run lies inside the envelope and carries its own realization
    for (int i = 0; i < 6; ++i) {
      Scenario run = sc;
      run.plant = PlantFidelity::NonlinearWithActuator;
      run.seed = 77;
      run.run_index = static_cast<std::uint64_t>(i);
      const SimTrace t = run_closed_loop(run, design);
      CHECK(envelope_contains(serial, t));
      CHECK(serial.per_run[static_cast<size_t>(i)].realization.tau == t.realization.tau);
    }
    const auto rng_tau = actuation::sample_realization(77, 3, sc.actuator).tau;
    CHECK(serial.per_run[3].realization.tau == rng_tau);
    CHECK(rng_tau >= sc.tube.actuator.tau_min);
    CHECK(rng_tau <= sc.tube.actuator.tau_max);
  }

  SUBCASE("tube never collides more often than the nominal controller")
  {
    const MonteCarloReport tube_rep = monte_carlo(sc, 6, 2026, 0, design);
    Scenario nominal = sc;
    nominal.controller = ControllerKind::NominalMpc;
    const MonteCarloReport nom_rep = monte_carlo(nominal, 6, 2026, 0);
    CHECK(tube_rep.collisions <= nom_rep.collisions);
    CHECK(tube_rep.collisions == 0);
    CHECK(tightened_clearance(tube_rep, sc, *design) > 0.0);
  }

  CHECK_THROWS_AS(monte_carlo(sc, 0, 1), Error);
}
