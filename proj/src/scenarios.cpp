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

#include "apex/scenarios.hpp"

#include "apex/csv.hpp"
#include "apex/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <string>
#include <thread>

namespace apex::scenarios
{

namespace
{

// Slack on whole-number ratios of time steps.
constexpr double kRatioTol = 1e-9;

Eigen::VectorXd measured_linear(const dynamics::VehicleState & s)
{
  Eigen::VectorXd x(4);
  x << s.yaw, s.yaw_rate, s.sideslip(), s.y;
  return x;
}

}  // namespace

const char * to_string(ControllerKind kind)
{
  return kind == ControllerKind::TubeMpc ? "tube" : "nominal";
}

const char * to_string(PlantFidelity plant)
{
  switch (plant) {
    case PlantFidelity::LinearIdeal:
      return "linear";
    case PlantFidelity::NonlinearIdeal:
      return "nonlinear";
    case PlantFidelity::NonlinearWithActuator:
      return "actuator";
  }
  return "unknown";
}

int Scenario::horizon() const
{
  return std::max(1, static_cast<int>(std::lround(preview_time * control_frequency)));
}

int Scenario::substeps() const
{
  const double ratio = control_period() / plant_dt;
  const double whole = std::round(ratio);
  if (whole < 1.0 || std::abs(ratio - whole) > kRatioTol * ratio) {
    throw Error("plant step must divide the control period");
  }
  return static_cast<int>(whole);
}

actuation::ActuatorRealization Scenario::actuator_realization() const
{
  return realization ? *realization : actuation::sample_realization(seed, run_index, actuator);
}

mpc::MpcWeights Scenario::weights(Eigen::Index state_dim) const
{
  return mpc::MpcWeights::lifted(output_weight, control_weight, terminal_scale, state_dim);
}

void Scenario::validate() const
{
  vehicle.validate();
  if (!(u0 > 0.0)) {
    throw Error("speed must be positive");
  }
  if (!(track_y_max - track_y_min > vehicle.width)) {
    throw Error("track must be wider than the vehicle");
  }
  if (!(control_frequency > 0.0) || !(preview_time > 0.0) || !(duration > 0.0) ||
      !(plant_dt > 0.0)) {
    throw Error("frequency, preview, duration and plant step must be positive");
  }
  if (!(disturbance.duration >= 0.0) || !std::isfinite(disturbance.force)) {
    throw Error("disturbance needs a finite force and nonnegative duration");
  }
  for (const auto & o : obstacles) {
    if (!(o.x_max > o.x_min) || !(o.y_max > o.y_min)) {
      throw Error("obstacle boxes need positive extents");
    }
  }
  substeps();
  actuator.validate();
  if (realization && !(realization->tau >= plant_dt && realization->delay >= 0.0)) {
    throw Error("actuator realization out of range");
  }
  // surfaces a control period beyond the discretization floor
  dynamics::discretize_zoh(dynamics::linearize(vehicle, u0), control_period());
}

const char * SimTrace::csv_header()
{
  return "t,X,Y,yaw,yaw_rate,sideslip,steer_command,steer_actual,feasible,slip_front,slip_rear";
}

void SimTrace::write_csv(std::ostream & out) const
{
  out << csv_header() << '\n';
  for (const auto & r : records) {
    out << csv::number(r.t) << ',' << csv::number(r.x) << ',' << csv::number(r.y) << ','
        << csv::number(r.yaw) << ',' << csv::number(r.yaw_rate) << ',' << csv::number(r.sideslip)
        << ',' << csv::number(r.steer_command) << ',' << csv::number(r.steer_actual) << ','
        << (r.feasible ? 1 : 0) << ',' << csv::number(r.slip_front) << ','
        << csv::number(r.slip_rear) << '\n';
  }
}

std::shared_ptr<const tube::TubeDesign> design_for(const Scenario & scenario)
{
  return std::make_shared<const tube::TubeDesign>(tube::design_tube(
    scenario.vehicle, scenario.u0, scenario.control_period(), scenario.corridor_min(),
    scenario.corridor_max(), scenario.tube));
}

SimTrace run_closed_loop(const Scenario & sc, std::shared_ptr<const tube::TubeDesign> design)
{
  sc.validate();
  const auto & veh = sc.vehicle;
  const double period = sc.control_period();
  const int substeps = sc.substeps();
  const int horizon = sc.horizon();
  const auto steps = static_cast<long>(std::llround(sc.duration / sc.plant_dt));
  const dynamics::LinearModel lin = dynamics::linearize(veh, sc.u0);

  SimTrace trace;
  trace.records.reserve(static_cast<size_t>(steps) + 1);

  std::optional<mpc::VehicleMpc> nominal;
  std::optional<tube::TubeController> tube_ctrl;
  if (sc.controller == ControllerKind::NominalMpc) {
    nominal.emplace(dynamics::discretize_zoh(lin, period), veh, horizon, sc.weights(4));
  } else {
    if (!design) {
      design = design_for(sc);
    }
    tube_ctrl.emplace(design, horizon, sc.weights(tube::aug::kDim));
  }

  // linear plant: exact hold over one plant step, inputs [steer, force]
  Eigen::MatrixXd lin_ad;
  Eigen::MatrixXd lin_bd;
  if (sc.plant == PlantFidelity::LinearIdeal) {
    Eigen::MatrixXd b(4, 2);
    b.col(0) = lin.B;
    b.col(1) = dynamics::lateral_force_input(veh, sc.u0);
    std::tie(lin_ad, lin_bd) = dynamics::zoh(lin.A, b, sc.plant_dt);
  }
  Eigen::VectorXd lin_x = Eigen::VectorXd::Zero(4);
  lin_x(dynamics::idx::kY) = sc.initial_y;

  std::optional<actuation::Actuator> actuator;
  if (sc.plant == PlantFidelity::NonlinearWithActuator) {
    trace.realization = sc.actuator_realization();
    actuator.emplace(trace.realization, sc.plant_dt, veh.max_steer);
  }

  dynamics::VehicleState s;
  s.u = sc.u0;
  s.y = sc.initial_y;

  // actuator states the plant does not expose come from the mean actuator
  // model driven by the commands
  const double mean_delay = 0.5 * (sc.tube.actuator.delay_min + sc.tube.actuator.delay_max);
  const double mean_tau = 0.5 * (sc.tube.actuator.tau_min + sc.tube.actuator.tau_max);
  const double delay_gain = mean_delay > 0.0 ? 1.0 - std::exp(-sc.plant_dt / mean_delay) : 1.0;
  const double lag_gain = 1.0 - std::exp(-sc.plant_dt / mean_tau);
  double x_delay = 0.0;
  double x_steer = 0.0;

  auto plant_state = [&]() {
    if (sc.plant != PlantFidelity::LinearIdeal) {
      return s;
    }
    dynamics::VehicleState v;
    v.u = sc.u0;
    v.v = sc.u0 * std::tan(lin_x(dynamics::idx::kSideslip));
    v.yaw = lin_x(dynamics::idx::kYaw);
    v.yaw_rate = lin_x(dynamics::idx::kYawRate);
    v.x = s.x;
    v.y = lin_x(dynamics::idx::kY);
    return v;
  };
  auto augmented = [&](const dynamics::VehicleState & v) {
    Eigen::VectorXd x(tube::aug::kDim);
    x << measured_linear(v), x_steer, x_delay;
    return x;
  };

  if (tube_ctrl) {
    tube_ctrl->reset(augmented(plant_state()));
  }
  const std::vector<Eigen::Vector2d> y_ref(
    static_cast<size_t>(horizon), Eigen::Vector2d(sc.y_ref, 0.0));
  const mpc::CorridorConstraints open_road = mpc::CorridorConstraints::uniform(
    horizon, sc.corridor_min(), sc.corridor_max(), veh.max_slip, veh.max_steer);

  double command = 0.0;
  bool feasible = true;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * sc.plant_dt;
    const dynamics::VehicleState now = plant_state();
    if (k < steps && k % substeps == 0) {
      mpc::CorridorQuery query;
      query.x_now = now.x;
      query.t_now = t;
      query.u0 = sc.u0;
      query.dt = period;
      query.horizon = horizon;
      query.half_width = sc.half_width();
      query.max_slip = veh.max_slip;
      query.max_steer = veh.max_steer;
      bool blocked = false;
      mpc::CorridorConstraints corridor;
      try {
        corridor = mpc::obstacle_to_corridor(
          sc.corridor_min(), sc.corridor_max(), sc.obstacles, query);
      } catch (const FullBlockageError &) {
        blocked = true;
        corridor = open_road;
      }
      if (nominal) {
        const mpc::MpcSolution sol = nominal->solve(measured_linear(now), y_ref, corridor);
        feasible = sol.feasible;
        if (feasible) {
          command = sol.steering.front();
        }
        trace.solve_times.push_back(sol.solve_time);
      } else {
        const tube::TubeStep ts = tube_ctrl->step(augmented(now), y_ref, corridor);
        feasible = ts.feasible;
        command = ts.command;
        trace.solve_times.push_back(ts.central.solve_time);
      }
      command = std::clamp(command, -veh.max_steer, veh.max_steer);
      feasible = feasible && !blocked;
      ++trace.control_steps;
      if (!feasible) {
        ++trace.infeasible_steps;
      }
    }

    double actual = command;
    if (k < steps) {
      actual = actuator ? actuator->step(command) : command;
    }
    const dynamics::SlipAngles slip = dynamics::slip_angles(veh, now, actual);
    TraceRecord rec;
    rec.t = t;
    rec.x = now.x;
    rec.y = now.y;
    rec.yaw = now.yaw;
    rec.yaw_rate = now.yaw_rate;
    rec.sideslip = now.sideslip();
    rec.steer_command = command;
    rec.steer_actual = actual;
    rec.feasible = feasible;
    rec.slip_front = slip.front;
    rec.slip_rear = slip.rear;
    trace.records.push_back(rec);
    if (k >= steps) {
      break;
    }

    const double force = sc.disturbance.at(t);
    if (sc.plant == PlantFidelity::LinearIdeal) {
      lin_x = lin_ad * lin_x + lin_bd * Eigen::Vector2d(actual, force);
      s.x += sc.u0 * sc.plant_dt;
      if (!lin_x.allFinite()) {
        trace.diverged = true;
        break;
      }
    } else {
      s = dynamics::integrate_step(veh, s, actual, force, sc.plant_dt, sc.u0);
      if (!s.finite() || !(s.u > 0.0)) {
        trace.diverged = true;
        break;
      }
    }
    x_delay += delay_gain * (command - x_delay);
    // the steer-by-wire plant reports its roadwheel angle
    x_steer = actuator ? actual : x_steer + lag_gain * (x_delay - x_steer);
  }
  return trace;
}

std::optional<double> collision_check(
  const SimTrace & trace, const std::vector<mpc::ObstacleBox> & obstacles, double track_y_min,
  double track_y_max, double half_width)
{
  for (const auto & r : trace.records) {
    if (r.y - half_width < track_y_min || r.y + half_width > track_y_max) {
      return r.t;
    }
    for (const auto & o : obstacles) {
      const bool x_overlap = r.x + half_width > o.x_min_at(r.t) && r.x - half_width < o.x_max_at(r.t);
      const bool y_overlap = r.y + half_width > o.y_min && r.y - half_width < o.y_max;
      if (x_overlap && y_overlap) {
        return r.t;
      }
    }
  }
  return std::nullopt;
}

std::optional<double> collision_check(const SimTrace & trace, const Scenario & scenario)
{
  return collision_check(
    trace, scenario.obstacles, scenario.track_y_min, scenario.track_y_max, scenario.half_width());
}

RunOutcome evaluate(const SimTrace & trace, const Scenario & scenario)
{
  RunOutcome out;
  out.collision_time = collision_check(trace, scenario);
  out.diverged = trace.diverged;
  out.infeasible_steps = trace.infeasible_steps;
  return out;
}

Scenario overtake_scenario()
{
  Scenario sc;
  sc.u0 = 80.56;
  sc.initial_y = 3.0;
  sc.y_ref = 9.0;
  // slow car as a moving block over the inside lane, just ahead
  mpc::ObstacleBox slow;
  slow.x_min = 15.0;
  slow.x_max = 20.0;
  slow.y_min = 0.0;
  slow.y_max = 6.0;
  slow.speed = 55.0;
  sc.obstacles.push_back(slow);
  sc.disturbance = {-500.0, 1.0, 0.5};
  sc.preview_time = 1.5;
  sc.plant = PlantFidelity::LinearIdeal;
  sc.duration = 5.0;
  return sc;
}

Scenario obstacle_scenario(double u0, double lead)
{
  Scenario sc;
  sc.u0 = u0;
  sc.initial_y = 3.0;
  sc.y_ref = 3.0;
  mpc::ObstacleBox box;
  box.x_min = u0 * lead;
  box.x_max = box.x_min + 5.0;
  box.y_min = 0.0;
  box.y_max = 6.0;
  sc.obstacles.push_back(box);
  sc.plant = PlantFidelity::LinearIdeal;
  sc.duration = lead + 1.0;
  return sc;
}

Scenario monte_carlo_scenario()
{
  const double preview = 2.0;
  Scenario sc = obstacle_scenario(80.56, preview + 0.5);
  sc.preview_time = preview;
  sc.duration += 1.0;
  sc.control_weight = 200.0;
  sc.controller = ControllerKind::TubeMpc;
  sc.plant = PlantFidelity::NonlinearWithActuator;
  const auto & r = sc.tube.actuator;
  sc.actuator.tau_min = r.tau_min;
  sc.actuator.tau_max = r.tau_max;
  sc.actuator.delay_min = r.delay_min;
  sc.actuator.delay_max = r.delay_max;
  return sc;
}

FrequencySweep sweep_frequencies(const Scenario & scenario, const std::vector<double> & grid)
{
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end())) {
    throw Error("frequency grid must be nonempty and ascending");
  }
  FrequencySweep out;
  bool seen_pass = false;
  for (const double f : grid) {
    Scenario sc = scenario;
    sc.control_frequency = f;
    FrequencyRow row;
    row.frequency = f;
    row.trace = run_closed_loop(sc);
    row.outcome = evaluate(row.trace, sc);
    if (row.outcome.passed()) {
      if (!seen_pass) {
        out.threshold = f;
      }
      seen_pass = true;
    } else if (seen_pass) {
      out.monotone = false;
    }
    out.table.push_back(std::move(row));
  }
  return out;
}

FrequencySweep min_update_frequency(const Scenario & scenario, const std::vector<double> & grid)
{
  FrequencySweep out = sweep_frequencies(scenario, grid);
  if (!out.threshold) {
    throw StudyError("no frequency on the grid passes");
  }
  return out;
}

DiscretizationFloor discretization_floor(
  const dynamics::VehicleParams & params, double u0, double step, double limit)
{
  if (!(step > 0.0) || !(limit > step)) {
    throw Error("discretization scan needs 0 < step < limit");
  }
  const dynamics::LinearModel lin = dynamics::linearize(params, u0);
  auto tractable = [&](double dt) {
    try {
      dynamics::discretize_zoh(lin, dt);
      return true;
    } catch (const ConditioningError &) {
      return false;
    }
  };
  if (!tractable(step)) {
    throw StudyError("discretization fails at the first scanned period");
  }
  // double until the first failure, then bisect down to `step`
  double good = step;
  double bad = 2.0 * step;
  while (tractable(bad)) {
    good = bad;
    bad *= 2.0;
    if (good > limit) {
      throw StudyError("discretization stays well conditioned up to the scan limit");
    }
  }
  while (bad - good > step) {
    const double mid = 0.5 * (good + bad);
    (tractable(mid) ? good : bad) = mid;
  }
  DiscretizationFloor out;
  out.max_period = good;
  out.min_frequency = 1.0 / good;
  return out;
}

PerceptionResult min_perception_distance(
  const Scenario & scenario, double max_preview, std::shared_ptr<const tube::TubeDesign> design)
{
  const double f = scenario.control_frequency;
  const int n_max = static_cast<int>(std::floor(max_preview * f + kRatioTol));
  if (n_max < 1) {
    throw StudyError("preview limit shorter than one control period");
  }
  if (scenario.controller == ControllerKind::TubeMpc && !design) {
    design = design_for(scenario);
  }
  PerceptionResult out;
  out.speed = scenario.u0;
  auto passes = [&](int n) {
    Scenario sc = scenario;
    sc.preview_time = n / f;
    ++out.evaluations;
    return evaluate(run_closed_loop(sc, design), sc).passed();
  };
  if (!passes(n_max)) {
    throw StudyError("no feasible preview horizon up to the limit");
  }
  int lo = 0;  // treated as failing
  int hi = n_max;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    (passes(mid) ? hi : lo) = mid;
  }
  out.horizon = hi;
  out.preview_time = hi / f;
  out.distance = scenario.u0 * out.preview_time;
  return out;
}

Scenario perception_scenario(const Scenario & base, double speed, ControllerKind controller)
{
  if (!(speed > 0.0)) {
    throw Error("speed must be positive");
  }
  Scenario sc = base;
  sc.u0 = speed;
  // obstacles keep their time headway and length
  for (auto & o : sc.obstacles) {
    const double length = o.x_max - o.x_min;
    o.x_min *= speed / base.u0;
    o.x_max = o.x_min + length;
  }
  sc.controller = controller;
  if (controller == ControllerKind::NominalMpc) {
    sc.plant = PlantFidelity::LinearIdeal;
    sc.realization.reset();
  } else {
    const auto & r = sc.tube.actuator;
    sc.plant = PlantFidelity::NonlinearWithActuator;
    sc.realization =
      actuation::ActuatorRealization{0.5 * (r.tau_min + r.tau_max), 0.5 * (r.delay_min + r.delay_max)};
  }
  return sc;
}

PerceptionResult min_perception_distance(double speed, ControllerKind controller)
{
  return min_perception_distance(perception_scenario(obstacle_scenario(speed, 5.5), speed, controller));
}

void MonteCarloReport::write_summary_csv(std::ostream & out) const
{
  out << "runs,collisions,diverged,infeasible_runs,collision_probability,tightened_clearance\n";
  out << runs << ',' << collisions << ',' << diverged << ',' << infeasible_runs << ','
      << csv::number(collision_probability) << ','
      << (tightened_clearance ? csv::number(*tightened_clearance) : std::string()) << '\n';
}

void MonteCarloReport::write_runs_csv(std::ostream & out) const
{
  out << "index,tau,delay,collided,collision_time,diverged,infeasible_steps,max_deviation\n";
  for (const auto & r : per_run) {
    out << r.index << ',' << csv::number(r.realization.tau) << ','
        << csv::number(r.realization.delay) << ',' << (r.outcome.collision_time ? 1 : 0) << ','
        << (r.outcome.collision_time ? csv::number(*r.outcome.collision_time) : std::string())
        << ',' << (r.outcome.diverged ? 1 : 0) << ',' << r.outcome.infeasible_steps << ','
        << csv::number(r.max_deviation) << '\n';
  }
}

void MonteCarloReport::write_envelope_csv(std::ostream & out) const
{
  out << "X_bin,Y_min,Y_max\n";
  for (const auto & b : envelope) {
    out << csv::number(b.x) << ',' << csv::number(b.y_min) << ',' << csv::number(b.y_max) << '\n';
  }
}

unsigned worker_count()
{
  unsigned n = 0;
  if (const char * env = std::getenv("APEX_THREADS")) {
    try {
      const long v = std::stol(env);
      n = v > 0 ? static_cast<unsigned>(v) : 0;
    } catch (const std::exception &) {
      throw Error("APEX_THREADS must be a nonnegative integer");
    }
  }
  if (n == 0) {
    n = std::max(1u, std::thread::hardware_concurrency());
  }
  return n;
}

namespace
{

struct BinRange
{
  double lo{std::numeric_limits<double>::infinity()};
  double hi{-std::numeric_limits<double>::infinity()};
};

long bin_of(double x, double width) { return static_cast<long>(std::floor(x / width)); }

}  // namespace

MonteCarloReport monte_carlo(
  const Scenario & scenario, int runs, std::uint64_t seed, unsigned workers,
  std::shared_ptr<const tube::TubeDesign> design)
{
  if (runs < 1) {
    throw Error("Monte Carlo needs at least one run");
  }
  if (scenario.controller == ControllerKind::TubeMpc && !design) {
    design = design_for(scenario);
  }
  MonteCarloReport report;
  report.runs = runs;

  Scenario ideal = scenario;
  ideal.plant = PlantFidelity::NonlinearIdeal;
  report.nominal = run_closed_loop(ideal, design);

  std::vector<RunSummary> summaries(static_cast<size_t>(runs));
  std::vector<std::vector<BinRange>> bins(static_cast<size_t>(runs));
  std::vector<long> first_bin(static_cast<size_t>(runs), 0);
  const double width = report.bin_width;

  auto run_one = [&](int i) {
    Scenario sc = scenario;
    sc.plant = PlantFidelity::NonlinearWithActuator;
    sc.seed = seed;
    sc.run_index = static_cast<std::uint64_t>(i);
    const SimTrace trace = run_closed_loop(sc, design);
    RunSummary & sum = summaries[static_cast<size_t>(i)];
    sum.index = sc.run_index;
    sum.realization = trace.realization;
    sum.outcome = evaluate(trace, sc);
    const auto & ref = report.nominal.records;
    const size_t common = std::min(ref.size(), trace.records.size());
    for (size_t k = 0; k < common; ++k) {
      sum.max_deviation = std::max(sum.max_deviation, std::abs(trace.records[k].y - ref[k].y));
    }
    if (trace.records.empty()) {
      return;
    }
    const long b0 = bin_of(trace.records.front().x, width);
    auto & mine = bins[static_cast<size_t>(i)];
    first_bin[static_cast<size_t>(i)] = b0;
    for (const auto & r : trace.records) {
      const auto b = static_cast<size_t>(std::max(0L, bin_of(r.x, width) - b0));
      if (b >= mine.size()) {
        mine.resize(b + 1);
      }
      mine[b].lo = std::min(mine[b].lo, r.y);
      mine[b].hi = std::max(mine[b].hi, r.y);
    }
  };

  if (workers == 0) {
    workers = worker_count();
  }
  workers = std::min<unsigned>(workers, static_cast<unsigned>(runs));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next++; i < runs; i = next++) {
      run_one(i);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back(worker);
    }
    for (auto & t : pool) {
      t.join();
    }
  }

  // index-ordered reduction
  long lo_bin = std::numeric_limits<long>::max();
  long hi_bin = std::numeric_limits<long>::min();
  for (int i = 0; i < runs; ++i) {
    const auto & mine = bins[static_cast<size_t>(i)];
    if (!mine.empty()) {
      lo_bin = std::min(lo_bin, first_bin[static_cast<size_t>(i)]);
      hi_bin = std::max(hi_bin, first_bin[static_cast<size_t>(i)] + static_cast<long>(mine.size()) - 1);
    }
  }
  std::vector<BinRange> merged;
  if (lo_bin <= hi_bin) {
    merged.resize(static_cast<size_t>(hi_bin - lo_bin + 1));
  }
  for (int i = 0; i < runs; ++i) {
    const auto & mine = bins[static_cast<size_t>(i)];
    const long offset = first_bin[static_cast<size_t>(i)] - lo_bin;
    for (size_t b = 0; b < mine.size(); ++b) {
      auto & m = merged[static_cast<size_t>(offset) + b];
      m.lo = std::min(m.lo, mine[b].lo);
      m.hi = std::max(m.hi, mine[b].hi);
    }
  }
  for (size_t b = 0; b < merged.size(); ++b) {
    if (merged[b].lo <= merged[b].hi) {
      report.envelope.push_back(
        {static_cast<double>(lo_bin + static_cast<long>(b)) * width, merged[b].lo, merged[b].hi});
    }
  }

  for (auto & sum : summaries) {
    const bool collided = sum.outcome.collision_time.has_value() || sum.outcome.diverged;
    report.collisions += collided ? 1 : 0;
    report.diverged += sum.outcome.diverged ? 1 : 0;
    report.infeasible_runs += sum.outcome.infeasible_steps > 0 ? 1 : 0;
  }
  report.per_run = std::move(summaries);
  report.collision_probability = static_cast<double>(report.collisions) / runs;
  if (design) {
    report.tightened_clearance = tightened_clearance(report, scenario, *design);
  }
  return report;
}

bool envelope_contains(const MonteCarloReport & report, const SimTrace & trace)
{
  for (const auto & r : trace.records) {
    const double start = std::floor(r.x / report.bin_width) * report.bin_width;
    const auto it = std::lower_bound(
      report.envelope.begin(), report.envelope.end(), start,
      [](const EnvelopeBin & b, double x) { return b.x < x; });
    if (it == report.envelope.end() || it->x != start || r.y < it->y_min || r.y > it->y_max) {
      return false;
    }
  }
  return true;
}

double tightened_clearance(
  const MonteCarloReport & report, const Scenario & scenario, const tube::TubeDesign & design)
{
  const double hw = scenario.half_width();
  double clearance = std::numeric_limits<double>::infinity();
  for (const auto & b : report.envelope) {
    double lower = scenario.corridor_min() + design.y_margin_lower();
    double upper = scenario.corridor_max() - design.y_margin_upper();
    for (const auto & o : scenario.obstacles) {
      if (o.speed != 0.0 || b.x + report.bin_width <= o.x_min - hw || b.x >= o.x_max + hw) {
        continue;
      }
      if (b.y_min >= 0.5 * (o.y_min + o.y_max)) {
        lower = std::max(lower, o.y_max + hw + design.y_margin_lower());
      } else {
        upper = std::min(upper, o.y_min - hw - design.y_margin_upper());
      }
    }
    clearance = std::min({clearance, b.y_min - lower, upper - b.y_max});
  }
  return clearance;
}

}  // namespace apex::scenarios
