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

// Acceptance suite: one PASS/FAIL line per criterion. Criterion 12 is
// reported but does not affect the exit status.

#include "apex/dynamics.hpp"
#include "apex/errors.hpp"
#include "apex/qp.hpp"
#include "apex/scenarios.hpp"
#include "apex/sets.hpp"
#include "apex/tube.hpp"
#include "cli.hpp"
#include "support/qp_oracle.hpp"
#include "support/tube_containment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

using namespace apex;
namespace fs = std::filesystem;
using scenarios::ControllerKind;

namespace
{

const dynamics::VehicleParams kRef = dynamics::VehicleParams::reference();
const fs::path kRoot{APEX_SOURCE_DIR};

struct Verdict
{
  bool pass{false};
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 6)
{
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------- 1

qp::QpProblem random_qp(std::mt19937 & rng, int n, int m)
{
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  qp::QpProblem p;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      M(i, j) = normal(rng);
    }
  }
  p.H = M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  p.g.resize(n);
  for (int i = 0; i < n; ++i) {
    p.g(i) = 3.0 * normal(rng);
  }
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) {
    x0(i) = normal(rng);
  }
  p.G.resize(m, n);
  p.h.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      p.G(i, j) = normal(rng);
    }
    p.h(i) = p.G.row(i).dot(x0) + 0.5 * unit(rng);
  }
  return p;
}

Verdict qp_oracle()
{
  const auto start = Clock::now();
  std::mt19937 rng(20260001);
  std::uniform_int_distribution<int> n_dist(1, 6);
  std::uniform_int_distribution<int> m_dist(0, 8);
  double worst = 0.0;
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const qp::QpProblem p = random_qp(rng, n_dist(rng), m_dist(rng));
    const auto oracle = testing::enumerate_qp(p);
    const qp::QpSolution s = qp::solve_qp(p);
    if (!oracle || !s.optimal()) {
      ++mismatches;
      continue;
    }
    const double gap = std::abs(s.objective - oracle->objective);
    worst = std::max(worst, gap);
    if (gap > 1e-8) {
      ++mismatches;
    }
  }
  const double elapsed = seconds_since(start);
  return {mismatches == 0 && elapsed < 10.0,
          "200 QPs, worst objective gap " + fmt(worst, 3) + ", " + std::to_string(mismatches) +
            " mismatches, " + fmt(elapsed, 3) + " s (limit 10 s)"};
}

// ---------------------------------------------------------------- 2

double zoh_vs_euler(double dt)
{
  const dynamics::LinearModel lin = dynamics::linearize(kRef, 80.56);
  const dynamics::DiscreteModel d = dynamics::discretize_zoh(lin, dt);
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> input(-0.05, 0.05);
  Eigen::Vector4d xd(0.01, -0.02, 0.005, 0.3);
  Eigen::Vector4d xe = xd;
  const int sub = 1000;
  const double h = dt / sub;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double u = input(rng);
    xd = d.Ad * xd + d.Bd * u;
    for (int i = 0; i < sub; ++i) {
      xe += h * (lin.A * xe + lin.B * u);
    }
    worst = std::max(worst, (xd - xe).norm() / xe.norm());
  }
  return worst;
}

Verdict zoh_oracle()
{
  const double worst = zoh_vs_euler(0.0005);
  const double control_rate = zoh_vs_euler(0.05);
  return {worst <= 1e-6, "dt 0.5 ms, 50 steps, worst relative error " + fmt(worst, 3) +
                           " (limit 1e-6); at 50 ms the Euler oracle itself is off by " + fmt(control_rate, 3)};
}

// ---------------------------------------------------------------- 3

Eigen::Vector4d linear_coordinates_rate(double u0, const Eigen::Vector4d & x, double steer)
{
  using namespace dynamics;
  VehicleState s;
  s.u = u0;
  s.v = u0 * std::tan(x(idx::kSideslip));
  s.yaw = x(idx::kYaw);
  s.yaw_rate = x(idx::kYawRate);
  s.y = x(idx::kY);
  const StateRate r = derivatives(kRef, s, steer, 0.0, u0);
  Eigen::Vector4d out;
  out(idx::kYaw) = r.yaw_rate;
  out(idx::kYawRate) = r.yaw_accel;
  out(idx::kSideslip) = (s.u * r.v_dot - s.v * r.u_dot) / (s.u * s.u + s.v * s.v);
  out(idx::kY) = r.y_dot;
  return out;
}

Verdict linearization()
{
  double worst = 0.0;
  for (const double u0 : {40.0, 60.0, 80.56}) {
    const dynamics::LinearModel lin = dynamics::linearize(kRef, u0);
    const double h = 1e-6;
    for (int j = 0; j < 5; ++j) {
      Eigen::Vector4d e = Eigen::Vector4d::Zero();
      double du = 0.0;
      if (j < 4) {
        e(j) = h;
      } else {
        du = h;
      }
      const Eigen::Vector4d fd =
        (linear_coordinates_rate(u0, e, du) - linear_coordinates_rate(u0, -e, -du)) / (2.0 * h);
      const Eigen::Vector4d analytic = j < 4 ? Eigen::Vector4d(lin.A.col(j)) : lin.B;
      for (int i = 0; i < 4; ++i) {
        worst = std::max(worst, std::abs(fd(i) - analytic(i)) / std::max(1.0, std::abs(analytic(i))));
      }
    }
  }
  return {worst <= 1e-4, "u0 in {40, 60, 80.56}, worst relative Jacobian error " + fmt(worst, 3) + " (limit 1e-4)"};
}

// ---------------------------------------------------------------- 4, 5

const std::vector<double> kSpeeds = {40.0, 50.0, 60.0, 70.0, 80.56};

struct PerceptionTable
{
  std::vector<std::optional<scenarios::PerceptionResult>> nominal;
  std::vector<std::optional<scenarios::PerceptionResult>> tube;
  double seconds{0.0};
};

const PerceptionTable & perception_table()
{
  static const PerceptionTable table = [] {
    PerceptionTable t;
    const auto start = Clock::now();
    for (const double speed : kSpeeds) {
      for (const auto kind : {ControllerKind::NominalMpc, ControllerKind::TubeMpc}) {
        std::optional<scenarios::PerceptionResult> r;
        try {
          r = scenarios::min_perception_distance(speed, kind);
        } catch (const StudyError &) {
        }
        (kind == ControllerKind::NominalMpc ? t.nominal : t.tube).push_back(r);
      }
    }
    t.seconds = seconds_since(start);
    return t;
  }();
  return table;
}

Verdict perception_identity()
{
  const auto & t = perception_table();
  bool exact = true;
  for (const auto * column : {&t.nominal, &t.tube}) {
    for (const auto & r : *column) {
      if (r && r->distance != r->speed * r->preview_time) {
        exact = false;
      }
    }
  }
  const double reference = 80.56 * 1.5;
  const bool reads = std::abs(reference - 121.0) <= 0.5;
  return {exact && reads, std::string("distance == u0 * T_p on every computed point: ") + (exact ? "yes" : "no") +
                            "; 80.56 m/s x 1.5 s = " + fmt(reference) + " m vs 121 m (tolerance 0.5 m)"};
}

Verdict perception_properties()
{
  const auto & t = perception_table();
  bool ok = true;
  std::ostringstream rows;
  for (size_t i = 0; i < kSpeeds.size(); ++i) {
    const auto & n = t.nominal[i];
    const auto & m = t.tube[i];
    rows << (i ? "; " : "") << kSpeeds[i] << ": " << (n ? fmt(n->distance, 4) : "none") << " / "
         << (m ? fmt(m->distance, 4) : "none");
    if (!n || !m || m->distance < n->distance) {
      ok = false;
    }
    if (i > 0 && n && m && t.nominal[i - 1] && t.tube[i - 1]) {
      ok = ok && n->distance >= t.nominal[i - 1]->distance && m->distance >= t.tube[i - 1]->distance;
    }
  }
  const auto & top_n = t.nominal.back();
  const auto & top_m = t.tube.back();
  const double gap = top_n && top_m ? top_m->distance - top_n->distance : 0.0;
  ok = ok && gap > 0.0 && t.seconds < 300.0;
  return {ok, "distances m (nominal / tube) " + rows.str() + "; gap at top speed " + fmt(gap, 4) + " m, " +
                fmt(t.seconds, 3) + " s (limit 300 s)"};
}

// ---------------------------------------------------------------- 6

Verdict frequency_upset()
{
  const auto sweep = scenarios::sweep_frequencies(scenarios::overtake_scenario(), {2, 5, 10, 25, 50, 100});
  bool any_fail = false;
  bool any_pass = false;
  std::ostringstream rows;
  for (const auto & row : sweep.table) {
    any_fail = any_fail || !row.outcome.passed();
    any_pass = any_pass || row.outcome.passed();
    rows << row.frequency << (row.outcome.passed() ? "+ " : "- ");
  }
  return {sweep.monotone && any_fail && any_pass,
          "grid " + rows.str() + "(+ pass, - fail), up-set " + (sweep.monotone ? "yes" : "no") + ", threshold " +
            (sweep.threshold ? fmt(*sweep.threshold) + " Hz" : std::string("none"))};
}

// ---------------------------------------------------------------- 7

Verdict discretization()
{
  const auto floor = scenarios::discretization_floor(kRef, 80.56);
  bool throws = false;
  try {
    dynamics::discretize_zoh(dynamics::linearize(kRef, 80.56), floor.max_period * 1.01);
  } catch (const ConditioningError &) {
    throws = true;
  }
  return {throws, "conditioning fails beyond dt = " + fmt(floor.max_period, 8) + " s at 80.56 m/s, minimum frequency " +
                    fmt(floor.min_frequency, 4) + " Hz"};
}

// ---------------------------------------------------------------- 8, 9

std::shared_ptr<const tube::TubeDesign> reference_design()
{
  static const auto design = std::make_shared<const tube::TubeDesign>(
    tube::design_tube(kRef, 80.56, 0.05, 1.0, 11.0, tube::TubeConfig{}));
  return design;
}

Verdict invariant_suite()
{
  const auto start = Clock::now();
  const auto design = reference_design();
  const auto & inv = design->invariant;
  bool monotone = true;
  for (size_t i = 1; i < inv.support_history.size(); ++i) {
    monotone = monotone && ((inv.support_history[i] - inv.support_history[i - 1]).array() >= -1e-12).all();
  }
  const auto & last = inv.support_history.back();
  const auto & prev = inv.support_history[inv.support_history.size() - 2];
  const double final_change = (last - prev).cwiseAbs().maxCoeff();
  const double margin = sets::invariance_margin(design->a_k, design->disturbance, design->tube(), inv.probes);

  // Pontryagin tightening of the augmented state constraints
  sets::HalfspaceSet x_set;
  x_set.C = design->row_state;
  x_set.d.resize(x_set.C.rows());
  x_set.d << 11.0, -1.0, Eigen::Vector4d::Constant(design->max_slip);
  const sets::HalfspaceSet tight = sets::tighten(x_set, design->tube());
  std::mt19937 rng(20260008);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Eigen::VectorXd half_box = (Eigen::VectorXd(6) << 0.3, 0.5, 0.1, 6.0, 0.3, 0.3).finished();
  const Eigen::VectorXd centre = (Eigen::VectorXd(6) << 0.0, 0.0, 0.0, 6.0, 0.0, 0.0).finished();
  const auto & s = design->tube();
  long tested = 0;
  long violations = 0;
  while (tested < 100000) {
    Eigen::VectorXd z(6);
    for (int i = 0; i < 6; ++i) {
      z(i) = centre(i) + half_box(i) * unit(rng);
    }
    if (!tight.contains(z)) {
      continue;
    }
    ++tested;
    Eigen::VectorXd coeff(s.num_generators());
    for (Eigen::Index g = 0; g < coeff.size(); ++g) {
      // every other sample on a vertex of S
      coeff(g) = tested % 2 ? unit(rng) : (unit(rng) < 0.0 ? -1.0 : 1.0);
    }
    const Eigen::VectorXd e = s.center + s.generators * coeff;
    if (!x_set.contains(z + e, 1e-12)) {
      ++violations;
    }
  }
  const double elapsed = seconds_since(start);
  const bool ok = monotone && inv.iterations <= 200 && final_change < 1e-6 && margin <= 1e-5 && violations == 0 &&
                  elapsed < 60.0;
  return {ok, std::to_string(inv.iterations) + " iterations, supports monotone " + (monotone ? "yes" : "no") +
                ", last change " + fmt(final_change, 3) + ", certificate margin " + fmt(margin, 3) +
                " (limit 1e-5), " + std::to_string(violations) + " violations in " + std::to_string(tested) +
                " Minkowski samples, " + fmt(elapsed, 3) + " s (limit 60 s)"};
}

Verdict tube_containment()
{
  const auto rep = testing::tube_containment(reference_design(), 1.0, 11.0, 500, 60, 20, 20260009);
  return {rep.violations == 0, std::to_string(rep.runs) + " runs, " + std::to_string(rep.steps) + " steps, " +
                                 std::to_string(rep.violations) + " probe violations, worst support ratio " +
                                 fmt(rep.worst_ratio, 4)};
}

// ---------------------------------------------------------------- 10

Verdict monte_carlo()
{
  const auto start = Clock::now();
  const std::uint64_t seed = 20260010;
  scenarios::Scenario tube_sc = scenarios::monte_carlo_scenario();
  scenarios::Scenario nominal_sc = tube_sc;
  nominal_sc.controller = ControllerKind::NominalMpc;
  const auto nominal = scenarios::monte_carlo(nominal_sc, 1000, seed);
  const auto tube = scenarios::monte_carlo(tube_sc, 1000, seed, 0, scenarios::design_for(tube_sc));
  const double elapsed = seconds_since(start);
  const double clearance = tube.tightened_clearance.value_or(-1.0);
  const bool ok =
    nominal.collision_probability > 0.0 && tube.collisions == 0 && clearance > 0.0 && elapsed < 900.0;
  return {ok, "1000 shared realizations: nominal collision probability " + fmt(nominal.collision_probability) +
                ", tube collisions " + std::to_string(tube.collisions) + ", envelope clearance to tightened corridor " +
                fmt(clearance, 4) + " m, " + fmt(elapsed, 4) + " s (limit 900 s)"};
}

// ---------------------------------------------------------------- 11

std::string slurp(const fs::path & path)
{
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

Verdict determinism()
{
  const fs::path base = fs::temp_directory_path() / "apex_acceptance";
  fs::remove_all(base);
  std::ostringstream sink;
  auto cli = [&](std::vector<std::string> args, const fs::path & dir) {
    args.insert(args.end(), {"--out", dir.string()});
    return cli::run(args, sink, sink);
  };
  int mismatches = 0;
  int files = 0;
  auto compare = [&](const fs::path & a, const fs::path & b, const char * name) {
    ++files;
    const std::string x = slurp(a / name);
    if (x.empty() || x != slurp(b / name)) {
      ++mismatches;
    }
  };
  for (const char * cfg : {"configs/overtake.cfg", "configs/montecarlo.cfg"}) {
    const std::vector<std::string> args = {"simulate", (kRoot / cfg).string()};
    cli(args, base / "sim_a");
    cli(args, base / "sim_b");
    compare(base / "sim_a", base / "sim_b", "trace.csv");
  }
  const std::vector<std::string> mc = {"montecarlo", (kRoot / "configs/montecarlo.cfg").string(), "--runs", "24",
                                       "--seed", "11"};
  setenv("APEX_THREADS", "1", 1);
  cli(mc, base / "mc_serial");
  cli(mc, base / "mc_serial_again");
  setenv("APEX_THREADS", "4", 1);
  cli(mc, base / "mc_parallel");
  unsetenv("APEX_THREADS");
  for (const char * name : {"mc_summary.csv", "mc_runs.csv", "mc_envelope.csv"}) {
    compare(base / "mc_serial", base / "mc_serial_again", name);
    compare(base / "mc_serial", base / "mc_parallel", name);
  }
  return {mismatches == 0, std::to_string(files) + " CSV comparisons (repeat and 1 vs 4 workers), " +
                             std::to_string(mismatches) + " differ"};
}

// ---------------------------------------------------------------- 12

Verdict solve_time()
{
  scenarios::Scenario sc = scenarios::obstacle_scenario(80.56, 3.0);
  sc.preview_time = 0.75;
  const int horizon = sc.horizon();
  std::vector<double> times = scenarios::run_closed_loop(sc).solve_times;
  std::sort(times.begin(), times.end());
  const double median = times[times.size() / 2];
  return {median < 0.020, "N = " + std::to_string(horizon) + ", median solve " + fmt(median * 1e3, 4) + " ms over " +
                            std::to_string(times.size()) + " solves (target 20 ms, reported only)"};
}

}  // namespace

int main()
{
  struct Criterion
  {
    int id;
    const char * name;
    std::function<Verdict()> check;
    bool gated;
  };
  const std::vector<Criterion> criteria = {
    {1, "QP oracle equivalence", qp_oracle, true},
    {2, "ZOH vs fine Euler", zoh_oracle, true},
    {3, "linearization vs finite differences", linearization, true},
    {4, "perception-distance identity", perception_identity, true},
    {5, "perception distance vs speed", perception_properties, true},
    {6, "update-frequency up-set", frequency_upset, true},
    {7, "discretization floor", discretization, true},
    {8, "invariant-set suite", invariant_suite, true},
    {9, "tube containment", tube_containment, true},
    {10, "Monte Carlo dominance", monte_carlo, true},
    {11, "determinism", determinism, true},
    {12, "solve time", solve_time, false},
  };
  int failed = 0;
  for (const auto & c : criteria) {
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception & e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass && c.gated) {
      ++failed;
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << ' ' << std::setw(2) << c.id << ' ' << c.name << ": " << v.detail
              << (c.gated ? "" : " [not gated]") << std::endl;
  }
  std::cout << (failed == 0 ? "all gated criteria pass" : std::to_string(failed) + " gated criteria fail") << '\n';
  return failed == 0 ? 0 : 1;
}
