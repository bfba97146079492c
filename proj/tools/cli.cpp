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

#include "cli.hpp"

#include "apex/config.hpp"
#include "apex/csv.hpp"
#include "apex/errors.hpp"
#include "apex/scenarios.hpp"
#include "apex/sets.hpp"
#include "svg.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace apex::cli
{

namespace fs = std::filesystem;
using scenarios::ControllerKind;
using scenarios::Scenario;
using scenarios::SimTrace;

namespace
{

const char * const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

class UsageError : public Error
{
public:
  using Error::Error;
};

std::ofstream open_output(const fs::path & dir, const std::string & name)
{
  fs::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) {
    throw Error("cannot write " + (dir / name).string());
  }
  return out;
}

double parse_number(const std::string & text)
{
  double v = 0.0;
  const char * first = text.data();
  const char * last = first + text.size();
  const auto res = std::from_chars(first, last, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw UsageError("grid: '" + text + "' is not a number");
  }
  return v;
}

// trajectory samples for plotting, one per `stride` records
std::pair<std::vector<double>, std::vector<double>> path_of(const SimTrace & t, size_t stride = 10)
{
  std::vector<double> x;
  std::vector<double> y;
  for (size_t k = 0; k < t.records.size(); k += stride) {
    x.push_back(t.records[k].x);
    y.push_back(t.records[k].y);
  }
  if (!t.records.empty() && (t.records.size() - 1) % stride != 0) {
    x.push_back(t.records.back().x);
    y.push_back(t.records.back().y);
  }
  return {x, y};
}

void draw_track(SvgPlot & plot, const Scenario & sc, double x_end, double grow = 0.0)
{
  for (const auto & o : sc.obstacles) {
    // moving boxes are drawn over the span they sweep during the run
    const double x1 = o.speed != 0.0 ? o.x_max_at(sc.duration) : o.x_max;
    plot.rect(o.x_min, o.y_min, x1, o.y_max, "#555555", o.speed != 0.0 ? 0.15 : 0.5,
              o.speed != 0.0 ? "obstacle (swept)" : "obstacle");
    if (grow > 0.0 && o.speed == 0.0) {
      plot.rect(o.x_min - grow, o.y_min - grow, o.x_max + grow, o.y_max + grow, "#d62728", 0.08, "tightened obstacle");
    }
  }
  plot.line({0.0, x_end}, {sc.track_y_min, sc.track_y_min}, "black", "track edge");
  plot.line({0.0, x_end}, {sc.track_y_max, sc.track_y_max}, "black");
  plot.set_y_range(sc.track_y_min - 0.5, sc.track_y_max + 0.5);
}

std::string outcome_name(const scenarios::RunOutcome & o)
{
  if (o.diverged) {
    return "diverged";
  }
  if (o.collision_time) {
    return "collision";
  }
  if (o.infeasible_steps > 0) {
    return "infeasible";
  }
  return "pass";
}

int cmd_simulate(const fs::path & config, const fs::path & dir, bool plot, std::optional<std::uint64_t> seed, std::ostream & out)
{
  Scenario sc = config::load_scenario(config);
  if (seed) {
    sc.seed = *seed;
  }
  const SimTrace trace = scenarios::run_closed_loop(sc);
  const scenarios::RunOutcome outcome = scenarios::evaluate(trace, sc);
  {
    auto file = open_output(dir, "trace.csv");
    trace.write_csv(file);
  }
  if (plot) {
    SvgPlot svg("Trajectory", "X [m]", "Y [m]");
    const auto [x, y] = path_of(trace);
    draw_track(svg, sc, x.empty() ? 1.0 : x.back());
    svg.line(x, y, kPalette[0], std::string(scenarios::to_string(sc.controller)) + " MPC");
    auto file = open_output(dir, "trajectory.svg");
    svg.write(file);
  }
  out << "controller " << scenarios::to_string(sc.controller) << ", plant " << scenarios::to_string(sc.plant)
      << ", " << trace.control_steps << " control steps\n";
  if (sc.plant == scenarios::PlantFidelity::NonlinearWithActuator) {
    out << "actuator tau " << trace.realization.tau << " s, delay " << trace.realization.delay << " s\n";
  }
  out << "outcome: " << outcome_name(outcome);
  if (outcome.collision_time) {
    out << " at t = " << *outcome.collision_time << " s";
  }
  if (outcome.infeasible_steps > 0) {
    out << " (" << outcome.infeasible_steps << " infeasible steps)";
  }
  out << '\n';
  if (outcome.collision_time || outcome.diverged) {
    return kCollision;
  }
  return outcome.infeasible_steps > 0 ? kInfeasible : kClean;
}

int sweep_frequency(const Scenario & sc, const std::vector<double> & grid, const fs::path & dir, std::ostream & out)
{
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  const scenarios::FrequencySweep sweep = scenarios::sweep_frequencies(sc, sorted);
  {
    auto file = open_output(dir, "sweep.csv");
    file << "value,controller,outcome,metric\n";
    for (const auto & row : sweep.table) {
      file << csv::number(row.frequency) << ',' << scenarios::to_string(sc.controller) << ','
           << outcome_name(row.outcome) << ','
           << (row.outcome.collision_time ? csv::number(*row.outcome.collision_time) : std::string()) << '\n';
    }
  }
  SvgPlot svg("Overtake at each update frequency", "X [m]", "Y [m]");
  double x_end = 1.0;
  for (const auto & row : sweep.table) {
    if (!row.trace.records.empty()) {
      x_end = std::max(x_end, row.trace.records.back().x);
    }
  }
  draw_track(svg, sc, x_end);
  size_t colour = 0;
  for (const auto & row : sweep.table) {
    const auto [x, y] = path_of(row.trace);
    svg.line(x, y, kPalette[colour++ % std::size(kPalette)],
             csv::number(row.frequency) + " Hz (" + outcome_name(row.outcome) + ")", !row.outcome.passed());
  }
  auto file = open_output(dir, "sweep.svg");
  svg.write(file);

  for (const auto & row : sweep.table) {
    out << row.frequency << " Hz: " << outcome_name(row.outcome) << '\n';
  }
  if (!sweep.threshold) {
    out << "no grid frequency passes\n";
    return kAllFail;
  }
  out << "minimum update frequency " << *sweep.threshold << " Hz"
      << (sweep.monotone ? "" : " (pass region is not an up-set)") << '\n';
  return kClean;
}

int sweep_perception(const Scenario & base, const std::vector<double> & grid, const fs::path & dir, std::ostream & out)
{
  if (base.obstacles.empty()) {
    throw UsageError("perception sweep needs an obstacle in the config");
  }
  struct Row
  {
    double speed;
    ControllerKind kind;
    std::optional<scenarios::PerceptionResult> result;
  };
  std::vector<Row> rows;
  for (const double speed : grid) {
    if (!(speed > 0.0)) {
      throw UsageError("perception grid values are speeds and must be positive");
    }
    for (const auto kind : {ControllerKind::NominalMpc, ControllerKind::TubeMpc}) {
      Row row{speed, kind, std::nullopt};
      try {
        row.result = scenarios::min_perception_distance(scenarios::perception_scenario(base, speed, kind));
      } catch (const StudyError &) {
      }
      out << speed << " m/s " << scenarios::to_string(kind) << ": "
          << (row.result ? csv::number(row.result->distance) + " m" : std::string("no feasible horizon")) << '\n';
      rows.push_back(row);
    }
  }
  {
    auto file = open_output(dir, "sweep.csv");
    file << "value,controller,outcome,metric\n";
    for (const auto & r : rows) {
      file << csv::number(r.speed) << ',' << scenarios::to_string(r.kind) << ',' << (r.result ? "pass" : "no_horizon")
           << ',' << (r.result ? csv::number(r.result->distance) : std::string()) << '\n';
    }
  }
  SvgPlot svg("Minimum perception distance", "speed [m/s]", "distance [m]");
  size_t colour = 0;
  for (const auto kind : {ControllerKind::NominalMpc, ControllerKind::TubeMpc}) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto & r : rows) {
      if (r.kind == kind && r.result) {
        x.push_back(r.speed);
        y.push_back(r.result->distance);
      }
    }
    const char * colour_name = kPalette[colour++];
    svg.line(x, y, colour_name, std::string(scenarios::to_string(kind)) + " MPC");
    svg.markers(x, y, colour_name);
  }
  auto file = open_output(dir, "sweep.svg");
  svg.write(file);
  const bool any = std::any_of(rows.begin(), rows.end(), [](const Row & r) { return r.result.has_value(); });
  return any ? kClean : kAllFail;
}

int cmd_sweep(const fs::path & config, const std::string & mode, const std::string & grid_spec, const fs::path & dir, std::ostream & out)
{
  const Scenario sc = config::load_scenario(config);
  const std::vector<double> grid = parse_grid(grid_spec);
  if (mode == "frequency") {
    return sweep_frequency(sc, grid, dir, out);
  }
  return sweep_perception(sc, grid, dir, out);
}

int cmd_montecarlo(const fs::path & config, int runs, std::uint64_t seed, const fs::path & dir, bool plot, std::ostream & out)
{
  const Scenario sc = config::load_scenario(config);
  std::shared_ptr<const tube::TubeDesign> design;
  if (sc.controller == ControllerKind::TubeMpc) {
    design = scenarios::design_for(sc);
  }
  const scenarios::MonteCarloReport rep = scenarios::monte_carlo(sc, runs, seed, 0, design);
  {
    auto file = open_output(dir, "mc_summary.csv");
    rep.write_summary_csv(file);
  }
  {
    auto file = open_output(dir, "mc_runs.csv");
    rep.write_runs_csv(file);
  }
  {
    auto file = open_output(dir, "mc_envelope.csv");
    rep.write_envelope_csv(file);
  }
  if (plot) {
    SvgPlot svg("Monte Carlo envelope", "X [m]", "Y [m]");
    std::vector<double> x;
    std::vector<double> lo;
    std::vector<double> hi;
    for (const auto & b : rep.envelope) {
      x.push_back(b.x + 0.5 * rep.bin_width);
      lo.push_back(b.y_min);
      hi.push_back(b.y_max);
    }
    const double grow = sc.half_width() + (design ? design->y_margin_lower() : 0.0);
    draw_track(svg, sc, x.empty() ? 1.0 : x.back(), grow);
    svg.band(x, lo, hi, kPalette[1], 0.35, "envelope of runs");
    const auto [nx, ny] = path_of(rep.nominal);
    svg.line(nx, ny, "black", "ideal actuator", true);
    auto file = open_output(dir, "envelope.svg");
    svg.write(file);
  }
  out << rep.runs << " runs, " << rep.collisions << " collisions (" << rep.diverged << " diverged), "
      << rep.infeasible_runs << " runs with infeasible steps, probability " << rep.collision_probability << '\n';
  if (rep.tightened_clearance) {
    out << "envelope clearance to the tightened corridor " << *rep.tightened_clearance << " m\n";
  }
  return kClean;
}

int cmd_invariant_set(const fs::path & config, const fs::path & dir, std::ostream & out)
{
  const Scenario sc = config::load_scenario(config);
  const auto design = scenarios::design_for(sc);
  const auto & inv = design->invariant;
  {
    auto file = open_output(dir, "invariant_iterates.csv");
    file << "iteration";
    for (size_t p = 0; p < inv.probes.size(); ++p) {
      file << ",probe_" << p;
    }
    file << '\n';
    for (size_t i = 0; i < inv.support_history.size(); ++i) {
      file << i + 1 << ',' << csv::join(inv.support_history[i]) << '\n';
    }
  }
  {
    auto file = open_output(dir, "probes.csv");
    file << "probe,yaw,yaw_rate,sideslip,Y,steer,delay\n";
    for (size_t p = 0; p < inv.probes.size(); ++p) {
      file << p << ',' << csv::join(inv.probes[p]) << '\n';
    }
  }
  {
    auto file = open_output(dir, "invariant_set.csv");
    sets::write_csv(file, design->tube());
  }
  {
    auto file = open_output(dir, "tube_summary.csv");
    file << "iterations,generators,y_margin_upper,y_margin_lower,input_lower,input_upper,vertex_spectral_radius\n";
    file << inv.iterations << ',' << design->tube().num_generators() << ',' << csv::number(design->y_margin_upper())
         << ',' << csv::number(design->y_margin_lower()) << ',' << csv::number(design->input.lower) << ','
         << csv::number(design->input.upper) << ',' << csv::number(design->vertex_spectral_radius) << '\n';
  }
  out << "invariant set after " << inv.iterations << " iterations, " << design->tube().num_generators()
      << " generators\n";
  out << "corridor margin " << design->y_margin_upper() << " m, command interval [" << design->input.lower << ", "
      << design->input.upper << "] rad, vertex spectral radius " << design->vertex_spectral_radius << '\n';
  return kClean;
}

}  // namespace

std::vector<double> parse_grid(const std::string & spec)
{
  std::vector<double> values;
  std::stringstream items(spec);
  std::string item;
  while (std::getline(items, item, ',')) {
    const auto first = item.find(':');
    if (first == std::string::npos) {
      values.push_back(parse_number(item));
      continue;
    }
    const auto second = item.find(':', first + 1);
    if (second == std::string::npos || item.find(':', second + 1) != std::string::npos) {
      throw UsageError("grid: expected start:step:end in '" + item + "'");
    }
    const double start = parse_number(item.substr(0, first));
    const double step = parse_number(item.substr(first + 1, second - first - 1));
    const double end = parse_number(item.substr(second + 1));
    if (!(step > 0.0) || end < start) {
      throw UsageError("grid: need step > 0 and start <= end in '" + item + "'");
    }
    const auto count = static_cast<long>(std::floor((end - start) / step + 1e-9));
    if (count > 100000) {
      throw UsageError("grid: too many points in '" + item + "'");
    }
    for (long i = 0; i <= count; ++i) {
      values.push_back(start + static_cast<double>(i) * step);
    }
  }
  if (values.empty()) {
    throw UsageError("grid: empty spec");
  }
  return values;
}

int run(const std::vector<std::string> & args, std::ostream & out, std::ostream & err)
{
  CLI::App app{"Lateral MPC and tube MPC studies for a single-track race car"};
  app.require_subcommand(1);
  app.footer(
    "Exit codes: 0 clean, 1 config or usage error, 2 collision, 3 infeasible step, 4 no grid point passes.\n"
    "APEX_THREADS caps Monte Carlo worker threads (0 = one per core).");

  std::string config_path;
  std::string out_dir = ".";
  bool plot = false;

  auto * simulate = app.add_subcommand("simulate", "Run one closed-loop scenario and write trace.csv");
  std::optional<std::uint64_t> seed_override;
  simulate->add_option("config", config_path, "Scenario config file")->required();
  simulate->add_option("--out", out_dir, "Output directory");
  simulate->add_flag("--plot", plot, "Also write trajectory.svg");
  simulate->add_option("--seed", seed_override, "Override the scenario seed");

  auto * sweep = app.add_subcommand("sweep", "Frequency or perception-distance study; writes sweep.csv and sweep.svg");
  std::string mode;
  std::string grid;
  sweep->add_option("config", config_path, "Scenario config file")->required();
  sweep->add_option("--mode", mode, "frequency (grid in Hz) or perception (grid in m/s)")
    ->required()
    ->check(CLI::IsMember({"frequency", "perception"}));
  sweep->add_option("--grid", grid, "Comma-separated values or start:step:end ranges")->required();
  sweep->add_option("--out", out_dir, "Output directory");

  auto * mc = app.add_subcommand("montecarlo", "Monte Carlo over sampled actuator lag and delay");
  int runs = 1000;
  std::uint64_t seed = 1;
  mc->add_option("config", config_path, "Scenario config file")->required();
  mc->add_option("--runs", runs, "Number of runs")->check(CLI::PositiveNumber);
  mc->add_option("--seed", seed, "Global seed");
  mc->add_option("--out", out_dir, "Output directory");
  mc->add_flag("--plot", plot, "Also write envelope.svg");

  auto * inv = app.add_subcommand("invariant-set", "Design the tube and dump the invariant set iterates");
  inv->add_option("config", config_path, "Scenario config file")->required();
  inv->add_option("--out", out_dir, "Output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kClean : kConfigError;
  }

  try {
    if (simulate->parsed()) {
      return cmd_simulate(config_path, out_dir, plot, seed_override, out);
    }
    if (sweep->parsed()) {
      return cmd_sweep(config_path, mode, grid, out_dir, out);
    }
    if (mc->parsed()) {
      return cmd_montecarlo(config_path, runs, seed, out_dir, plot, out);
    }
    return cmd_invariant_set(config_path, out_dir, out);
  } catch (const config::ConfigError & e) {
    err << "config error: " << e.what() << '\n';
  } catch (const UsageError & e) {
    err << "usage error: " << e.what() << '\n';
  } catch (const Error & e) {
    err << "error: " << e.what() << '\n';
  } catch (const fs::filesystem_error & e) {
    err << "error: " << e.what() << '\n';
  }
  return kConfigError;
}

}  // namespace apex::cli
