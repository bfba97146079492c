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

#include "apex/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

namespace apex::config
{

namespace
{

constexpr double kDeg = std::numbers::pi / 180.0;

std::string located(const std::string & source, int line, const std::string & message)
{
  std::ostringstream out;
  out << source;
  if (line > 0) {
    out << ':' << line;
  }
  out << ": " << message;
  return out.str();
}

std::string trim(const std::string & s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool valid_key(const std::string & key)
{
  return !key.empty() && std::all_of(key.begin(), key.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

// words separated by single spaces, e.g. "obstacle slow"
std::string normalise_section(const std::string & raw)
{
  std::istringstream words(raw);
  std::string word;
  std::string out;
  while (words >> word) {
    out += out.empty() ? word : " " + word;
  }
  return out;
}

[[noreturn]] void fail(const Entry & e, const std::string & key, const std::string & what)
{
  throw ConfigError(e.source, e.line, "key '" + key + "' = " + e.value + ": " + what);
}

struct Range
{
  double lo;
  double hi;
  bool lo_open;
  bool hi_open;
};

constexpr Range positive{0.0, INFINITY, true, true};
constexpr Range nonnegative{0.0, INFINITY, false, true};
constexpr Range finite{-INFINITY, INFINITY, true, true};

double number(const Entry & e, const std::string & key, Range r)
{
  double v = 0.0;
  const char * first = e.value.data();
  const char * last = first + e.value.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    fail(e, key, "expected a finite number");
  }
  const bool below = r.lo_open ? !(v > r.lo) : !(v >= r.lo);
  const bool above = r.hi_open ? !(v < r.hi) : !(v <= r.hi);
  if (below || above) {
    std::ostringstream msg;
    msg << "must lie in " << (r.lo_open ? '(' : '[') << r.lo << ", " << r.hi << (r.hi_open ? ')' : ']');
    fail(e, key, msg.str());
  }
  return v;
}

std::uint64_t unsigned_integer(const Entry & e, const std::string & key)
{
  std::uint64_t v = 0;
  const char * first = e.value.data();
  const char * last = first + e.value.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    fail(e, key, "expected a nonnegative integer");
  }
  return v;
}

bool boolean(const Entry & e, const std::string & key)
{
  if (e.value == "true") {
    return true;
  }
  if (e.value == "false") {
    return false;
  }
  fail(e, key, "expected true or false");
}

using Scenario = scenarios::Scenario;
using Apply = std::function<void(Scenario &, const Entry &, const std::string &)>;
using Table = std::map<std::string, Apply>;

Apply num(Range r, std::function<void(Scenario &, double)> set)
{
  return [r, set](Scenario & sc, const Entry & e, const std::string & key) { set(sc, number(e, key, r)); };
}

Table vehicle_table()
{
  auto tire = [](bool front, char which) {
    const Range r = which == 'C' ? Range{0.0, 3.0, true, true} : which == 'E' ? Range{-INFINITY, 1.0, true, false} : positive;
    return num(r, [front, which](Scenario & sc, double v) {
      auto & t = front ? sc.vehicle.front_tire : sc.vehicle.rear_tire;
      (which == 'B' ? t.B : which == 'C' ? t.C : which == 'D' ? t.D : t.E) = v;
    });
  };
  return {
    {"mass", num(positive, [](Scenario & sc, double v) { sc.vehicle.mass = v; })},
    {"yaw_inertia", num(positive, [](Scenario & sc, double v) { sc.vehicle.yaw_inertia = v; })},
    {"cg_to_front", num(positive, [](Scenario & sc, double v) { sc.vehicle.cg_to_front = v; })},
    {"cg_to_rear", num(positive, [](Scenario & sc, double v) { sc.vehicle.cg_to_rear = v; })},
    {"front_axle_load", num(positive, [](Scenario & sc, double v) { sc.vehicle.front_axle_load = v; })},
    {"rear_axle_load", num(positive, [](Scenario & sc, double v) { sc.vehicle.rear_axle_load = v; })},
    {"front_b", tire(true, 'B')},
    {"front_c", tire(true, 'C')},
    {"front_d", tire(true, 'D')},
    {"front_e", tire(true, 'E')},
    {"rear_b", tire(false, 'B')},
    {"rear_c", tire(false, 'C')},
    {"rear_d", tire(false, 'D')},
    {"rear_e", tire(false, 'E')},
    {"max_slip_deg", num({0.0, 30.0, true, false}, [](Scenario & sc, double v) { sc.vehicle.max_slip = v * kDeg; })},
    // stored as a column angle once the ratio is known
    {"max_roadwheel_deg", num({0.0, 60.0, true, false}, [](Scenario & sc, double v) { sc.vehicle.max_steer = v * kDeg; })},
    {"steering_ratio", num(positive, [](Scenario & sc, double v) { sc.vehicle.steering_ratio = v; })},
    {"width", num({0.0, 5.0, true, false}, [](Scenario & sc, double v) { sc.vehicle.width = v; })},
    {"speed_gain", num(positive, [](Scenario & sc, double v) { sc.vehicle.speed_gain = v; })},
  };
}

Table scenario_table()
{
  return {
    {"speed", num({0.0, 150.0, true, false}, [](Scenario & sc, double v) { sc.u0 = v; })},
    {"track_y_min", num(finite, [](Scenario & sc, double v) { sc.track_y_min = v; })},
    {"track_y_max", num(finite, [](Scenario & sc, double v) { sc.track_y_max = v; })},
    {"initial_y", num(finite, [](Scenario & sc, double v) { sc.initial_y = v; })},
    {"y_ref", num(finite, [](Scenario & sc, double v) { sc.y_ref = v; })},
    {"duration", num({0.0, 600.0, true, false}, [](Scenario & sc, double v) { sc.duration = v; })},
    {"plant_dt", num({0.0, 0.01, true, false}, [](Scenario & sc, double v) { sc.plant_dt = v; })},
    {"seed", [](Scenario & sc, const Entry & e, const std::string & k) { sc.seed = unsigned_integer(e, k); }},
    {"plant",
     [](Scenario & sc, const Entry & e, const std::string & k) {
       using scenarios::PlantFidelity;
       for (const auto p : {PlantFidelity::LinearIdeal, PlantFidelity::NonlinearIdeal, PlantFidelity::NonlinearWithActuator}) {
         if (e.value == scenarios::to_string(p)) {
           sc.plant = p;
           return;
         }
       }
       fail(e, k, "expected linear, nonlinear or actuator");
     }},
    {"controller",
     [](Scenario & sc, const Entry & e, const std::string & k) {
       using scenarios::ControllerKind;
       for (const auto c : {ControllerKind::NominalMpc, ControllerKind::TubeMpc}) {
         if (e.value == scenarios::to_string(c)) {
           sc.controller = c;
           return;
         }
       }
       fail(e, k, "expected nominal or tube");
     }},
  };
}

Table control_table()
{
  return {
    {"frequency", num({0.0, 1000.0, true, false}, [](Scenario & sc, double v) { sc.control_frequency = v; })},
    {"preview_time", num({0.0, 10.0, true, false}, [](Scenario & sc, double v) { sc.preview_time = v; })},
    {"weight_y", num(nonnegative, [](Scenario & sc, double v) { sc.output_weight(0, 0) = v; })},
    {"weight_yaw", num(nonnegative, [](Scenario & sc, double v) { sc.output_weight(1, 1) = v; })},
    {"weight_steer", num(positive, [](Scenario & sc, double v) { sc.control_weight = v; })},
    {"terminal_scale", num(nonnegative, [](Scenario & sc, double v) { sc.terminal_scale = v; })},
  };
}

Table disturbance_table()
{
  return {
    {"force", num({-1e5, 1e5, false, false}, [](Scenario & sc, double v) { sc.disturbance.force = v; })},
    {"start", num(nonnegative, [](Scenario & sc, double v) { sc.disturbance.start = v; })},
    {"duration", num(nonnegative, [](Scenario & sc, double v) { sc.disturbance.duration = v; })},
  };
}

Table tube_table()
{
  return {
    {"tau_min", num({0.0, 5.0, true, false}, [](Scenario & sc, double v) { sc.tube.actuator.tau_min = v; })},
    {"tau_max", num({0.0, 5.0, true, false}, [](Scenario & sc, double v) { sc.tube.actuator.tau_max = v; })},
    {"delay_min", num({0.0, 1.0, false, false}, [](Scenario & sc, double v) { sc.tube.actuator.delay_min = v; })},
    {"delay_max", num({0.0, 1.0, false, false}, [](Scenario & sc, double v) { sc.tube.actuator.delay_max = v; })},
    {"vertices",
     [](Scenario & sc, const Entry & e, const std::string & k) {
       const auto v = unsigned_integer(e, k);
       if (v != 1 && v != 4) {
         fail(e, k, "must be 1 (midpoint) or 4 (corners)");
       }
       sc.tube.vertices = static_cast<int>(v);
     }},
    {"pole_scale", num({0.0, 1.0, true, true}, [](Scenario & sc, double v) { sc.tube.pole_scale = v; })},
    {"steer_envelope_deg", num({0.0, 360.0, true, false}, [](Scenario & sc, double v) { sc.tube.steer_envelope = v * kDeg; })},
    {"yaw_box_deg", num({0.0, 180.0, true, false}, [](Scenario & sc, double v) { sc.tube.yaw_box = v * kDeg; })},
    {"yaw_rate_box_deg", num(positive, [](Scenario & sc, double v) { sc.tube.yaw_rate_box = v * kDeg; })},
    {"sideslip_box_deg", num({0.0, 90.0, true, false}, [](Scenario & sc, double v) { sc.tube.sideslip_box = v * kDeg; })},
    {"invariant_tol", num({0.0, 1.0, true, true}, [](Scenario & sc, double v) { sc.tube.invariant.tol = v; })},
    {"invariant_max_iterations",
     [](Scenario & sc, const Entry & e, const std::string & k) {
       const auto v = unsigned_integer(e, k);
       if (v < 1 || v > 100000) {
         fail(e, k, "must lie in [1, 100000]");
       }
       sc.tube.invariant.max_iterations = static_cast<int>(v);
     }},
    {"max_generators",
     [](Scenario & sc, const Entry & e, const std::string & k) {
       const auto v = unsigned_integer(e, k);
       if (v < 6) {
         fail(e, k, "must be at least the state dimension (6)");
       }
       sc.tube.invariant.max_generators = static_cast<Eigen::Index>(v);
     }},
  };
}

Table actuator_table()
{
  auto fixed = [](bool lag) {
    return [lag](Scenario & sc, const Entry & e, const std::string & k) {
      const double v = number(e, k, lag ? Range{0.0, 5.0, true, false} : Range{0.0, 1.0, false, false});
      if (!sc.realization) {
        sc.realization = actuation::ActuatorRealization{};
      }
      (lag ? sc.realization->tau : sc.realization->delay) = v;
    };
  };
  return {
    {"tau_min", num({0.0, 5.0, true, false}, [](Scenario & sc, double v) { sc.actuator.tau_min = v; })},
    {"tau_max", num({0.0, 5.0, true, false}, [](Scenario & sc, double v) { sc.actuator.tau_max = v; })},
    {"delay_min", num({0.0, 1.0, false, false}, [](Scenario & sc, double v) { sc.actuator.delay_min = v; })},
    {"delay_max", num({0.0, 1.0, false, false}, [](Scenario & sc, double v) { sc.actuator.delay_max = v; })},
    {"freeze_tau", [](Scenario & sc, const Entry & e, const std::string & k) { sc.actuator.freeze_tau = boolean(e, k); }},
    {"freeze_delay", [](Scenario & sc, const Entry & e, const std::string & k) { sc.actuator.freeze_delay = boolean(e, k); }},
    {"tau", fixed(true)},
    {"delay", fixed(false)},
  };
}

const Entry * find(const std::map<std::string, Entry> & keys, const std::string & key)
{
  const auto it = keys.find(key);
  return it == keys.end() ? nullptr : &it->second;
}

void apply(Scenario & sc, const std::string & section, const std::map<std::string, Entry> & keys, const Table & table)
{
  for (const auto & [key, entry] : keys) {
    const auto it = table.find(key);
    if (it == table.end()) {
      throw ConfigError(entry.source, entry.line, "unknown key '" + key + "' in [" + section + "]");
    }
    it->second(sc, entry, key);
  }
}

mpc::ObstacleBox obstacle(const std::string & section, const std::map<std::string, Entry> & keys, const std::string & source)
{
  mpc::ObstacleBox o;
  const std::map<std::string, double mpc::ObstacleBox::*> fields{
    {"x_min", &mpc::ObstacleBox::x_min}, {"x_max", &mpc::ObstacleBox::x_max},
    {"y_min", &mpc::ObstacleBox::y_min}, {"y_max", &mpc::ObstacleBox::y_max},
    {"speed", &mpc::ObstacleBox::speed}};
  for (const auto & [key, entry] : keys) {
    const auto it = fields.find(key);
    if (it == fields.end()) {
      throw ConfigError(entry.source, entry.line, "unknown key '" + key + "' in [" + section + "]");
    }
    o.*(it->second) = number(entry, key, key == "speed" ? Range{0.0, 150.0, false, false} : finite);
  }
  for (const char * required : {"x_min", "x_max", "y_min", "y_max"}) {
    if (!find(keys, required)) {
      throw ConfigError(source, 0, "[" + section + "] needs key '" + required + "'");
    }
  }
  if (!(o.x_max > o.x_min)) {
    fail(keys.at("x_max"), "x_max", "must exceed x_min");
  }
  if (!(o.y_max > o.y_min)) {
    fail(keys.at("y_max"), "y_max", "must exceed y_min");
  }
  return o;
}

void merge(Document & into, const Document & from)
{
  for (const auto & name : from.order) {
    if (!into.sections.count(name)) {
      into.order.push_back(name);
    }
    auto & keys = into.sections[name];
    for (const auto & [key, entry] : from.sections.at(name)) {
      keys[key] = entry;
    }
  }
}

Document parse_impl(std::istream & in, const std::string & source, const std::filesystem::path * dir, int depth)
{
  if (depth > 8) {
    throw ConfigError(source, 0, "include nesting too deep");
  }
  Document doc;
  Document own;
  own.order.push_back("");
  own.sections[""];
  std::string current;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) {
      continue;
    }
    if (text.front() == '[') {
      if (text.back() != ']') {
        throw ConfigError(source, line, "unterminated section header");
      }
      current = normalise_section(text.substr(1, text.size() - 2));
      if (current.empty()) {
        throw ConfigError(source, line, "empty section name");
      }
      if (own.sections.count(current)) {
        throw ConfigError(source, line, "duplicate section [" + current + "]");
      }
      own.order.push_back(current);
      own.sections[current];
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source, line, "expected 'key = value'");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (!valid_key(key)) {
      throw ConfigError(source, line, "invalid key '" + key + "'");
    }
    if (value.empty()) {
      throw ConfigError(source, line, "key '" + key + "' has no value");
    }
    auto & keys = own.sections[current];
    if (keys.count(key)) {
      throw ConfigError(source, line, "duplicate key '" + key + "'");
    }
    if (current.empty() && key == "include") {
      if (!dir) {
        throw ConfigError(source, line, "include needs a file-based config");
      }
      const std::filesystem::path target = *dir / value;
      std::ifstream file(target);
      if (!file) {
        throw ConfigError(source, line, "cannot open include '" + value + "'");
      }
      const std::filesystem::path sub = target.parent_path();
      merge(doc, parse_impl(file, target.string(), &sub, depth + 1));
      continue;
    }
    keys[key] = Entry{value, source, line};
  }
  merge(doc, own);
  if (doc.sections.count("") && doc.sections.at("").empty()) {
    doc.sections.erase("");
    doc.order.erase(std::find(doc.order.begin(), doc.order.end(), std::string()));
  }
  return doc;
}

}  // namespace

ConfigError::ConfigError(const std::string & source, int line, const std::string & message)
: Error(located(source, line, message)), source_(source), line_(line)
{
}

const std::map<std::string, Entry> * Document::section(const std::string & name) const
{
  const auto it = sections.find(name);
  return it == sections.end() ? nullptr : &it->second;
}

Document parse(std::istream & in, const std::string & source)
{
  return parse_impl(in, source, nullptr, 0);
}

Document load(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path.string(), 0, "cannot open config file");
  }
  const std::filesystem::path dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  return parse_impl(in, path.string(), &dir, 0);
}

scenarios::Scenario to_scenario(const Document & doc)
{
  Scenario sc;
  const std::map<std::string, Table> tables{
    {"vehicle", vehicle_table()}, {"scenario", scenario_table()}, {"control", control_table()},
    {"disturbance", disturbance_table()}, {"tube", tube_table()}, {"actuator", actuator_table()}};
  std::string source = "config";
  const Entry * roadwheel = nullptr;
  for (const auto & name : doc.order) {
    const auto & keys = doc.sections.at(name);
    if (!keys.empty()) {
      source = keys.begin()->second.source;
    }
    if (name.empty()) {
      const auto & first = keys.begin()->second;
      throw ConfigError(first.source, first.line, "key '" + keys.begin()->first + "' outside any section");
    }
    if (name == "obstacle" || name.rfind("obstacle ", 0) == 0) {
      sc.obstacles.push_back(obstacle(name, keys, source));
      continue;
    }
    const auto table = tables.find(name);
    if (table == tables.end()) {
      const int line = keys.empty() ? 0 : keys.begin()->second.line;
      throw ConfigError(source, line, "unknown section [" + name + "]");
    }
    apply(sc, name, keys, table->second);
    if (name == "vehicle") {
      roadwheel = find(keys, "max_roadwheel_deg");
    }
  }
  if (roadwheel) {
    sc.vehicle.max_steer *= sc.vehicle.steering_ratio;
  }

  auto key_of = [&](const char * section, const char * key) -> const Entry * {
    const auto * keys = doc.section(section);
    return keys ? find(*keys, key) : nullptr;
  };
  auto cross = [&](bool ok, const char * section, const char * key, const std::string & what) {
    if (ok) {
      return;
    }
    if (const Entry * e = key_of(section, key)) {
      fail(*e, key, what);
    }
    throw ConfigError(source, 0, std::string("[") + section + "] " + key + ": " + what);
  };
  const double weight = sc.vehicle.mass * dynamics::kGravity;
  cross(
    std::abs(sc.vehicle.front_axle_load + sc.vehicle.rear_axle_load - weight) <= 0.01 * weight, "vehicle",
    "rear_axle_load", "axle loads must sum to mass * g within 1%");
  cross(sc.track_y_max - sc.track_y_min > sc.vehicle.width, "scenario", "track_y_max", "track must be wider than the vehicle");
  cross(
    sc.initial_y >= sc.corridor_min() && sc.initial_y <= sc.corridor_max(), "scenario", "initial_y",
    "must leave half the vehicle width to the track edges");
  cross(sc.y_ref >= sc.corridor_min() && sc.y_ref <= sc.corridor_max(), "scenario", "y_ref", "must lie inside the track corridor");
  cross(sc.tube.actuator.tau_max >= sc.tube.actuator.tau_min, "tube", "tau_max", "must be at least tau_min");
  cross(sc.tube.actuator.delay_max >= sc.tube.actuator.delay_min, "tube", "delay_max", "must be at least delay_min");
  cross(sc.actuator.tau_max >= sc.actuator.tau_min, "actuator", "tau_max", "must be at least tau_min");
  cross(sc.actuator.delay_max >= sc.actuator.delay_min, "actuator", "delay_max", "must be at least delay_min");
  cross(
    !sc.realization || (key_of("actuator", "tau") && key_of("actuator", "delay")), "actuator", "tau",
    "a fixed realization needs both tau and delay");
  cross(!sc.realization || sc.realization->tau >= sc.plant_dt, "actuator", "tau", "must be at least the plant step");
  cross(sc.tube.steer_envelope <= sc.vehicle.max_steer, "tube", "steer_envelope_deg", "must not exceed the steering limit");

  try {
    sc.validate();
  } catch (const ConditioningError & e) {
    cross(false, "control", "frequency", std::string("below the discretization floor (") + e.what() + ")");
  } catch (const Error & e) {
    if (std::string(e.what()).find("divide") != std::string::npos) {
      cross(false, "scenario", "plant_dt", "must divide the control period");
    }
    throw ConfigError(source, 0, e.what());
  }
  return sc;
}

scenarios::Scenario load_scenario(const std::filesystem::path & path)
{
  return to_scenario(load(path));
}

}  // namespace apex::config
