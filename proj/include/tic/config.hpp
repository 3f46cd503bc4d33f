// Copyright 2026 The TIC Lab Authors
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

// Experiment configuration as `key = value` text. Blank lines and anything
// after '#' are ignored. `task` and `condition` select presets first; every
// other key then overrides a single field. Angles are written in degrees.
// Vector values are comma separated.

#ifndef TIC_CONFIG_HPP_
#define TIC_CONFIG_HPP_

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "tic/common.hpp"
#include "tic/harness.hpp"

namespace tic {

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return x;
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return x;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return x;
}

inline int to_count(const std::string& key, const std::string& v) {
  const auto x = to_int(key, v);
  if (x < -1000000000 || x > 1000000000) throw ConfigError("config: '" + key + "' out of range");
  return static_cast<int>(x);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

inline Vec3 to_vec3(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 3) throw ConfigError("config: '" + key + "' expects 3 values");
  return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
}

inline Eigen::Vector4d to_vec4(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 4) throw ConfigError("config: '" + key + "' expects 4 values");
  return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2]),
          to_double(key, parts[3])};
}

inline std::string num(double x) { return fmt::format("{}", x); }

template <class V>
std::string join(const V& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  using C = ExperimentConfig;
  using S = std::string;
  static const std::map<std::string, Setter> table = {
      {"initial_yaw_deg", [](C& c, const S& k, const S& v) { c.initial_yaw = deg_to_rad(to_double(k, v)); }},
      {"phi_des_deg", [](C& c, const S& k, const S& v) { c.phi_des = deg_to_rad(to_double(k, v)); }},
      {"tolerance_deg", [](C& c, const S& k, const S& v) { c.tolerance = deg_to_rad(to_double(k, v)); }},
      {"n_trials", [](C& c, const S& k, const S& v) { c.n_trials = to_count(k, v); }},
      {"max_rollouts", [](C& c, const S& k, const S& v) { c.max_rollouts = to_count(k, v); }},
      {"episode_ticks", [](C& c, const S& k, const S& v) { c.episode_ticks = to_count(k, v); }},
      {"hold_ticks", [](C& c, const S& k, const S& v) { c.hold_ticks = to_count(k, v); }},
      {"vision_period", [](C& c, const S& k, const S& v) { c.vision_period = to_count(k, v); }},
      {"reactive_enabled", [](C& c, const S& k, const S& v) { c.reactive_enabled = to_bool(k, v); }},
      {"master_seed", [](C& c, const S& k, const S& v) { c.master_seed = to_uint(k, v); }},
      {"seeds",
       [](C& c, const S& k, const S& v) {
         c.seeds.clear();
         if (v.empty()) return;
         for (const auto& p : split(v, ',')) c.seeds.push_back(to_uint(k, p));
       }},
      {"horizon", [](C& c, const S& k, const S& v) { c.horizon = to_count(k, v); }},
      {"particles", [](C& c, const S& k, const S& v) { c.particles = to_count(k, v); }},
      {"search_max_iterations", [](C& c, const S& k, const S& v) { c.search_max_iterations = to_count(k, v); }},
      {"search_fd_step", [](C& c, const S& k, const S& v) { c.search_fd_step = to_double(k, v); }},
      {"search_max_step", [](C& c, const S& k, const S& v) { c.search_max_step = to_double(k, v); }},
      {"gp_restarts", [](C& c, const S& k, const S& v) { c.gp_restarts = to_count(k, v); }},
      {"gp_max_iterations", [](C& c, const S& k, const S& v) { c.gp_max_iterations = to_count(k, v); }},
      {"max_training_points", [](C& c, const S& k, const S& v) { c.max_training_points = to_count(k, v); }},
      {"random_policy_spread", [](C& c, const S& k, const S& v) { c.random_policy_spread = to_double(k, v); }},
      {"plant.contact_positions", [](C& c, const S& k, const S& v) { c.plant.contact_positions = to_vec3(k, v); }},
      {"plant.motor_lo",
       [](C& c, const S& k, const S& v) {
         const Vec3 lo = to_vec3(k, v);
         for (int i = 0; i < kFingers; ++i) c.plant.motor_bounds[i].lo = lo[i];
       }},
      {"plant.motor_hi",
       [](C& c, const S& k, const S& v) {
         const Vec3 hi = to_vec3(k, v);
         for (int i = 0; i < kFingers; ++i) c.plant.motor_bounds[i].hi = hi[i];
       }},
      {"plant.force_gain", [](C& c, const S& k, const S& v) { c.plant.force_gain = to_double(k, v); }},
      {"plant.force_saturation", [](C& c, const S& k, const S& v) { c.plant.force_saturation = to_double(k, v); }},
      {"plant.rotation_gain", [](C& c, const S& k, const S& v) { c.plant.rotation_gain = to_double(k, v); }},
      {"plant.slip_drift_rate", [](C& c, const S& k, const S& v) { c.plant.slip_drift_rate = to_double(k, v); }},
      {"plant.slip_fall_ticks", [](C& c, const S& k, const S& v) { c.plant.slip_fall_ticks = to_count(k, v); }},
      {"plant.quick_fall_ticks", [](C& c, const S& k, const S& v) { c.plant.quick_fall_ticks = to_count(k, v); }},
      {"plant.process_noise_std", [](C& c, const S& k, const S& v) { c.plant.process_noise_std = to_vec4(k, v); }},
      {"plant.tick_duration", [](C& c, const S& k, const S& v) { c.plant.tick_duration = to_double(k, v); }},
      {"plant.servo_rate", [](C& c, const S& k, const S& v) { c.plant.servo_rate = to_double(k, v); }},
      {"plant.grip_offset", [](C& c, const S& k, const S& v) { c.plant.grip_offset = to_double(k, v); }},
      {"plant.firm_threshold", [](C& c, const S& k, const S& v) { c.plant.grip_classes.firm_threshold = to_double(k, v); }},
      {"plant.slip_threshold", [](C& c, const S& k, const S& v) { c.plant.grip_classes.slip_threshold = to_double(k, v); }},
      {"plant.force_scale", [](C& c, const S& k, const S& v) { c.plant.grip_classes.force_scale = to_double(k, v); }},
      {"plant.rng_seed", [](C& c, const S& k, const S& v) { c.plant.rng_seed = to_uint(k, v); }},
      {"calibration.alpha_des", [](C& c, const S& k, const S& v) { c.calibration.alpha_des = to_double(k, v); }},
      {"calibration.firm_threshold", [](C& c, const S& k, const S& v) { c.calibration.firm_threshold = to_double(k, v); }},
      {"calibration.slip_threshold", [](C& c, const S& k, const S& v) { c.calibration.slip_threshold = to_double(k, v); }},
      {"calibration.force_scale", [](C& c, const S& k, const S& v) { c.calibration.force_scale = to_double(k, v); }},
      {"gain.k", [](C& c, const S& k, const S& v) { c.gain.k = to_vec3(k, v); }},
      {"cost.f_des", [](C& c, const S& k, const S& v) { c.cost.f_des = to_vec3(k, v); }},
      {"cost.lambda1", [](C& c, const S& k, const S& v) { c.cost.lambda1 = to_double(k, v); }},
      {"cost.lambda2", [](C& c, const S& k, const S& v) { c.cost.lambda2 = to_double(k, v); }},
  };
  return table;
}

}  // namespace config_detail

// Parses config text; unknown keys, duplicates and malformed values are
// ConfigErrors. The result is validated.
inline ExperimentConfig parse_config(std::string_view text) {
  using namespace config_detail;
  std::map<std::string, std::string> values;
  std::vector<std::string> order;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (key != "task" && key != "condition" && !setters().contains(key)) {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!values.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    order.push_back(key);
  }

  ExperimentConfig cfg;
  apply_task(cfg, values.contains("task") ? task_from_string(values["task"]) : Task::Cup);
  apply_condition(cfg, values.contains("condition") ? cost_variant_from_string(values["condition"])
                                                    : CostVariant::Synergy);
  for (const auto& key : order) {
    if (key == "task" || key == "condition") continue;
    setters().at(key)(cfg, key, values[key]);
  }
  cfg.sync_cost();
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

// Complete snapshot; parse_config(serialize_config(c)) reproduces c.
inline std::string serialize_config(const ExperimentConfig& c) {
  using config_detail::join;
  using config_detail::num;
  std::string s;
  auto put = [&s](std::string_view k, const std::string& v) {
    s += fmt::format("{} = {}\n", k, v);
  };
  Vec3 lo, hi;
  for (int i = 0; i < kFingers; ++i) {
    lo[i] = c.plant.motor_bounds[i].lo;
    hi[i] = c.plant.motor_bounds[i].hi;
  }
  std::string seeds;
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    seeds += (i ? ", " : "") + std::to_string(c.seeds[i]);
  }
  put("condition", std::string(to_string(c.condition)));
  put("task", std::string(to_string(c.task)));
  put("initial_yaw_deg", num(rad_to_deg(c.initial_yaw)));
  put("phi_des_deg", num(rad_to_deg(c.phi_des)));
  put("tolerance_deg", num(rad_to_deg(c.tolerance)));
  put("n_trials", std::to_string(c.n_trials));
  put("max_rollouts", std::to_string(c.max_rollouts));
  put("episode_ticks", std::to_string(c.episode_ticks));
  put("hold_ticks", std::to_string(c.hold_ticks));
  put("vision_period", std::to_string(c.vision_period));
  put("reactive_enabled", c.reactive_enabled ? "true" : "false");
  put("master_seed", std::to_string(c.master_seed));
  put("seeds", seeds);
  put("horizon", std::to_string(c.horizon));
  put("particles", std::to_string(c.particles));
  put("search_max_iterations", std::to_string(c.search_max_iterations));
  put("search_fd_step", num(c.search_fd_step));
  put("search_max_step", num(c.search_max_step));
  put("gp_restarts", std::to_string(c.gp_restarts));
  put("gp_max_iterations", std::to_string(c.gp_max_iterations));
  put("max_training_points", std::to_string(c.max_training_points));
  put("random_policy_spread", num(c.random_policy_spread));
  put("plant.contact_positions", join(c.plant.contact_positions));
  put("plant.motor_lo", join(lo));
  put("plant.motor_hi", join(hi));
  put("plant.force_gain", num(c.plant.force_gain));
  put("plant.force_saturation", num(c.plant.force_saturation));
  put("plant.rotation_gain", num(c.plant.rotation_gain));
  put("plant.slip_drift_rate", num(c.plant.slip_drift_rate));
  put("plant.slip_fall_ticks", std::to_string(c.plant.slip_fall_ticks));
  put("plant.quick_fall_ticks", std::to_string(c.plant.quick_fall_ticks));
  put("plant.process_noise_std", join(c.plant.process_noise_std));
  put("plant.tick_duration", num(c.plant.tick_duration));
  put("plant.servo_rate", num(c.plant.servo_rate));
  put("plant.grip_offset", num(c.plant.grip_offset));
  put("plant.firm_threshold", num(c.plant.grip_classes.firm_threshold));
  put("plant.slip_threshold", num(c.plant.grip_classes.slip_threshold));
  put("plant.force_scale", num(c.plant.grip_classes.force_scale));
  put("plant.rng_seed", std::to_string(c.plant.rng_seed));
  put("calibration.alpha_des", num(c.calibration.alpha_des));
  put("calibration.firm_threshold", num(c.calibration.firm_threshold));
  put("calibration.slip_threshold", num(c.calibration.slip_threshold));
  put("calibration.force_scale", num(c.calibration.force_scale));
  put("gain.k", join(c.gain.k));
  put("cost.f_des", join(c.cost.f_des));
  put("cost.lambda1", num(c.cost.lambda1));
  put("cost.lambda2", num(c.cost.lambda2));
  return s;
}

}  // namespace tic

#endif  // TIC_CONFIG_HPP_
