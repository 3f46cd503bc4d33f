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

// Plain-text and CSV readers/writers. Numbers are written in shortest
// round-trip form so reruns produce identical bytes.

#ifndef TIC_IO_HPP_
#define TIC_IO_HPP_

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tic/config.hpp"
#include "tic/gp.hpp"
#include "tic/harness.hpp"
#include "tic/reactive.hpp"

namespace tic {

namespace io_detail {

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  return fmt::format("{}", x);
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
  if (!f) throw Error("failed writing '" + path + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CalibrationError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace io_detail

// CSV with header `f1,f2,f3,label`; labels are firmly_held, not_firmly_held
// or slipped.
inline std::vector<LabeledForceSample> parse_calibration_samples(const std::string& text) {
  using config_detail::split;
  using config_detail::trim;
  std::istringstream in(text);
  std::string line;
  std::vector<LabeledForceSample> out;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    if (!header) {
      if (body != "f1,f2,f3,label") {
        throw CalibrationError("calibration CSV: expected header 'f1,f2,f3,label'");
      }
      header = true;
      continue;
    }
    const auto cells = split(body, ',');
    if (cells.size() != 4) {
      throw CalibrationError("calibration CSV line " + std::to_string(lineno) +
                             ": expected 4 columns");
    }
    LabeledForceSample s;
    try {
      for (int i = 0; i < kFingers; ++i) s.forces[i] = config_detail::to_double("f", cells[i]);
      s.label = slip_class_from_string(cells[3]);
    } catch (const ConfigError& e) {
      throw CalibrationError("calibration CSV line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(s);
  }
  if (out.empty()) throw CalibrationError("calibration CSV contains no samples");
  return out;
}

inline std::vector<LabeledForceSample> read_calibration_samples(const std::string& path) {
  return parse_calibration_samples(io_detail::read_file(path));
}

// Config fragment; can be pasted into an experiment config.
inline std::string format_calibration(const SlipCalibration& c) {
  using io_detail::num;
  return fmt::format(
      "calibration.alpha_des = {}\ncalibration.firm_threshold = {}\n"
      "calibration.slip_threshold = {}\ncalibration.force_scale = {}\n",
      num(c.alpha_des), num(c.firm_threshold), num(c.slip_threshold), num(c.force_scale));
}

inline void write_calibration(const std::string& path, const SlipCalibration& c) {
  io_detail::write_file(path, format_calibration(c));
}

inline std::string trace_csv(const RolloutTrace& trace) {
  using io_detail::num;
  std::string s =
      "tick,yaw,f1,f2,f3,up1,up2,up3,ur1,ur2,ur3,u1,u2,u3,alpha,energy,cost,grip,event\n";
  for (const auto& t : trace.ticks) {
    s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", t.tick,
                     num(t.x.yaw), num(t.x.forces[0]), num(t.x.forces[1]), num(t.x.forces[2]),
                     num(t.u_p[0]), num(t.u_p[1]), num(t.u_p[2]), num(t.u_r[0]), num(t.u_r[1]),
                     num(t.u_r[2]), num(t.u[0]), num(t.u[1]), num(t.u[2]), num(t.alpha),
                     num(t.energy), num(t.cost), to_string(t.grip),
                     t.event == Event::Fell ? "fell" : "");
  }
  return s;
}

// One row per trial; empty cells after the last executed rollout.
inline std::string cost_matrix_csv(const ExperimentReport& rep) {
  std::string s = "trial,seed,verdict";
  for (int r = 1; r <= rep.max_rollouts; ++r) s += fmt::format(",r{}", r);
  s += "\n";
  for (std::size_t i = 0; i < rep.trials.size(); ++i) {
    const auto& t = rep.trials[i];
    s += fmt::format("{},{},{}", i + 1, t.seed, to_string(t.verdict));
    for (int r = 0; r < rep.max_rollouts; ++r) {
      s += ",";
      if (r < static_cast<int>(t.rollout_costs.size())) {
        s += io_detail::num(t.rollout_costs[static_cast<std::size_t>(r)]);
      }
    }
    s += "\n";
  }
  return s;
}

// Per-trial intervention counts plus a final `median` row.
inline std::string interventions_csv(const ExperimentReport& rep) {
  std::string s = "trial";
  for (int r = 1; r <= rep.max_rollouts; ++r) s += fmt::format(",r{}", r);
  s += "\n";
  for (std::size_t i = 0; i < rep.trials.size(); ++i) {
    const auto& t = rep.trials[i];
    s += std::to_string(i + 1);
    for (int r = 0; r < rep.max_rollouts; ++r) {
      s += ",";
      if (r < static_cast<int>(t.interventions.size())) {
        s += std::to_string(t.interventions[static_cast<std::size_t>(r)]);
      }
    }
    s += "\n";
  }
  s += "median";
  for (double m : rep.median_interventions()) s += "," + (std::isnan(m) ? "" : io_detail::num(m));
  s += "\n";
  return s;
}

inline std::string summary_line(const ExperimentReport& rep) {
  return fmt::format("success={}/{} slip={}/{}", rep.count(Verdict::TaskLearned), rep.n_trials(),
                     rep.count(Verdict::ObjectSlipped), rep.n_trials());
}

inline std::string summary_text(const ExperimentReport& rep) {
  std::string s = fmt::format("condition = {}\ntask = {}\n{}\n", to_string(rep.condition),
                              to_string(rep.task), summary_line(rep));
  for (std::size_t i = 0; i < rep.trials.size(); ++i) {
    const auto& t = rep.trials[i];
    s += fmt::format("trial {}: {} after {} rollouts", i + 1, to_string(t.verdict), t.rollouts);
    if (!t.final_yaws.empty()) {
      s += fmt::format(", final yaw {:.2f} deg", rad_to_deg(t.final_yaws.back()));
    }
    if (!t.diagnostic.empty()) s += " (" + t.diagnostic + ")";
    s += "\n";
  }
  return s;
}

inline std::string comparison_csv(const Comparison& cmp) {
  std::string s = "condition,trials,successes,slips,success_rate,slip_rate\n";
  for (const auto& r : cmp.rows) {
    s += fmt::format("{},{},{},{},{},{}\n", to_string(r.condition), r.n_trials, r.successes,
                     r.slips, io_detail::num(r.success_rate), io_detail::num(r.slip_rate));
  }
  return s;
}

inline std::string comparison_table(const Comparison& cmp) {
  std::string s = fmt::format("{:<16}{:>14}{:>12}\n", "condition", "success rate", "slip rate");
  for (const auto& r : cmp.rows) {
    s += fmt::format("{:<16}{:>13.0f}%{:>11.0f}%\n", to_string(r.condition),
                     100.0 * r.success_rate, 100.0 * r.slip_rate);
  }
  return s;
}

// A (row per finger), b and the motor bounds, one labelled line each.
inline std::string format_policy(const Policy& p) {
  using io_detail::num;
  std::string s = fmt::format("state_dim = {}\n", p.state_dim());
  for (int i = 0; i < kFingers; ++i) {
    s += fmt::format("A{} =", i + 1);
    for (Eigen::Index j = 0; j < p.A.cols(); ++j) s += " " + num(p.A(i, j));
    s += "\n";
  }
  s += fmt::format("b = {} {} {}\n", num(p.b[0]), num(p.b[1]), num(p.b[2]));
  for (int i = 0; i < kFingers; ++i) {
    s += fmt::format("bounds{} = {} {}\n", i + 1, num(p.bounds[i].lo), num(p.bounds[i].hi));
  }
  return s;
}

inline Policy parse_policy(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Policy p;
  std::vector<std::vector<double>> rows(kFingers);
  auto numbers = [](const std::string& rest) {
    std::istringstream ns(rest);
    std::vector<double> v;
    double x;
    while (ns >> x) v.push_back(x);
    return v;
  };
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = config_detail::trim(std::string_view(line).substr(0, eq));
    const auto v = numbers(line.substr(eq + 1));
    for (int i = 0; i < kFingers; ++i) {
      if (key == "A" + std::to_string(i + 1)) rows[i] = v;
      if (key == "bounds" + std::to_string(i + 1)) {
        if (v.size() != 2) throw ConfigError("policy: bounds need 2 values");
        p.bounds[i] = Interval{v[0], v[1]};
      }
    }
    if (key == "b") {
      if (v.size() != 3) throw ConfigError("policy: b needs 3 values");
      p.b = Vec3(v[0], v[1], v[2]);
    }
  }
  const auto n = rows[0].size();
  if (n == 0 || rows[1].size() != n || rows[2].size() != n) {
    throw ConfigError("policy: A rows missing or ragged");
  }
  p.A.resize(kFingers, static_cast<Eigen::Index>(n));
  for (int i = 0; i < kFingers; ++i) {
    for (std::size_t j = 0; j < n; ++j) p.A(i, static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  p.validate();
  return p;
}

inline std::string format_hyper(const std::vector<GPHyper>& hypers) {
  using io_detail::num;
  std::string s;
  for (std::size_t k = 0; k < hypers.size(); ++k) {
    const auto& h = hypers[k];
    s += fmt::format("output{}.length_scales =", k + 1);
    for (Eigen::Index j = 0; j < h.length_scales.size(); ++j) {
      s += " " + num(h.length_scales[j]);
    }
    s += fmt::format("\noutput{}.signal_variance = {}\noutput{}.noise_variance = {}\n", k + 1,
                     num(h.signal_variance), k + 1, num(h.noise_variance));
  }
  return s;
}

}  // namespace tic

#endif  // TIC_IO_HPP_
