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

// Learning protocol: rollouts on the plant, model refits, policy improvement,
// outcome classification and aggregation across trials and conditions.

#ifndef TIC_HARNESS_HPP_
#define TIC_HARNESS_HPP_

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <spdlog/spdlog.h>

#include "tic/common.hpp"
#include "tic/gp.hpp"
#include "tic/plant.hpp"
#include "tic/policy.hpp"
#include "tic/policy_search.hpp"
#include "tic/propagate.hpp"
#include "tic/reactive.hpp"

namespace tic {

enum class Task { Cup, Bottle, Custom };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::Cup: return "cup";
    case Task::Bottle: return "bottle";
    case Task::Custom: return "custom";
  }
  return "unknown";
}

inline Task task_from_string(std::string_view s) {
  if (s == "cup" || s == "Cup") return Task::Cup;
  if (s == "bottle" || s == "Bottle") return Task::Bottle;
  if (s == "custom" || s == "Custom") return Task::Custom;
  throw ConfigError("unknown task '" + std::string(s) + "'");
}

struct ExperimentConfig {
  CostVariant condition = CostVariant::Synergy;
  Task task = Task::Cup;
  double initial_yaw = 0.0;             // rad
  double phi_des = deg_to_rad(70.0);    // rad
  double tolerance = deg_to_rad(5.0);   // rad, half-width of the goal band
  int n_trials = 10;
  int max_rollouts = 11;
  int episode_ticks = 150;
  int hold_ticks = 1000;
  int vision_period = 10;  // ticks between policy updates
  bool reactive_enabled = true;
  std::uint64_t master_seed = 1;
  std::vector<std::uint64_t> seeds;  // per trial; derived from master_seed when empty

  // Learning machinery.
  int horizon = 0;  // model steps; 0 means episode_ticks / vision_period
  int particles = 40;
  int search_max_iterations = 30;
  double search_fd_step = 1e-4;
  double search_max_step = 0.1;  // normalized policy units per iteration
  int gp_restarts = 3;
  int max_training_points = 45;  // most recent transitions kept for fitting; 0 keeps all
  int gp_max_iterations = 60;
  double random_policy_spread = 1.0;

  PlantConfig plant{};
  SlipCalibration calibration{0.25, 0.3, 0.7, 2.0};
  ReactiveGain gain{};
  CostSpec cost{CostVariant::Synergy, deg_to_rad(70.0), Vec3::Constant(2.0), 0.5, 0.5, 0.25, 2.0};

  int model_horizon() const { return horizon > 0 ? horizon : episode_ticks / vision_period; }
  Eigen::Index state_dim() const { return condition == CostVariant::VisualOnly ? 1 : 4; }

  // Keeps the cost consistent with the condition, target and calibration.
  void sync_cost() {
    cost.variant = condition;
    cost.phi_des = phi_des;
    cost.alpha_des = calibration.alpha_des;
    cost.force_scale = calibration.force_scale;
  }

  std::vector<std::uint64_t> trial_seeds() const {
    if (!seeds.empty()) return seeds;
    std::vector<std::uint64_t> out;
    for (int i = 0; i < n_trials; ++i) {
      out.push_back(mix_seed(master_seed, static_cast<std::uint64_t>(i)));
    }
    return out;
  }

  void validate() const {
    plant.validate();
    calibration.validate();
    gain.validate();
    cost.validate();
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
    if (max_rollouts < 1) throw ConfigError("max_rollouts must be >= 1");
    if (n_trials < 0) throw ConfigError("n_trials must be >= 0");
    if (episode_ticks < 1 || hold_ticks < 0) throw ConfigError("episode/hold ticks out of range");
    if (vision_period < 1 || episode_ticks % vision_period != 0) {
      throw ConfigError("episode_ticks must be a positive multiple of vision_period");
    }
    if (!seeds.empty() && static_cast<int>(seeds.size()) != n_trials) {
      throw ConfigError("seeds list must have n_trials entries");
    }
    if (condition == CostVariant::Synergy && !reactive_enabled) {
      throw ConfigError("the synergy condition requires the reactive loop");
    }
    if (condition != CostVariant::Synergy && reactive_enabled) {
      throw ConfigError("visual-only and visuo-tactile conditions run without the reactive loop");
    }
    if (cost.variant != condition) throw ConfigError("cost variant must match the condition");
    if (particles < 1 || model_horizon() < 1) throw ConfigError("particles/horizon must be >= 1");
    if (!std::isfinite(initial_yaw) || !std::isfinite(phi_des)) {
      throw ConfigError("initial yaw and target must be finite");
    }
  }
};

inline void apply_task(ExperimentConfig& cfg, Task task) {
  cfg.task = task;
  switch (task) {
    case Task::Cup:
      cfg.initial_yaw = 0.0;
      cfg.phi_des = deg_to_rad(70.0);
      cfg.plant = PlantConfig{};
      break;
    case Task::Bottle:
      cfg.initial_yaw = deg_to_rad(70.0);
      cfg.phi_des = deg_to_rad(10.0);
      cfg.plant = PlantConfig{};
      // Smoother material: a loose grasp drifts faster and drops sooner.
      cfg.plant.slip_drift_rate = 0.003;
      cfg.plant.quick_fall_ticks = 20;
      break;
    case Task::Custom:
      break;
  }
  cfg.sync_cost();
}

inline void apply_condition(ExperimentConfig& cfg, CostVariant condition) {
  cfg.condition = condition;
  cfg.reactive_enabled = condition == CostVariant::Synergy;
  cfg.sync_cost();
}

inline ExperimentConfig make_config(CostVariant condition, Task task) {
  ExperimentConfig cfg;
  apply_task(cfg, task);
  apply_condition(cfg, condition);
  return cfg;
}

struct TickRecord {
  int tick = 0;
  State x;
  Vec3 u_p = Vec3::Zero();
  Vec3 u_r = Vec3::Zero();
  Vec3 u = Vec3::Zero();
  double alpha = 0.0;
  double energy = 0.0;  // reactive pseudoenergy |alpha - alpha_des|
  double cost = 0.0;
  SlipClass grip = SlipClass::FirmlyHeld;
  Event event = Event::None;
};

struct RolloutTrace {
  State initial;
  std::vector<TickRecord> ticks;
  Event terminal = Event::None;
  double episode_yaw = 0.0;  // yaw when the policy stops acting
  double final_yaw = 0.0;    // yaw on the last recorded tick
  int episode_ticks = 0;
  Dataset transitions;       // vision-rate model data

  bool fell() const { return terminal == Event::Fell; }

  // Mean immediate cost over the ticks of the policy episode.
  double episode_cost() const {
    const auto n = std::min<std::size_t>(ticks.size(), static_cast<std::size_t>(episode_ticks));
    if (n == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += ticks[i].cost;
    return s / static_cast<double>(n);
  }

  std::vector<double> energies() const {
    std::vector<double> e;
    e.reserve(ticks.size());
    for (const auto& t : ticks) e.push_back(t.energy);
    return e;
  }
};

inline int count_interventions(const RolloutTrace& trace, double threshold = 0.25) {
  const auto e = trace.energies();
  return count_interventions(std::span<const double>(e), threshold);
}

inline VecX observation_vector(const State& x, Eigen::Index state_dim) {
  if (state_dim == 1) return VecX::Constant(1, x.yaw);
  return x.vector();
}

// Executes the policy for `episode_ticks` (recomputed every vision period),
// then holds the last policy command for `hold_ticks`. The reflex acts on
// every tick when enabled. Stops at the first Fell.
inline RolloutTrace run_rollout(const PlantConfig& plant_cfg, PlantState state,
                                const Policy& policy, const ExperimentConfig& cfg) {
  if (state.fallen) throw IrreversibleEventError("run_rollout: plant has already fallen");
  const Eigen::Index S = cfg.state_dim();
  RolloutTrace trace;
  trace.episode_ticks = cfg.episode_ticks;
  trace.initial = observe(state);
  trace.episode_yaw = state.yaw;
  trace.final_yaw = state.yaw;
  trace.ticks.reserve(static_cast<std::size_t>(cfg.episode_ticks + cfg.hold_ticks));

  Vec3 u_p = Vec3::Zero();
  VecX vision_state;
  Vec3 vision_command = Vec3::Zero();
  bool have_vision = false;
  const int total = cfg.episode_ticks + cfg.hold_ticks;
  for (int t = 0; t < total; ++t) {
    const State x = observe(state);
    const bool in_episode = t < cfg.episode_ticks;
    const bool vision_tick = in_episode && t % cfg.vision_period == 0;
    if (vision_tick) u_p = policy_action(policy, observation_vector(x, S));

    const double alpha = slipping_coefficient(x.forces, cfg.calibration.force_scale);
    Vec3 u_r = Vec3::Zero();
    if (cfg.reactive_enabled) {
      u_r = reactive_correction(control_error(alpha, cfg.calibration), cfg.gain);
    }
    const Vec3 u = combine(u_p, u_r, plant_cfg.motor_bounds);

    if (vision_tick) {
      if (have_vision) {
        trace.transitions.transitions.push_back(
            {vision_state, vision_command, observation_vector(x, S)});
      }
      vision_state = observation_vector(x, S);
      vision_command = u;
      have_vision = true;
    }

    StepResult r = step(state, Control{u}, plant_cfg);
    state = std::move(r.state);

    TickRecord rec;
    rec.tick = t + 1;
    rec.x = observe(state);
    rec.u_p = u_p;
    rec.u_r = u_r;
    rec.u = u;
    rec.alpha = slipping_coefficient(rec.x.forces, cfg.calibration.force_scale);
    const double e = rec.alpha - cfg.calibration.alpha_des;
    rec.energy = reactive_pseudoenergy(e);
    rec.cost = step_cost(rec.x, e, cfg.cost);
    rec.grip = slip_class(rec.alpha, cfg.calibration);
    rec.event = r.event;
    trace.ticks.push_back(rec);
    trace.final_yaw = state.yaw;

    if (t + 1 == cfg.episode_ticks) {
      trace.episode_yaw = state.yaw;
      if (have_vision) {
        trace.transitions.transitions.push_back(
            {vision_state, vision_command, observation_vector(rec.x, S)});
        have_vision = false;
      }
    }
    if (r.event == Event::Fell) {
      trace.terminal = Event::Fell;
      break;
    }
  }
  return trace;
}

enum class Verdict { TaskLearned, TaskNotLearned, ObjectSlipped };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::TaskLearned: return "task_learned";
    case Verdict::TaskNotLearned: return "task_not_learned";
    case Verdict::ObjectSlipped: return "object_slipped";
  }
  return "unknown";
}

struct TrialOutcome {
  Verdict verdict = Verdict::TaskNotLearned;
  std::uint64_t seed = 0;
  std::vector<double> rollout_costs;
  std::vector<int> interventions;
  std::vector<double> final_yaws;
  int rollouts = 0;
  std::string diagnostic;
};

// Receives every executed rollout (trial index, 1-based rollout index).
using RolloutObserver =
    std::function<void(int trial, int rollout, const RolloutTrace& trace, const Policy& policy)>;

namespace harness_detail {

inline bool in_goal(double yaw, const ExperimentConfig& cfg) {
  return std::abs(yaw - cfg.phi_des) <= cfg.tolerance;
}

// Fraction of episode ticks on which some policy command sat on a bound.
inline double saturation_fraction(const RolloutTrace& trace, const MotorBounds& bounds) {
  const auto n = std::min<std::size_t>(trace.ticks.size(),
                                       static_cast<std::size_t>(trace.episode_ticks));
  if (n == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const Vec3& u = trace.ticks[t].u_p;
    bool at_bound = false;
    for (int i = 0; i < kFingers; ++i) {
      at_bound |= u[i] <= bounds[i].lo || u[i] >= bounds[i].hi;
    }
    hits += at_bound ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

// A saturated policy has a flat predicted return, so its gradient carries no
// information. This variant halves the gains and pulls the command at x0
// away from the bounds, giving the search a second, informative start.
inline Policy desaturated(const Policy& p, const VecX& x0, double margin = 0.25) {
  Policy q = p;
  q.A *= 0.5;
  const Vec3 u0 = q.A * x0 + q.b;
  for (int i = 0; i < kFingers; ++i) {
    const Interval& b = p.bounds[i];
    const double inset = margin * b.width();
    q.b[i] += std::clamp(u0[i], b.lo + inset, b.hi - inset) - u0[i];
  }
  return q;
}

inline StateDistribution initial_distribution(const State& x0, Eigen::Index S) {
  const VecX m = observation_vector(x0, S);
  return StateDistribution::gaussian(m, MatX::Identity(S, S) * 1e-8);
}

}  // namespace harness_detail

// One learning trial: random initial policy, then alternate rollouts, model
// refits and policy improvement. The object slipping ends the trial at once.
// Success needs two consecutive rollouts ending in the goal band; the
// confirming rollout re-executes the unchanged policy.
inline TrialOutcome run_trial(const ExperimentConfig& cfg, std::uint64_t seed,
                              const RolloutObserver& observer = {}, int trial_index = 0) {
  cfg.validate();
  const Eigen::Index S = cfg.state_dim();
  TrialOutcome out;
  out.seed = seed;

  PlantConfig plant = cfg.plant;
  plant.rng_seed = mix_seed(seed, 100);
  const PlantState start = reset(plant, cfg.initial_yaw);
  const State x0 = observe(start);
  const VecX x0v = observation_vector(x0, S);

  Policy policy = random_policy(S, plant.motor_bounds, x0v, start.closure, mix_seed(seed, 1),
                                cfg.random_policy_spread);
  std::optional<ReactiveLoop> reactive;
  if (cfg.reactive_enabled) reactive = ReactiveLoop{cfg.calibration, cfg.gain};

  Dataset data;
  std::optional<std::vector<GPHyper>> hypers;
  bool previous_in_goal = false;
  for (int r = 1; r <= cfg.max_rollouts; ++r) {
    PlantConfig rollout_plant = plant;
    rollout_plant.rng_seed = mix_seed(seed, 1000 + static_cast<std::uint64_t>(r));
    const PlantState s0 = reset(rollout_plant, cfg.initial_yaw);
    RolloutTrace trace = run_rollout(rollout_plant, s0, policy, cfg);
    out.rollouts = r;
    out.rollout_costs.push_back(trace.episode_cost());
    out.interventions.push_back(count_interventions(trace));
    out.final_yaws.push_back(trace.episode_yaw);
    if (observer) observer(trial_index, r, trace, policy);
    spdlog::debug("trial {} rollout {}: yaw {:.2f} deg, cost {:.4f}, interventions {}{}",
                  trial_index, r, rad_to_deg(trace.episode_yaw), out.rollout_costs.back(),
                  out.interventions.back(), trace.fell() ? ", fell" : "");

    if (trace.fell()) {
      out.verdict = Verdict::ObjectSlipped;
      return out;
    }
    const bool goal = harness_detail::in_goal(trace.episode_yaw, cfg);
    if (goal && previous_in_goal) {
      out.verdict = Verdict::TaskLearned;
      return out;
    }
    data.append(trace.transitions);
    previous_in_goal = goal;
    if (goal || r == cfg.max_rollouts) continue;

    try {
      FitOptions fopt;
      fopt.restarts = cfg.gp_restarts;
      fopt.max_iterations = cfg.gp_max_iterations;
      fopt.init = hypers;
      Dataset recent = data;
      const auto cap = static_cast<std::size_t>(std::max(0, cfg.max_training_points));
      if (cap > 0 && recent.transitions.size() > cap) {
        recent.transitions.erase(recent.transitions.begin(),
                                 recent.transitions.end() - static_cast<std::ptrdiff_t>(cap));
      }
      const GPModel model = fit(recent, fopt);
      std::vector<GPHyper> h;
      for (const auto& gp : model.outputs) h.push_back(gp.hyper());
      hypers = std::move(h);

      ReturnOptions ropt;
      ropt.particles = cfg.particles;
      ropt.reactive = reactive;
      SearchOptions sopt;
      sopt.minimize.max_iterations = cfg.search_max_iterations;
      sopt.fd_step = cfg.search_fd_step;
      sopt.minimize.max_step = cfg.search_max_step;
      sopt.state_scale = state_scale(x0v);
      const auto init = harness_detail::initial_distribution(x0, S);
      const std::uint64_t search_seed = mix_seed(seed, 2000 + static_cast<std::uint64_t>(r));
      auto res = improve_policy(model, policy, cfg.cost, init, cfg.model_horizon(), search_seed,
                                ropt, sopt);
      if (harness_detail::saturation_fraction(trace, plant.motor_bounds) > 0.5) {
        auto alt = improve_policy(model, harness_detail::desaturated(policy, x0v), cfg.cost, init,
                                  cfg.model_horizon(), search_seed, ropt, sopt);
        spdlog::debug("trial {} rollout {}: saturated policy, restart J {:.4f} vs {:.4f}",
                      trial_index, r, alt.final_return, res.final_return);
        if (alt.final_return < res.final_return) res = std::move(alt);
      }
      spdlog::debug("trial {} rollout {}: J {:.4f} -> {:.4f} ({} iterations, {})", trial_index,
                    r, res.initial_return, res.final_return, res.iterations, res.stop_reason);
      policy = res.policy;
    } catch (const Error& e) {
      out.verdict = Verdict::TaskNotLearned;
      out.diagnostic = "rollout " + std::to_string(r) + ": " + e.what();
      return out;
    }
  }
  out.verdict = Verdict::TaskNotLearned;
  return out;
}

struct ExperimentReport {
  CostVariant condition = CostVariant::Synergy;
  Task task = Task::Cup;
  int max_rollouts = 0;
  std::vector<TrialOutcome> trials;

  int n_trials() const { return static_cast<int>(trials.size()); }

  int count(Verdict v) const {
    return static_cast<int>(std::count_if(trials.begin(), trials.end(),
                                          [v](const TrialOutcome& t) { return t.verdict == v; }));
  }

  double success_rate() const {
    if (trials.empty()) throw DomainError("success rate is undefined for zero trials");
    return static_cast<double>(count(Verdict::TaskLearned)) / n_trials();
  }

  double slip_rate() const {
    if (trials.empty()) throw DomainError("slip rate is undefined for zero trials");
    return static_cast<double>(count(Verdict::ObjectSlipped)) / n_trials();
  }

  // Median intervention count per rollout index. A learned trial keeps
  // contributing its last count (its policy is the one that stays deployed);
  // other trials contribute only the rollouts they executed. NaN when no
  // trial contributes.
  std::vector<double> median_interventions() const {
    std::vector<double> med;
    for (int r = 0; r < max_rollouts; ++r) {
      std::vector<int> v;
      for (const auto& t : trials) {
        if (r < static_cast<int>(t.interventions.size())) {
          v.push_back(t.interventions[static_cast<std::size_t>(r)]);
        } else if (t.verdict == Verdict::TaskLearned && !t.interventions.empty()) {
          v.push_back(t.interventions.back());
        }
      }
      if (v.empty()) {
        med.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      med.push_back(n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
    }
    return med;
  }
};

inline ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                       const RolloutObserver& observer = {}) {
  cfg.validate();
  ExperimentReport rep;
  rep.condition = cfg.condition;
  rep.task = cfg.task;
  rep.max_rollouts = cfg.max_rollouts;
  const auto seeds = cfg.trial_seeds();
  for (int i = 0; i < cfg.n_trials; ++i) {
    rep.trials.push_back(run_trial(cfg, seeds[static_cast<std::size_t>(i)], observer, i));
  }
  return rep;
}

struct ComparisonRow {
  CostVariant condition = CostVariant::Synergy;
  int n_trials = 0;
  int successes = 0;
  int slips = 0;
  double success_rate = 0.0;
  double slip_rate = 0.0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;     // best first
  std::vector<ExperimentReport> reports;  // in input order
};

namespace harness_detail {

inline bool same_setup(const ExperimentConfig& a, const ExperimentConfig& b) {
  const auto& p = a.plant;
  const auto& q = b.plant;
  return a.task == b.task && a.initial_yaw == b.initial_yaw && a.phi_des == b.phi_des &&
         a.tolerance == b.tolerance && p.contact_positions == q.contact_positions &&
         p.motor_bounds == q.motor_bounds && p.force_gain == q.force_gain &&
         p.force_saturation == q.force_saturation && p.rotation_gain == q.rotation_gain &&
         p.slip_drift_rate == q.slip_drift_rate && p.slip_fall_ticks == q.slip_fall_ticks &&
         p.quick_fall_ticks == q.quick_fall_ticks &&
         p.process_noise_std == q.process_noise_std && p.servo_rate == q.servo_rate &&
         p.grip_offset == q.grip_offset && p.grip_classes == q.grip_classes;
}

}  // namespace harness_detail

inline ComparisonRow summarize(const ExperimentReport& rep) {
  ComparisonRow row;
  row.condition = rep.condition;
  row.n_trials = rep.n_trials();
  row.successes = rep.count(Verdict::TaskLearned);
  row.slips = rep.count(Verdict::ObjectSlipped);
  row.success_rate = rep.success_rate();
  row.slip_rate = rep.slip_rate();
  return row;
}

// Success rate descending, then slip rate ascending; ties keep input order.
inline void rank_rows(std::vector<ComparisonRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    if (a.success_rate != b.success_rate) return a.success_rate > b.success_rate;
    return a.slip_rate < b.slip_rate;
  });
}

inline Comparison compare_conditions(const std::vector<ExperimentConfig>& configs,
                                     const RolloutObserver& observer = {}) {
  if (configs.size() < 2) throw DomainError("compare_conditions: need at least two configs");
  for (std::size_t i = 1; i < configs.size(); ++i) {
    if (!harness_detail::same_setup(configs[0], configs[i])) {
      throw DomainError("compare_conditions: configs differ in plant or task");
    }
  }
  Comparison cmp;
  for (const auto& c : configs) {
    cmp.reports.push_back(run_experiment(c, observer));
    cmp.rows.push_back(summarize(cmp.reports.back()));
  }
  rank_rows(cmp.rows);
  return cmp;
}

}  // namespace tic

#endif  // TIC_HARNESS_HPP_
