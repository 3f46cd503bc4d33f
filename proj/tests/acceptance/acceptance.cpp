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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. The learning experiments take several minutes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tic/config.hpp"
#include "tic/gp.hpp"
#include "tic/harness.hpp"
#include "tic/io.hpp"
#include "tic/plant.hpp"
#include "tic/policy_search.hpp"
#include "tic/propagate.hpp"
#include "tic/reactive.hpp"

namespace {

using namespace tic;

int failures = 0;

void report(int id, bool ok, const std::string& what, double seconds) {
  fmt::print("[{}] criterion {:>2}: {} ({:.1f} s)\n", ok ? "PASS" : "FAIL", id, what, seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <class F>
void timed(int id, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string what;
  bool ok = false;
  try {
    ok = body(what);
  } catch (const std::exception& e) {
    what += std::string(" exception: ") + e.what();
  }
  const double s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(id, ok, what, s);
}

// 1. Closed forms at pinned points.
bool closed_forms(std::string& what) {
  struct Point {
    double got, want;
  };
  const double e1 = std::exp(-1.0);
  CostSpec vis;
  vis.variant = CostVariant::VisualOnly;
  vis.phi_des = 1.0;
  CostSpec vt = vis;
  vt.variant = CostVariant::VisuoTactile;
  vt.f_des = Vec3::Constant(2.0);
  CostSpec syn = vis;
  syn.variant = CostVariant::Synergy;
  const SlipCalibration cal{0.25, 0.3, 0.7, 1.0};
  const std::vector<Point> pts = {
      {slipping_coefficient(Vec3::Zero()), 1.0},
      {slipping_coefficient(Vec3(1, 0, 0)), e1},
      {slipping_coefficient(Vec3(1, 1, 1)), std::exp(-3.0)},
      {slipping_coefficient(Vec3(1, 1, 1), 2.0), std::exp(-0.75)},
      {control_error(0.25, cal), 0.0},
      {control_error(0.55, cal), 0.3},
      {reactive_pseudoenergy(control_error(0.25, cal)), 0.0},
      {reactive_pseudoenergy(control_error(0.05, cal)), 0.2},
      {step_cost(State{1.0, Vec3::Zero()}, 0.0, vis), 0.0},
      {step_cost(State{2.0, Vec3::Zero()}, 0.0, vis), 1.0 - e1},
      {step_cost(State{1.0, Vec3::Constant(2.0)}, 0.0, vt), 0.0},
      {step_cost(State{2.0, Vec3(1, 2, 2)}, 0.0, vt), 1.0 - e1},
      {step_cost(State{1.0, Vec3(2, 2, 2)}, 0.0, vt), 0.0},
      {step_cost(State{1.0, Vec3::Zero()}, 0.0, syn), 0.0},
      {step_cost(State{2.0, Vec3::Zero()}, 0.3, syn), 0.5 * (1.0 - e1) + 0.15},
      {step_cost(State{1.0, Vec3::Zero()}, -0.25, syn), 0.125},
  };
  double worst = 0.0;
  for (const auto& p : pts) worst = std::max(worst, std::abs(p.got - p.want));
  what = fmt::format("{} pinned points, max error {:.1e}", pts.size(), worst);
  return worst <= 1e-12;
}

// 2. Calibration fixture.
bool calibration(std::string& what) {
  CalibrationOptions opt;
  opt.force_scale = 2.0;
  const auto cal =
      calibrate(read_calibration_samples(std::string(TIC_DATA_DIR) + "/fig4_calibration.csv"), opt);
  what = fmt::format("thresholds ({}, {}), alpha_des {}", cal.firm_threshold, cal.slip_threshold,
                     cal.alpha_des);
  return cal.firm_threshold == 0.30 && cal.slip_threshold == 0.70 && cal.alpha_des == 0.25;
}

// 3. GP interpolation, likelihood gradient, prior reversion.
bool gp_correctness(std::string& what) {
  MatX X(10, 2);
  VecX y(10);
  for (int i = 0; i < 10; ++i) {
    X(i, 0) = 0.3 * i;
    X(i, 1) = std::cos(0.7 * i);
    y[i] = std::sin(X(i, 0)) + X(i, 1);
  }
  GPHyper h;
  h.length_scales = Eigen::Vector2d(1.0, 1.0);
  h.signal_variance = 1.0;
  h.noise_variance = 1e-12;
  const auto gp = GaussianProcess::condition(X, y, h);
  VecX m, v;
  gp.predict(X, m, v);
  const double interp = (m - y).cwiseAbs().maxCoeff();

  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst_rel = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    MatX Xr(20, 4);
    for (Eigen::Index i = 0; i < Xr.size(); ++i) Xr.data()[i] = n(rng);
    VecX yr(20);
    for (int i = 0; i < 20; ++i) yr[i] = std::tanh(Xr(i, 0)) - 0.5 * Xr(i, 3) + 0.1 * n(rng);
    GPHyper hr;
    hr.length_scales = VecX::Constant(4, 1.0 + 0.1 * rep);
    hr.signal_variance = 0.5 + 0.1 * rep;
    hr.noise_variance = 0.02;
    const auto r = log_marginal_likelihood(Xr, yr, hr);
    auto f = [&](const VecX& p) {
      return log_marginal_likelihood(Xr, yr, GPHyper::from_log(p)).value;
    };
    const VecX fd = central_difference_gradient(f, hr.to_log(), 1e-5);
    worst_rel = std::max(worst_rel, (r.gradient - fd).norm() / r.gradient.norm());
  }

  GPHyper hp = h;
  hp.noise_variance = 0.01;
  const auto gp2 = GaussianProcess::condition(X, y, hp);
  const auto [fm, fv] = gp2.predict(Eigen::Vector2d(1e3, -1e3));
  const double prior_gap = std::max(std::abs(fm), std::abs(fv - 1.01));
  what = fmt::format("interpolation {:.1e}, gradient rel error {:.1e}, prior gap {:.1e}", interp,
                     worst_rel, prior_gap);
  return interp <= 1e-6 && worst_rel <= 1e-5 && prior_gap <= 1e-9;
}

GPModel synthetic_force_model() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  for (int i = 0; i < 40; ++i) {
    VecX x(4);
    x << u(rng), 1.0 + u(rng), 1.0 + u(rng), 1.0 + u(rng);
    const Vec3 c(u(rng), u(rng), u(rng));
    VecX next = x;
    next[0] += 0.3 * (c[0] - c[1]) + 0.05 * std::sin(4 * x[0]);
    next.tail(3) += 0.2 * (c - Vec3::Constant(0.5));
    d.transitions.push_back({x, c, next});
  }
  return fit(d);
}

// 4. Particle one-step moments vs analytic prediction; determinism.
bool propagation(std::string& what) {
  const GPModel model = synthetic_force_model();
  Policy p;
  p.A = MatX::Zero(3, 4);
  p.A(0, 0) = 0.2;
  p.b = Vec3(0.4, 0.6, 0.5);
  p.bounds = {Interval{-10, 10}, Interval{-10, 10}, Interval{-10, 10}};
  VecX x0(4);
  x0 << 0.4, 1.5, 1.3, 1.6;
  const auto init = StateDistribution::gaussian(x0, MatX::Zero(4, 4));
  PropagateOptions opt;
  opt.particles = 2000;
  const auto out = propagate(model, p, init, 1, 5, opt);
  const Prediction pr = predict(model, x0, policy_action(p, x0));
  double worst = 0.0;
  for (int j = 0; j < 4; ++j) {
    worst = std::max(worst, std::abs(out[0].mean[j] - pr.mean[j]) / std::abs(pr.mean[j]));
    worst = std::max(worst, std::abs(out[0].covariance(j, j) - pr.variance[j]) / pr.variance[j]);
  }
  opt.reactive = ReactiveLoop{SlipCalibration{0.25, 0.3, 0.7, 2.0}, ReactiveGain{}};
  const auto noisy = StateDistribution::gaussian(x0, MatX::Identity(4, 4) * 1e-3);
  const auto a = propagate(model, p, noisy, 10, 77, opt);
  const auto b = propagate(model, p, noisy, 10, 77, opt);
  bool same = true;
  for (std::size_t t = 0; t < a.size(); ++t) {
    same &= (a[t].particles.array() == b[t].particles.array()).all();
  }
  what = fmt::format("max relative moment error {:.1e} at N=2000, bitwise repeat {}", worst,
                     same ? "yes" : "no");
  return worst <= 0.02 && same;
}

// 5. Closed-form linear/quadratic problem; monotone J on a learned model.
bool policy_improvement(std::string& what) {
  MatX starts(5, 2);
  starts << 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, -1.0, 0.5, 0.3, -0.7;
  Eigen::Matrix<double, 2, 3> B;
  B << 1.0, 0.5, 0.0, 0.0, -0.3, 1.0;
  const Eigen::Vector2d target(1.0, -0.5);
  const double rho = 0.1;
  auto J = [&](const Policy& p) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < starts.rows(); ++i) {
      const VecX x = starts.row(i).transpose();
      const Vec3 u = policy_action(p, x);
      s += (x + B * u - target).squaredNorm() + rho * u.squaredNorm();
    }
    return s / 5.0;
  };
  MatX M = MatX::Zero(25, 9);
  VecX r = VecX::Zero(25);
  for (Eigen::Index i = 0; i < 5; ++i) {
    MatX G = MatX::Zero(3, 9);
    for (int k = 0; k < 3; ++k) {
      G(k, 2 * k) = starts(i, 0);
      G(k, 2 * k + 1) = starts(i, 1);
      G(k, 6 + k) = 1.0;
    }
    M.block(5 * i, 0, 2, 9) = B * G;
    r.segment(5 * i, 2) = target - starts.row(i).transpose();
    M.block(5 * i + 2, 0, 3, 9) = std::sqrt(rho) * G;
  }
  const VecX exact = (M.transpose() * M).ldlt().solve(M.transpose() * r);
  Policy init;
  init.A = MatX::Zero(3, 2);
  init.bounds = {Interval{-100, 100}, Interval{-100, 100}, Interval{-100, 100}};
  SearchOptions sopt;
  sopt.fd_step = 1e-7;
  sopt.minimize.max_iterations = 200;
  sopt.minimize.gradient_tolerance = 1e-9;
  const auto res = improve_policy(J, init, sopt);
  double err = 0.0;
  for (int k = 0; k < 3; ++k) {
    err = std::max(err, std::abs(res.policy.A(k, 0) - exact[2 * k]));
    err = std::max(err, std::abs(res.policy.A(k, 1) - exact[2 * k + 1]));
    err = std::max(err, std::abs(res.policy.b[k] - exact[6 + k]));
  }

  const GPModel model = synthetic_force_model();
  CostSpec spec;
  spec.variant = CostVariant::Synergy;
  spec.phi_des = 1.0;
  spec.force_scale = 2.0;
  VecX x0(4);
  x0 << 0.2, 1.3, 1.3, 1.3;
  const auto dist = StateDistribution::gaussian(x0, MatX::Zero(4, 4));
  ReturnOptions ropt;
  ropt.particles = 40;
  ropt.reactive = ReactiveLoop{SlipCalibration{0.25, 0.3, 0.7, 2.0}, ReactiveGain{}};
  SearchOptions s2;
  s2.minimize.max_iterations = 10;
  s2.state_scale = state_scale(x0);
  const MotorBounds mb = {Interval{0, 1}, Interval{0, 1}, Interval{0, 1}};
  int increased = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Policy p0 = random_policy(4, mb, x0, Vec3::Constant(0.5), seed, 1.0);
    const auto out = improve_policy(model, p0, spec, dist, 10, seed, ropt, s2);
    const double j0 = expected_return(model, p0, spec, dist, 10, seed, ropt);
    const double j1 = expected_return(model, out.policy, spec, dist, 10, seed, ropt);
    increased += j1 > j0 ? 1 : 0;
  }
  what = fmt::format("parameter error {:.1e}, J increased in {}/5 searches", err, increased);
  return err <= 1e-3 && increased == 0;
}

// 6. Plant + reflex with frozen policy command, no noise.
bool reactive_stabilization(std::string& what) {
  PlantConfig cfg;
  cfg.process_noise_std.setZero();
  const SlipCalibration cal = cfg.grip_classes;
  const ReactiveGain gain;
  const int n = 6;
  const double span = cfg.motor_bounds[0].width();
  double worst = 0.0;
  int starts = 0, falls = 0;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      for (int k = 0; k <= n; ++k) {
        const Vec3 closure = cfg.contact_positions + Vec3(i, j, k) * span / n;
        const Vec3 f = plant_detail::closure_forces(closure, cfg);
        const double a0 = slipping_coefficient(f, cal.force_scale);
        if (a0 >= cal.slip_threshold) continue;  // not held
        for (int a = 0; a <= n; a += 2)
          for (int b = 0; b <= n; b += 2)
            for (int c = 0; c <= n; c += 2) {
              const Vec3 u_p = cfg.contact_positions + Vec3(a, b, c) * span / n;
              PlantState s = reset(cfg, 0.0);
              s.closure = closure;
              s.forces = f;
              s.alpha = a0;
              s.grip = slip_class(a0, cal);
              ++starts;
              for (int t = 1; t <= 300; ++t) {
                const Vec3 u =
                    combine(u_p, reactive_correction(control_error(s.alpha, cal), gain),
                            cfg.motor_bounds);
                const StepResult r = step(s, Control{u}, cfg);
                s = r.state;
                if (r.event == Event::Fell) {
                  ++falls;
                  break;
                }
                if (t >= 100) worst = std::max(worst, std::abs(s.alpha - cal.alpha_des));
              }
            }
      }
  what = fmt::format("{} held starts x frozen commands, max |alpha - alpha_des| after tick 100 "
                     "{:.3f}, falls {}",
                     starts, worst, falls);
  return worst <= 0.05 && falls == 0;
}

// Every CSV an experiment run produces, keyed by relative path.
using CsvSet = std::map<std::string, std::string>;

struct CupRun {
  std::vector<ExperimentReport> reports;
  Comparison comparison;
  CsvSet csv;
};

CupRun run_cup() {
  CupRun run;
  const std::vector<CostVariant> conds = {CostVariant::Synergy, CostVariant::VisuoTactile,
                                          CostVariant::VisualOnly};
  for (auto c : conds) {
    const ExperimentConfig cfg = make_config(c, Task::Cup);
    const std::string tag(to_string(c));
    auto rep = run_experiment(cfg, [&](int trial, int rollout, const RolloutTrace& tr,
                                       const Policy&) {
      run.csv[fmt::format("{}/trial_{:02}/rollout_{:02}.csv", tag, trial + 1, rollout)] =
          trace_csv(tr);
    });
    run.csv[tag + "/cost_matrix.csv"] = cost_matrix_csv(rep);
    run.csv[tag + "/interventions.csv"] = interventions_csv(rep);
    run.comparison.rows.push_back(summarize(rep));
    run.comparison.reports.push_back(rep);
    run.reports.push_back(std::move(rep));
  }
  rank_rows(run.comparison.rows);
  run.csv["comparison.csv"] = comparison_csv(run.comparison);
  return run;
}

}  // namespace

int main() {
  fmt::print("acceptance checks (fixture plant, master seed 1)\n");
  std::fflush(stdout);
  timed(1, closed_forms);
  timed(2, calibration);
  timed(3, gp_correctness);
  timed(4, propagation);
  timed(5, policy_improvement);
  timed(6, reactive_stabilization);

  CupRun first;
  timed(7, [&](std::string& what) {
    first = run_cup();
    const auto& syn = first.reports[0];
    const auto& vt = first.reports[1];
    const auto& vo = first.reports[2];
    what = fmt::format(
        "synergy {:.0f}%/{:.0f}%, visuo_tactile {:.0f}%/{:.0f}%, visual_only {:.0f}%/{:.0f}% "
        "(success/slip)",
        100 * syn.success_rate(), 100 * syn.slip_rate(), 100 * vt.success_rate(),
        100 * vt.slip_rate(), 100 * vo.success_rate(), 100 * vo.slip_rate());
    return syn.success_rate() >= 0.8 && syn.slip_rate() <= 0.1 && vo.slip_rate() >= 0.7 &&
           vo.success_rate() <= 0.2 && vt.slip_rate() > syn.slip_rate() &&
           vt.slip_rate() < vo.slip_rate();
  });

  timed(8, [&](std::string& what) {
    if (first.reports.empty()) {
      what = "criterion 7 did not produce a synergy report";
      return false;
    }
    ExperimentReport five = first.reports[0];
    five.trials.resize(std::min<std::size_t>(5, five.trials.size()));
    const auto med = five.median_interventions();
    std::string list;
    bool reaches_zero = false;
    bool nonincreasing = true;
    double last = INFINITY;
    for (std::size_t r = 0; r < med.size(); ++r) {
      list += (r ? " " : "") + (std::isnan(med[r]) ? std::string("-") : fmt::format("{}", med[r]));
      if (std::isnan(med[r])) continue;
      if (r < 8 && med[r] == 0.0) reaches_zero = true;
      if (r >= 2) {
        if (med[r] > last) nonincreasing = false;
        last = med[r];
      }
    }
    what = "median interventions per rollout: " + list;
    return reaches_zero && nonincreasing;
  });

  timed(9, [&](std::string& what) {
    const auto rep = run_experiment(make_config(CostVariant::Synergy, Task::Bottle));
    what = fmt::format("bottle synergy success {:.0f}%, slip {:.0f}%", 100 * rep.success_rate(),
                       100 * rep.slip_rate());
    return rep.success_rate() >= 0.7;
  });

  timed(10, [&](std::string& what) {
    const CupRun second = run_cup();
    int differ = 0;
    for (const auto& [name, bytes] : first.csv) {
      const auto it = second.csv.find(name);
      if (it == second.csv.end() || it->second != bytes) ++differ;
    }
    differ += second.csv.size() != first.csv.size() ? 1 : 0;
    what = fmt::format("{} CSV files compared, {} differ", first.csv.size(), differ);
    return differ == 0 && !first.csv.empty();
  });

  fmt::print("{} of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
