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

#ifndef TIC_OPTIM_HPP_
#define TIC_OPTIM_HPP_

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

#include "tic/common.hpp"

namespace tic {

inline std::string format_vector(const VecX& v) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << "]";
  return os.str();
}

// Forward differences: n extra evaluations.
template <class F>
VecX forward_difference_gradient(F&& f, const VecX& x, double fx, double h) {
  VecX g(x.size());
  VecX probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    g[i] = (f(probe) - fx) / h;
    probe[i] = x[i];
  }
  return g;
}

template <class F>
VecX central_difference_gradient(F&& f, const VecX& x, double h) {
  VecX g(x.size());
  VecX probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

struct MinimizeOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-5;
  double step_tolerance = 1e-8;
  double max_first_step = 1.0;  // length of the first trial step
  double max_step = std::numeric_limits<double>::infinity();  // cap on any trial step
  int max_backtracks = 30;
  // Policy search treats a non-finite objective as a hard error; likelihood
  // fitting just backtracks away from it.
  bool nonfinite_is_error = true;
};

struct MinimizeResult {
  VecX x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::string stop_reason;
};

// Quasi-Newton (BFGS) descent with Armijo backtracking. `f(x, grad)` returns
// the objective and, when `grad` is non-null, writes the gradient there. Line
// search probes ask for the value only. Accepted steps strictly decrease the
// objective, so the result is never worse than the start.
template <class F>
MinimizeResult minimize_bfgs(F&& f, VecX x, const MinimizeOptions& opt = {}) {
  const Eigen::Index n = x.size();
  MinimizeResult res;
  VecX g(n);
  double fx = f(x, &g);
  ++res.evaluations;
  if (!std::isfinite(fx) || !g.allFinite()) {
    throw OptimizationError("non-finite objective at start, theta = " + format_vector(x));
  }
  MatX H = MatX::Identity(n, n);
  bool scaled = false;
  VecX g_new(n);
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    if (g.norm() < opt.gradient_tolerance) {
      res.stop_reason = "gradient";
      break;
    }
    VecX d = -H * g;
    if (!(d.dot(g) < 0.0)) {
      H.setIdentity();
      d = -g;
    }
    double t = 1.0;
    if (!scaled) t = std::min(1.0, opt.max_first_step / d.norm());
    t = std::min(t, opt.max_step / d.norm());

    bool accepted = false;
    VecX x_new(n);
    double f_new = fx;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      x_new = x + t * d;
      f_new = f(x_new, nullptr);
      ++res.evaluations;
      const bool finite = std::isfinite(f_new);
      if (!finite && opt.nonfinite_is_error) {
        throw OptimizationError("non-finite objective during search, theta = " +
                                format_vector(x_new));
      }
      if (finite && f_new <= fx + 1e-4 * t * g.dot(d) && f_new < fx) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      res.stop_reason = "line_search";
      break;
    }
    f(x_new, &g_new);
    ++res.evaluations;
    if (!g_new.allFinite()) {
      if (opt.nonfinite_is_error) {
        throw OptimizationError("non-finite gradient during search, theta = " +
                                format_vector(x_new));
      }
      x = x_new;
      fx = f_new;
      res.stop_reason = "nonfinite_gradient";
      break;
    }
    const VecX s = x_new - x;
    const VecX y = g_new - g;
    x = x_new;
    fx = f_new;
    g = g_new;
    if (s.norm() < opt.step_tolerance) {
      res.stop_reason = "step";
      break;
    }
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        H = MatX::Identity(n, n) * (sy / y.dot(y));
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const MatX I = MatX::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    if (it + 1 == opt.max_iterations) res.stop_reason = "iterations";
  }
  if (res.stop_reason.empty()) res.stop_reason = "iterations";
  res.x = std::move(x);
  res.value = fx;
  return res;
}

}  // namespace tic

#endif  // TIC_OPTIM_HPP_
