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

// Policy evaluation and improvement on predicted rollouts.
//
// The immediate cost comes in three variants:
//   VisualOnly    c = 1 - exp(-(yaw - yaw_des)^2)
//   VisuoTactile  c = 1 - (l1 a + l2 b),  a = exp(-(yaw - yaw_des)^2),
//                                         b = exp(-|f - f_des|^2)
//   Synergy       c = l1 (1 - exp(-(yaw - yaw_des)^2)) + l2 |alpha - alpha_des|
// Angles are in radians. The expected return sums the particle-mean cost over
// t = 0..T, and improvement runs BFGS on finite-difference gradients of that
// seeded, deterministic return.

#ifndef TIC_POLICY_SEARCH_HPP_
#define TIC_POLICY_SEARCH_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "tic/common.hpp"
#include "tic/gp.hpp"
#include "tic/optim.hpp"
#include "tic/plant.hpp"
#include "tic/policy.hpp"
#include "tic/propagate.hpp"
#include "tic/reactive.hpp"

namespace tic {

enum class CostVariant { VisualOnly, VisuoTactile, Synergy };

inline std::string_view to_string(CostVariant v) {
  switch (v) {
    case CostVariant::VisualOnly: return "visual_only";
    case CostVariant::VisuoTactile: return "visuo_tactile";
    case CostVariant::Synergy: return "synergy";
  }
  return "unknown";
}

inline CostVariant cost_variant_from_string(std::string_view s) {
  if (s == "visual_only" || s == "VisualOnly") return CostVariant::VisualOnly;
  if (s == "visuo_tactile" || s == "VisuoTactile") return CostVariant::VisuoTactile;
  if (s == "synergy" || s == "Synergy") return CostVariant::Synergy;
  throw ConfigError("unknown condition '" + std::string(s) + "'");
}

struct CostSpec {
  CostVariant variant = CostVariant::Synergy;
  double phi_des = deg_to_rad(70.0);  // rad
  Vec3 f_des = Vec3::Constant(2.0);   // N, VisuoTactile only
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double alpha_des = 0.25;  // Synergy only
  double force_scale = 1.0;

  void validate() const {
    if (!(lambda1 >= 0.0 && lambda1 <= 1.0 && lambda2 >= 0.0 && lambda2 <= 1.0) ||
        std::abs(lambda1 + lambda2 - 1.0) > 1e-12) {
      throw ConfigError("cost: lambda1 and lambda2 must lie in [0, 1] and sum to 1");
    }
    if (!std::isfinite(phi_des) || !f_des.allFinite()) throw ConfigError("cost: non-finite target");
    if (!(force_scale > 0.0)) throw ConfigError("cost: force_scale must be > 0");
  }
};

namespace cost_detail {

inline double pose_energy(double yaw, double phi_des) {
  const double d = yaw - phi_des;
  return 1.0 - std::exp(-d * d);
}

}  // namespace cost_detail

// `reactive_error` is alpha - alpha_des; only the Synergy variant reads it.
inline double step_cost(const State& x, double reactive_error, const CostSpec& spec) {
  switch (spec.variant) {
    case CostVariant::VisualOnly:
      return cost_detail::pose_energy(x.yaw, spec.phi_des);
    case CostVariant::VisuoTactile: {
      const double d = x.yaw - spec.phi_des;
      const double a = std::exp(-d * d);
      const double b = std::exp(-(x.forces - spec.f_des).squaredNorm());
      return 1.0 - (spec.lambda1 * a + spec.lambda2 * b);
    }
    case CostVariant::Synergy:
      return spec.lambda1 * cost_detail::pose_energy(x.yaw, spec.phi_des) +
             spec.lambda2 * reactive_pseudoenergy(reactive_error);
  }
  return 0.0;
}

// Cost of each particle row. Rows are (yaw) or (yaw, f1, f2, f3); for the
// Synergy variant the reactive error is recomputed from the row's forces.
inline VecX particle_costs(const MatX& X, const CostSpec& spec) {
  const Eigen::Index n = X.rows();
  VecX c(n);
  if (X.cols() == 1) {
    if (spec.variant != CostVariant::VisualOnly) {
      throw DomainError("particle_costs: force-dependent cost on a yaw-only state");
    }
    for (Eigen::Index i = 0; i < n; ++i) c[i] = cost_detail::pose_energy(X(i, 0), spec.phi_des);
    return c;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const State s{X(i, 0), X.row(i).segment<3>(1).transpose()};
    double e = 0.0;
    if (spec.variant == CostVariant::Synergy) {
      e = std::exp(-(s.forces / spec.force_scale).squaredNorm()) - spec.alpha_des;
    }
    c[i] = step_cost(s, e, spec);
  }
  return c;
}

struct ReturnOptions {
  int particles = 300;
  std::optional<ReactiveLoop> reactive;
};

// J = sum_{t=0}^{T} E[c(x_t)] with common random numbers `noise`.
inline double expected_return(const GPModel& model, const Policy& policy, const CostSpec& spec,
                              const StateDistribution& init, const ParticleNoise& noise,
                              const std::optional<ReactiveLoop>& reactive) {
  const auto sets = propagate_particles(model, policy, init, noise, reactive);
  double J = 0.0;
  for (const auto& X : sets) J += particle_costs(X, spec).mean();
  return J;
}

inline double expected_return(const GPModel& model, const Policy& policy, const CostSpec& spec,
                              const StateDistribution& init, int horizon, std::uint64_t seed,
                              const ReturnOptions& opt = {}) {
  if (horizon < 1) throw DomainError("expected_return: horizon must be >= 1");
  const ParticleNoise noise(opt.particles, horizon, model.state_dim(), seed);
  return expected_return(model, policy, spec, init, noise, opt.reactive);
}

struct SearchOptions {
  MinimizeOptions minimize{};
  double fd_step = 1e-4;  // in normalized parameter units
  VecX state_scale;       // per state dimension; ones when empty
};

struct SearchResult {
  Policy policy;
  double initial_return = 0.0;
  double final_return = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::string stop_reason;
};

// Normalized parameter vector: gains are scaled so that a unit change moves
// the command by one motor range for a unit-scale state, offsets are in
// motor ranges.
class PolicyParameterization {
 public:
  PolicyParameterization(const Policy& like, VecX state_scale) : like_(like) {
    const Eigen::Index S = like.state_dim();
    xs_ = state_scale.size() == S ? std::move(state_scale) : VecX::Ones(S);
    for (int i = 0; i < kFingers; ++i) {
      const double w = like.bounds[i].width();
      w_[i] = w > 0.0 ? w : 1.0;
    }
  }

  Eigen::Index size() const { return kFingers * like_.state_dim() + kFingers; }

  VecX pack(const Policy& p) const {
    const Eigen::Index S = like_.state_dim();
    VecX theta(size());
    for (int i = 0; i < kFingers; ++i) {
      for (Eigen::Index j = 0; j < S; ++j) theta[i * S + j] = p.A(i, j) * xs_[j] / w_[i];
      theta[kFingers * S + i] = p.b[i] / w_[i];
    }
    return theta;
  }

  Policy unpack(const VecX& theta) const {
    const Eigen::Index S = like_.state_dim();
    Policy p = like_;
    for (int i = 0; i < kFingers; ++i) {
      for (Eigen::Index j = 0; j < S; ++j) p.A(i, j) = theta[i * S + j] * w_[i] / xs_[j];
      p.b[i] = theta[kFingers * S + i] * w_[i];
    }
    return p;
  }

 private:
  Policy like_;
  VecX xs_;
  Vec3 w_;
};

// Generic improvement: `J(policy)` must be deterministic.
template <class ReturnFn>
SearchResult improve_policy(ReturnFn&& J, const Policy& init, const SearchOptions& opt = {}) {
  init.validate();
  const PolicyParameterization param(init, opt.state_scale);
  auto value = [&](const VecX& theta) { return J(param.unpack(theta)); };
  auto objective = [&](const VecX& theta, VecX* grad) -> double {
    const double f = value(theta);
    if (!grad) return f;
    if (!std::isfinite(f)) {
      grad->setZero(theta.size());
      return f;
    }
    *grad = forward_difference_gradient(value, theta, f, opt.fd_step);
    return f;
  };
  MinimizeOptions mopt = opt.minimize;
  mopt.nonfinite_is_error = true;
  const VecX theta0 = param.pack(init);
  const double j0 = value(theta0);
  if (!std::isfinite(j0)) {
    throw OptimizationError("non-finite expected return for the initial policy, theta = " +
                            format_vector(theta0));
  }
  const MinimizeResult res = minimize_bfgs(objective, theta0, mopt);
  SearchResult out;
  out.initial_return = j0;
  out.final_return = res.value;
  out.policy = param.unpack(res.x);
  out.iterations = res.iterations;
  out.evaluations = res.evaluations;
  out.stop_reason = res.stop_reason;
  return out;
}

inline SearchResult improve_policy(const GPModel& model, const Policy& init,
                                   const CostSpec& spec, const StateDistribution& x0,
                                   int horizon, std::uint64_t seed,
                                   const ReturnOptions& ropt = {},
                                   const SearchOptions& sopt = {}) {
  spec.validate();
  if (horizon < 1) throw DomainError("improve_policy: horizon must be >= 1");
  const ParticleNoise noise(ropt.particles, horizon, model.state_dim(), seed);
  auto J = [&](const Policy& p) {
    return expected_return(model, p, spec, x0, noise, ropt.reactive);
  };
  return improve_policy(J, init, sopt);
}

}  // namespace tic

#endif  // TIC_POLICY_SEARCH_HPP_
