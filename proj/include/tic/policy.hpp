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

#ifndef TIC_POLICY_HPP_
#define TIC_POLICY_HPP_

#include <cstdint>
#include <random>

#include "tic/common.hpp"

namespace tic {

// Affine state feedback u_p = A x + b, saturated into the grasp-time motor
// bounds. A is 3 x 4 for the full (yaw, forces) state and 3 x 1 when only
// yaw is observed.
struct Policy {
  MatX A;
  Vec3 b = Vec3::Zero();
  MotorBounds bounds{};

  Eigen::Index state_dim() const { return A.cols(); }

  void validate() const {
    if (A.rows() != kFingers || A.cols() < 1) throw DomainError("policy: A must be 3 x n");
    if (!A.allFinite() || !b.allFinite()) throw DomainError("policy: non-finite parameters");
  }
};

inline Vec3 policy_action(const Policy& policy, const VecX& x) {
  if (x.size() != policy.A.cols()) {
    throw DomainError("policy_action: state has dimension " + std::to_string(x.size()) +
                      ", policy expects " + std::to_string(policy.A.cols()));
  }
  return clamp_to(policy.A * x + policy.b, policy.bounds);
}

inline Vec3 policy_action(const Policy& policy, double yaw) {
  return policy_action(policy, VecX::Constant(1, yaw));
}

// Per-dimension magnitude used to scale random gains and search steps:
// radians for yaw, newtons for forces.
inline VecX state_scale(const VecX& x0) {
  return x0.cwiseAbs().cwiseMax(1.0);
}

// Random initial policy. The offset is a zero-mean Gaussian perturbation of
// `center` (normally the grasp-time closure) and the gains are zero-mean
// Gaussian; both are scaled by `spread` times the room left between `center`
// and the nearest bound. Draws are repeated until the command emitted at
// `initial_state` lies strictly inside the bounds.
inline Policy random_policy(Eigen::Index state_dim, const MotorBounds& bounds,
                            const VecX& initial_state, const Vec3& center, std::uint64_t seed,
                            double spread = 0.25) {
  if (state_dim < 1) throw DomainError("random_policy: state_dim must be >= 1");
  if (initial_state.size() != state_dim) {
    throw DomainError("random_policy: initial state dimension mismatch");
  }
  Vec3 room;
  for (int i = 0; i < kFingers; ++i) {
    if (!(bounds[i].lo < center[i] && center[i] < bounds[i].hi)) {
      throw DomainError("random_policy: center must lie strictly inside the bounds");
    }
    room[i] = std::min(center[i] - bounds[i].lo, bounds[i].hi - center[i]);
  }
  const VecX xs = state_scale(initial_state);
  const double per_input = spread / std::sqrt(static_cast<double>(state_dim) + 1.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Policy p;
  p.bounds = bounds;
  p.A.resize(kFingers, state_dim);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (int i = 0; i < kFingers; ++i) {
      for (Eigen::Index j = 0; j < state_dim; ++j) {
        p.A(i, j) = per_input * room[i] / xs[j] * normal(rng);
      }
      p.b[i] = per_input * room[i] * normal(rng);
    }
    // Express b so that A x0 + b is the perturbed command around center.
    p.b += center - p.A * initial_state;
    const Vec3 u0 = p.A * initial_state + p.b;
    bool inside = true;
    for (int i = 0; i < kFingers; ++i) inside &= bounds[i].lo < u0[i] && u0[i] < bounds[i].hi;
    if (inside) return p;
  }
  throw DomainError("random_policy: could not draw an admissible policy");
}

}  // namespace tic

#endif  // TIC_POLICY_HPP_
