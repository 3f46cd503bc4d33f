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

// Long-term prediction through a learned GP model by seeded particles. All
// Gaussian draws are fixed per (particle, step) by the seed, so the predicted
// trajectory is a deterministic, piecewise-smooth function of the policy
// parameters and can be differentiated by finite differences.

#ifndef TIC_PROPAGATE_HPP_
#define TIC_PROPAGATE_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "tic/common.hpp"
#include "tic/gp.hpp"
#include "tic/policy.hpp"
#include "tic/reactive.hpp"

namespace tic {

// The reflex loop as seen inside the model: corrections recomputed from the
// predicted forces at every model step.
struct ReactiveLoop {
  SlipCalibration calibration;
  ReactiveGain gain;
};

struct StateDistribution {
  VecX mean;
  MatX covariance;
  MatX particles;  // N x S; empty for a purely Gaussian description
  VecX weights;    // sums to 1 when particles are present

  static StateDistribution gaussian(VecX mean, MatX covariance) {
    return {std::move(mean), std::move(covariance), MatX(), VecX()};
  }

  static StateDistribution from_particles(MatX particles) {
    StateDistribution d;
    const Eigen::Index n = particles.rows();
    d.weights = VecX::Constant(n, 1.0 / static_cast<double>(n));
    d.mean = particles.colwise().mean().transpose();
    const MatX centered = particles.rowwise() - d.mean.transpose();
    d.covariance = centered.transpose() * centered / static_cast<double>(n);
    d.particles = std::move(particles);
    return d;
  }
};

// Standard normal draws for every (particle, step, dimension); matrix t
// (t = 0 for the initial sample) holds the draws used at step t. Each column
// is shifted and scaled to exactly zero sample mean and unit sample variance.
struct ParticleNoise {
  int particles = 0;
  int horizon = 0;
  Eigen::Index state_dim = 0;
  std::vector<MatX> draws;  // horizon + 1 matrices of particles x state_dim

  ParticleNoise() = default;
  ParticleNoise(int n, int horizon_steps, Eigen::Index dim, std::uint64_t seed)
      : particles(n), horizon(horizon_steps), state_dim(dim) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    draws.resize(static_cast<std::size_t>(horizon) + 1);
    for (auto& m : draws) {
      m.resize(n, dim);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = normal(rng);
      }
      if (n < 2) continue;
      for (Eigen::Index j = 0; j < dim; ++j) {
        auto col = m.col(j);
        col.array() -= col.mean();
        const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
        if (sd > 0.0) col /= sd;
      }
    }
  }
};

struct PropagateOptions {
  int particles = 300;
  std::optional<ReactiveLoop> reactive;
};

namespace propagate_detail {

// Rows of X are (yaw, f1, f2, f3) states; applies the policy and, when
// present, the modeled reflex correction.
inline MatX controls(const Policy& policy, const MatX& X,
                     const std::optional<ReactiveLoop>& reactive) {
  const Eigen::Index n = X.rows();
  MatX U = (X * policy.A.transpose()).rowwise() + policy.b.transpose();
  if (reactive) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3 f = X.row(i).segment<3>(1).transpose();
      const double a = std::exp(-(f / reactive->calibration.force_scale).squaredNorm());
      U.row(i) += (reactive->gain.k * (a - reactive->calibration.alpha_des)).transpose();
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < kFingers; ++k) U(i, k) = policy.bounds[k].clamp(U(i, k));
  }
  return U;
}

}  // namespace propagate_detail

// Returns horizon + 1 particle matrices: the initial sample followed by one
// per predicted step.
inline std::vector<MatX> propagate_particles(const GPModel& model, const Policy& policy,
                                             const StateDistribution& init,
                                             const ParticleNoise& noise,
                                             const std::optional<ReactiveLoop>& reactive) {
  const Eigen::Index S = model.state_dim();
  if (noise.horizon < 1) throw DomainError("propagate: horizon must be >= 1");
  if (init.mean.size() != S || policy.state_dim() != S || noise.state_dim != S) {
    throw DomainError("propagate: state dimension mismatch");
  }
  if (reactive && S != 4) throw DomainError("propagate: the reflex loop needs force states");

  std::vector<MatX> out;
  out.reserve(static_cast<std::size_t>(noise.horizon) + 1);
  MatX X;
  if (init.particles.rows() == noise.particles && init.particles.cols() == S) {
    X = init.particles;
  } else {
    // Square root of a PSD covariance; a point mass gives exactly the mean.
    const Eigen::SelfAdjointEigenSolver<MatX> eig(init.covariance);
    if (eig.info() != Eigen::Success) throw NumericError("propagate: bad initial covariance");
    const MatX L = eig.eigenvectors() *
                   eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    X = (noise.draws[0] * L.transpose()).rowwise() + init.mean.transpose();
    if (S == 4) X.rightCols(3) = X.rightCols(3).cwiseMax(0.0);
  }
  out.push_back(X);

  MatX Z(noise.particles, S + kFingers), mean, var;
  for (int t = 1; t <= noise.horizon; ++t) {
    Z.leftCols(S) = X;
    Z.rightCols(kFingers) = propagate_detail::controls(policy, X, reactive);
    model.predict_batch(Z, mean, var);
    X = mean + var.cwiseSqrt().cwiseProduct(noise.draws[static_cast<std::size_t>(t)]);
    // Normal forces cannot pull.
    if (S == 4) X.rightCols(3) = X.rightCols(3).cwiseMax(0.0);
    out.push_back(X);
  }
  return out;
}

// Predicted state distributions p(x_1), ..., p(x_T).
inline std::vector<StateDistribution> propagate(const GPModel& model, const Policy& policy,
                                                const StateDistribution& init, int horizon,
                                                std::uint64_t seed,
                                                const PropagateOptions& opt = {}) {
  if (horizon < 1) throw DomainError("propagate: horizon must be >= 1");
  if (opt.particles < 1) throw DomainError("propagate: need at least one particle");
  const ParticleNoise noise(opt.particles, horizon, model.state_dim(), seed);
  auto sets = propagate_particles(model, policy, init, noise, opt.reactive);
  std::vector<StateDistribution> out;
  out.reserve(static_cast<std::size_t>(horizon));
  for (std::size_t t = 1; t < sets.size(); ++t) {
    out.push_back(StateDistribution::from_particles(std::move(sets[t])));
  }
  return out;
}

}  // namespace tic

#endif  // TIC_PROPAGATE_HPP_
