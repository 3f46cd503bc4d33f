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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "tic/policy_search.hpp"

namespace tic {
namespace {

const MotorBounds kWide = {Interval{-100, 100}, Interval{-100, 100}, Interval{-100, 100}};

// One-step linear plant x' = x + B u from several start states with cost
// |x' - target|^2 + rho |u|^2. With u = A x + b the cost is a linear least
// squares problem in (A, b), so its minimizer has a closed form.
struct LinearProblem {
  MatX starts;  // n x 2
  Eigen::Matrix<double, 2, 3> B;
  Eigen::Vector2d target{1.0, -0.5};
  double rho = 0.1;

  LinearProblem() {
    starts.resize(5, 2);
    starts << 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, -1.0, 0.5, 0.3, -0.7;
    B << 1.0, 0.5, 0.0, 0.0, -0.3, 1.0;
  }

  double J(const Policy& p) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < starts.rows(); ++i) {
      const VecX x = starts.row(i).transpose();
      const Vec3 u = policy_action(p, x);
      s += (x + B * u - target).squaredNorm() + rho * u.squaredNorm();
    }
    return s / static_cast<double>(starts.rows());
  }

  // Parameters ordered (A row-major, b).
  VecX exact() const {
    const Eigen::Index n = starts.rows();
    MatX M = MatX::Zero(5 * n, 9);
    VecX r = VecX::Zero(5 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      // u = G theta with G the 3 x 9 map for this start.
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
    return (M.transpose() * M).ldlt().solve(M.transpose() * r);
  }
};

TEST(ImprovePolicy, RecoversClosedFormMinimizer) {
  const LinearProblem prob;
  Policy init;
  init.A = MatX::Zero(3, 2);
  init.bounds = kWide;
  SearchOptions opt;
  opt.fd_step = 1e-7;
  opt.minimize.max_iterations = 200;
  opt.minimize.gradient_tolerance = 1e-9;
  const auto res = improve_policy([&](const Policy& p) { return prob.J(p); }, init, opt);
  const VecX want = prob.exact();
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(res.policy.A(k, 0), want[2 * k], 1e-3);
    EXPECT_NEAR(res.policy.A(k, 1), want[2 * k + 1], 1e-3);
    EXPECT_NEAR(res.policy.b[k], want[6 + k], 1e-3);
  }
  EXPECT_LE(res.final_return, res.initial_return);
}

TEST(Parameterization, RoundTrip) {
  Policy p;
  p.A = MatX(3, 4);
  p.A.setRandom();
  p.b = Vec3(0.51, 0.52, 0.505);
  p.bounds = {Interval{0.5, 0.524}, Interval{0.5, 0.524}, Interval{0.5, 0.524}};
  VecX scale(4);
  scale << 1.2, 1.3, 1.0, 2.0;
  const PolicyParameterization param(p, scale);
  EXPECT_EQ(param.size(), 15);
  const Policy q = param.unpack(param.pack(p));
  EXPECT_LT((q.A - p.A).norm(), 1e-15);
  EXPECT_LT((q.b - p.b).norm(), 1e-15);
}

GPModel yaw_model() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 0.524);
  std::uniform_real_distribution<double> y(0.0, 1.5);
  Dataset d;
  for (int i = 0; i < 30; ++i) {
    const VecX x = VecX::Constant(1, y(rng));
    const Vec3 c(u(rng), u(rng), u(rng));
    d.transitions.push_back({x, c, x + VecX::Constant(1, 20.0 * (c[0] - 0.5 * (c[1] + c[2])))});
  }
  FitOptions opt;
  opt.restarts = 2;
  return fit(d, opt);
}

TEST(ImprovePolicy, ReturnNeverIncreasesUnderSameSeed) {
  const GPModel model = yaw_model();
  CostSpec spec;
  spec.variant = CostVariant::VisualOnly;
  spec.phi_des = 1.2;
  const MotorBounds b = {Interval{0.5, 0.524}, Interval{0.5, 0.524}, Interval{0.5, 0.524}};
  const auto init = StateDistribution::gaussian(VecX::Zero(1), MatX::Zero(1, 1));
  ReturnOptions ropt;
  ropt.particles = 30;
  SearchOptions sopt;
  sopt.minimize.max_iterations = 15;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Policy p0 = random_policy(1, b, VecX::Zero(1), Vec3::Constant(0.512), seed, 1.0);
    const auto res = improve_policy(model, p0, spec, init, 8, seed, ropt, sopt);
    EXPECT_LE(res.final_return, res.initial_return);
    EXPECT_EQ(res.final_return, expected_return(model, res.policy, spec, init, 8, seed, ropt));
    EXPECT_NEAR(res.initial_return, expected_return(model, p0, spec, init, 8, seed, ropt), 1e-12);
  }
}

TEST(RandomPolicy, AdmissibleAndSeeded) {
  const MotorBounds b = {Interval{0.5, 0.524}, Interval{0.5, 0.524}, Interval{0.5, 0.524}};
  VecX x0(4);
  x0 << 0.0, 1.3, 1.3, 1.3;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Policy p = random_policy(4, b, x0, Vec3::Constant(0.513), s, 1.0);
    const Vec3 u = p.A * x0 + p.b;
    for (int i = 0; i < 3; ++i) {
      EXPECT_GT(u[i], 0.5);
      EXPECT_LT(u[i], 0.524);
    }
    const Policy q = random_policy(4, b, x0, Vec3::Constant(0.513), s, 1.0);
    EXPECT_EQ(p.A, q.A);
    EXPECT_EQ(p.b, q.b);
  }
  EXPECT_THROW(random_policy(4, b, x0, Vec3::Constant(0.6), 1), DomainError);
  EXPECT_THROW(random_policy(2, b, x0, Vec3::Constant(0.513), 1), DomainError);
}

TEST(PolicyAction, ClampsAndChecksDimension) {
  Policy p;
  p.A = MatX::Ones(3, 1);
  p.b = Vec3::Zero();
  p.bounds = {Interval{0, 1}, Interval{0, 1}, Interval{0, 1}};
  EXPECT_EQ(policy_action(p, 0.5), Vec3::Constant(0.5));
  EXPECT_EQ(policy_action(p, 3.0), Vec3::Ones());
  EXPECT_THROW(policy_action(p, VecX::Zero(2)), DomainError);
}

TEST(ImprovePolicy, NonFiniteInitialReturnIsAnError) {
  Policy p;
  p.A = MatX::Zero(3, 1);
  p.bounds = kWide;
  EXPECT_THROW(improve_policy([](const Policy&) { return NAN; }, p), OptimizationError);
}

}  // namespace
}  // namespace tic
