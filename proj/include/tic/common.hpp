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

#ifndef TIC_COMMON_HPP_
#define TIC_COMMON_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tic {

inline constexpr int kFingers = 3;

using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Error hierarchy. Every failure the library reports derives from Error so
// callers can catch one type at the boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IrreversibleEventError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double clamp(double v) const { return std::clamp(v, lo, hi); }
  double center() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const Interval&) const = default;
};

using MotorBounds = std::array<Interval, kFingers>;

inline Vec3 clamp_to(const Vec3& u, const MotorBounds& bounds) {
  Vec3 out;
  for (int i = 0; i < kFingers; ++i) out[i] = bounds[i].clamp(u[i]);
  return out;
}

inline bool within(const Vec3& u, const MotorBounds& bounds) {
  for (int i = 0; i < kFingers; ++i) {
    if (!bounds[i].contains(u[i])) return false;
  }
  return true;
}

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Seed mixing (splitmix64 finalizer). Used to derive independent streams
// from one master seed by fixed arithmetic.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace tic

#endif  // TIC_COMMON_HPP_
