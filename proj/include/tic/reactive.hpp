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

// Tactile reflex layer: slipping coefficient, grip classes, the proportional
// slip-avoidance correction and its pseudoenergy, plus the empirical
// calibration that turns labelled force samples into class thresholds.

#ifndef TIC_REACTIVE_HPP_
#define TIC_REACTIVE_HPP_

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tic/common.hpp"

namespace tic {

enum class SlipClass { FirmlyHeld, NotFirmlyHeld, Slipped };

inline std::string_view to_string(SlipClass c) {
  switch (c) {
    case SlipClass::FirmlyHeld: return "firmly_held";
    case SlipClass::NotFirmlyHeld: return "not_firmly_held";
    case SlipClass::Slipped: return "slipped";
  }
  return "unknown";
}

inline SlipClass slip_class_from_string(std::string_view s) {
  if (s == "firmly_held" || s == "FirmlyHeld" || s == "firm") return SlipClass::FirmlyHeld;
  if (s == "not_firmly_held" || s == "NotFirmlyHeld" || s == "not_firm") {
    return SlipClass::NotFirmlyHeld;
  }
  if (s == "slipped" || s == "Slipped") return SlipClass::Slipped;
  throw ConfigError("unknown slip class label '" + std::string(s) + "'");
}

struct SlipCalibration {
  double alpha_des = 0.25;
  double firm_threshold = 0.3;
  double slip_threshold = 0.7;
  double force_scale = 1.0;  // N

  void validate() const {
    if (!(0.0 < alpha_des && alpha_des < firm_threshold &&
          firm_threshold < slip_threshold && slip_threshold < 1.0)) {
      throw ConfigError("slip calibration must satisfy 0 < alpha_des < firm < slip < 1");
    }
    if (!(force_scale > 0.0) || !std::isfinite(force_scale)) {
      throw ConfigError("slip calibration force_scale must be positive");
    }
  }

  bool operator==(const SlipCalibration&) const = default;
};

struct ReactiveGain {
  Vec3 k = Vec3::Constant(0.4);

  void validate() const {
    for (int i = 0; i < kFingers; ++i) {
      if (!(k[i] > 0.0) || !std::isfinite(k[i])) {
        throw ConfigError("reactive gain entries must be positive");
      }
    }
  }
};

struct LabeledForceSample {
  Vec3 forces = Vec3::Zero();
  SlipClass label = SlipClass::FirmlyHeld;
};

// exp(-|f / scale|^2). Zero force gives 1 (slipping), large force tends to 0.
inline double slipping_coefficient(const Vec3& forces, double force_scale = 1.0) {
  if (!forces.allFinite()) throw NumericError("slipping_coefficient: non-finite force");
  if (!(force_scale > 0.0)) throw DomainError("slipping_coefficient: force_scale must be > 0");
  return std::exp(-(forces / force_scale).squaredNorm());
}

inline void check_alpha(double alpha, const char* who) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw DomainError(std::string(who) + ": alpha outside [0, 1]");
  }
}

// Half-open classes: [0, firm) firmly held, [firm, slip) not firmly held,
// [slip, 1] slipped.
inline SlipClass slip_class(double alpha, const SlipCalibration& cal) {
  check_alpha(alpha, "slip_class");
  if (alpha < cal.firm_threshold) return SlipClass::FirmlyHeld;
  if (alpha >= cal.slip_threshold) return SlipClass::Slipped;
  return SlipClass::NotFirmlyHeld;
}

inline double control_error(double alpha, const SlipCalibration& cal) {
  check_alpha(alpha, "control_error");
  return alpha - cal.alpha_des;
}

// Positive error means the grasp is too loose, so every finger closes.
inline Vec3 reactive_correction(double error, const ReactiveGain& gain) {
  return gain.k * error;
}

inline Vec3 combine(const Vec3& policy_command, const Vec3& correction,
                    const MotorBounds& bounds) {
  return clamp_to(policy_command + correction, bounds);
}

inline double reactive_pseudoenergy(double error) { return std::abs(error); }

// Number of ticks whose pseudoenergy exceeds `threshold`.
inline int count_interventions(std::span<const double> pseudoenergy, double threshold = 0.25) {
  int n = 0;
  for (double e : pseudoenergy) n += e > threshold ? 1 : 0;
  return n;
}

struct CalibrationOptions {
  double force_scale = 1.0;
  double margin = 0.05;       // alpha_des sits this far below the firm threshold
  int threshold_decimals = 2; // thresholds are reported at this resolution
};

// Threshold between two adjacent classes is the midpoint of the gap between
// the lower class's largest alpha and the upper class's smallest alpha.
inline SlipCalibration calibrate(std::span<const LabeledForceSample> samples,
                                 const CalibrationOptions& opt = {}) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  struct Range {
    double lo = kInf;
    double hi = -kInf;
    int count = 0;
  };
  std::array<Range, 3> ranges{};
  for (const auto& s : samples) {
    if (!s.forces.allFinite() || (s.forces.array() < 0.0).any()) {
      throw CalibrationError("calibration sample with negative or non-finite force");
    }
    const double a = slipping_coefficient(s.forces, opt.force_scale);
    auto& r = ranges[static_cast<int>(s.label)];
    r.lo = std::min(r.lo, a);
    r.hi = std::max(r.hi, a);
    ++r.count;
  }
  static constexpr std::array<SlipClass, 3> kOrder = {
      SlipClass::FirmlyHeld, SlipClass::NotFirmlyHeld, SlipClass::Slipped};
  for (int c = 0; c < 3; ++c) {
    if (ranges[c].count < 2) {
      throw CalibrationError("calibration needs at least 2 samples of class '" +
                             std::string(to_string(kOrder[c])) + "', got " +
                             std::to_string(ranges[c].count));
    }
  }
  for (int c = 0; c < 2; ++c) {
    if (!(ranges[c].hi < ranges[c + 1].lo)) {
      throw CalibrationError("classes '" + std::string(to_string(kOrder[c])) + "' and '" +
                             std::string(to_string(kOrder[c + 1])) +
                             "' overlap in slipping coefficient");
    }
  }
  const double scale = std::pow(10.0, opt.threshold_decimals);
  auto quantize = [scale](double v) { return std::round(v * scale) / scale; };

  SlipCalibration cal;
  cal.force_scale = opt.force_scale;
  cal.firm_threshold = quantize(0.5 * (ranges[0].hi + ranges[1].lo));
  cal.slip_threshold = quantize(0.5 * (ranges[1].hi + ranges[2].lo));
  cal.alpha_des = quantize(cal.firm_threshold - opt.margin);
  try {
    cal.validate();
  } catch (const ConfigError& e) {
    throw CalibrationError(std::string("calibration produced invalid thresholds: ") + e.what());
  }
  return cal;
}

}  // namespace tic

#endif  // TIC_REACTIVE_HPP_
