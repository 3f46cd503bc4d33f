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

// Ground-truth hand/object simulator. Three fingers are position-commanded;
// each motor follows its command through a first-order servo. Normal force
// grows affinely with closure beyond the contact position, the object yaw
// follows the thumb-versus-opposing-fingers differential, and a grasp that
// stays loose for long enough drops the object irreversibly.

#ifndef TIC_PLANT_HPP_
#define TIC_PLANT_HPP_

#include <cstdint>
#include <random>
#include <string>

#include "tic/common.hpp"
#include "tic/reactive.hpp"

namespace tic {

struct PlantConfig {
  Vec3 contact_positions = Vec3::Constant(0.50);  // motor units
  MotorBounds motor_bounds = {Interval{0.50, 0.524}, Interval{0.50, 0.524},
                              Interval{0.50, 0.524}};
  double force_gain = 100.0;        // N per motor unit
  double force_saturation = 1.5;    // N
  double rotation_gain = 150.0;     // rad per motor unit of differential
  double slip_drift_rate = 0.002;   // rad per tick while loosely held
  int slip_fall_ticks = 300;
  int quick_fall_ticks = 25;
  Eigen::Vector4d process_noise_std{3e-4, 0.01, 0.01, 0.01};  // (yaw, f1, f2, f3)
  double tick_duration = 0.01;      // s
  double servo_rate = 0.03;         // fraction of the command error closed per tick
  double grip_offset = 0.013;       // closure beyond contact at reset, motor units
  // The object's true class boundaries; forces are normalized by 2 N.
  SlipCalibration grip_classes{0.25, 0.3, 0.7, 2.0};
  std::uint64_t rng_seed = 1;

  void validate() const {
    for (int i = 0; i < kFingers; ++i) {
      const auto& b = motor_bounds[i];
      if (!(std::isfinite(b.lo) && std::isfinite(b.hi) && b.lo <= b.hi)) {
        throw ConfigError("plant: motor bounds must be finite nonempty intervals");
      }
      if (!b.contains(contact_positions[i])) {
        throw ConfigError("plant: motor bounds must contain the contact position");
      }
      if (!b.contains(contact_positions[i] + grip_offset)) {
        throw ConfigError("plant: reset grip offset leaves the motor bounds");
      }
    }
    if (!(force_gain > 0.0 && force_saturation > 0.0 && rotation_gain > 0.0)) {
      throw ConfigError("plant: force_gain, force_saturation and rotation_gain must be > 0");
    }
    if (!((process_noise_std.array() >= 0.0).all() && process_noise_std.allFinite())) {
      throw ConfigError("plant: noise std must be >= 0");
    }
    if (!(slip_fall_ticks > quick_fall_ticks && quick_fall_ticks > 0)) {
      throw ConfigError("plant: need slip_fall_ticks > quick_fall_ticks > 0");
    }
    if (!(slip_drift_rate >= 0.0)) throw ConfigError("plant: slip_drift_rate must be >= 0");
    if (!(tick_duration > 0.0)) throw ConfigError("plant: tick_duration must be > 0");
    if (!(servo_rate > 0.0 && servo_rate <= 1.0)) {
      throw ConfigError("plant: servo_rate must lie in (0, 1]");
    }
    if (!(grip_offset >= 0.0)) throw ConfigError("plant: grip_offset must be >= 0");
    grip_classes.validate();
  }
};

// RL-visible observation (yaw, fingertip normal forces).
struct State {
  double yaw = 0.0;
  Vec3 forces = Vec3::Zero();

  Eigen::Vector4d vector() const { return {yaw, forces[0], forces[1], forces[2]}; }
};

struct Control {
  Vec3 motors = Vec3::Zero();
};

enum class Event { None, Fell };

struct PlantState {
  double yaw = 0.0;
  Vec3 forces = Vec3::Zero();
  Vec3 closure = Vec3::Zero();
  int slip_timer = 0;
  bool fallen = false;
  // Slipping coefficient and class of the forces emitted on the last tick.
  double alpha = 1.0;
  SlipClass grip = SlipClass::Slipped;
  std::mt19937_64 rng{};
};

struct StepResult {
  PlantState state;
  Event event = Event::None;
};

namespace plant_detail {

// Differential that drives object yaw: thumb against the mean of the two
// opposing fingers.
inline double differential(const Vec3& closure) {
  return closure[0] - 0.5 * (closure[1] + closure[2]);
}

inline Vec3 closure_forces(const Vec3& closure, const PlantConfig& cfg) {
  Vec3 f;
  for (int i = 0; i < kFingers; ++i) {
    f[i] = std::clamp(cfg.force_gain * (closure[i] - cfg.contact_positions[i]), 0.0,
                      cfg.force_saturation);
  }
  return f;
}

// 1 when firmly held, fading linearly to 0 across the not-firmly-held band.
inline double grip_quality(double alpha, const SlipCalibration& cls) {
  if (alpha < cls.firm_threshold) return 1.0;
  if (alpha >= cls.slip_threshold) return 0.0;
  return (cls.slip_threshold - alpha) / (cls.slip_threshold - cls.firm_threshold);
}

}  // namespace plant_detail

inline PlantState reset(const PlantConfig& cfg, double initial_yaw) {
  cfg.validate();
  if (!std::isfinite(initial_yaw)) throw DomainError("reset: initial yaw must be finite");
  PlantState s;
  s.rng.seed(cfg.rng_seed);
  s.yaw = initial_yaw;
  s.closure = cfg.contact_positions + Vec3::Constant(cfg.grip_offset);
  s.forces = plant_detail::closure_forces(s.closure, cfg);
  s.alpha = slipping_coefficient(s.forces, cfg.grip_classes.force_scale);
  s.grip = slip_class(s.alpha, cfg.grip_classes);
  s.slip_timer = 0;
  s.fallen = false;
  return s;
}

inline State observe(const PlantState& s) { return State{s.yaw, s.forces}; }

inline StepResult step(const PlantState& current, const Control& command,
                       const PlantConfig& cfg) {
  if (current.fallen) {
    throw IrreversibleEventError("step: the object has already fallen");
  }
  if (!command.motors.allFinite()) throw DomainError("step: non-finite motor command");

  StepResult out{current, Event::None};
  PlantState& s = out.state;
  std::normal_distribution<double> normal(0.0, 1.0);

  const Vec3 target = clamp_to(command.motors, cfg.motor_bounds);
  const double previous_differential = plant_detail::differential(s.closure);
  s.closure += cfg.servo_rate * (target - s.closure);

  Vec3 forces = plant_detail::closure_forces(s.closure, cfg);
  for (int i = 0; i < kFingers; ++i) {
    forces[i] += cfg.process_noise_std[i + 1] * normal(s.rng);
  }
  s.forces = forces.cwiseMax(0.0).cwiseMin(cfg.force_saturation);
  s.alpha = slipping_coefficient(s.forces, cfg.grip_classes.force_scale);
  s.grip = slip_class(s.alpha, cfg.grip_classes);

  const double rotation =
      cfg.rotation_gain * (plant_detail::differential(s.closure) - previous_differential);
  double dyaw = rotation * plant_detail::grip_quality(s.alpha, cfg.grip_classes);
  if (s.grip != SlipClass::FirmlyHeld) dyaw -= cfg.slip_drift_rate;
  s.yaw += dyaw + cfg.process_noise_std[0] * normal(s.rng);

  if (s.grip == SlipClass::FirmlyHeld) {
    s.slip_timer = 0;
  } else {
    ++s.slip_timer;
    const int limit =
        s.grip == SlipClass::Slipped ? cfg.quick_fall_ticks : cfg.slip_fall_ticks;
    if (s.slip_timer >= limit) {
      s.fallen = true;
      out.event = Event::Fell;
    }
  }
  return out;
}

}  // namespace tic

#endif  // TIC_PLANT_HPP_
