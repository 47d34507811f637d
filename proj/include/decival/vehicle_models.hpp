#pragma once

// Longitudinal traffic models of the lane-change case study: a closed-form
// constant-acceleration surrogate and a controller-based reference iterated
// to a fixed point.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "decival/core.hpp"

namespace decival::traffic {

class ScenarioValidationError : public Error {
 public:
  ScenarioValidationError(std::string constraint, const std::string& what)
      : Error(constraint.empty() ? what : constraint + ": " + what),
        constraint_(std::move(constraint)) {}

  /// Name of the violated domain constraint, empty for structural errors.
  const std::string& constraint() const { return constraint_; }

 private:
  std::string constraint_;
};

class FixedPointDivergenceError : public Error {
 public:
  FixedPointDivergenceError(double residual, int iterations)
      : Error("fixed point not reached after " + std::to_string(iterations) +
              " iterations (residual " + std::to_string(residual) + " m)"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

struct VehicleState {
  std::string name;
  int lane = 0;  // 0 is the rightmost lane
  double position_m = 0.0;
  double velocity_mps = 0.0;
  double acceleration_mps2 = 0.0;
};

/// Gap-keeping law used by every vehicle of the reference model:
/// a = velocity_gain (v_leader - v) + gap_gain (gap - standstill - headway v),
/// saturated, and never above the vehicle's own planned acceleration.
struct ControllerParams {
  double velocity_gain = 0.5;  // 1/s
  double gap_gain = 0.2;       // 1/s^2
  double standstill_m = 10.0;
  double headway_s = 1.4;
  double min_acceleration_mps2 = -3.0;
  double max_acceleration_mps2 = 2.0;
  double interaction_range_m = 100.0;
  double convergence_m = 0.01;
  int max_iterations = 50;
};

struct Scenario {
  int lane_count = 3;
  VehicleState ego;
  std::vector<VehicleState> surrounding;
  double horizon_s = 8.0;
  double time_step_s = 0.1;
  double min_speed_mps = 6.0;
  double vehicle_length_m = 5.0;
  ControllerParams controller;

  /// Vehicle 0 is the ego, vehicle i > 0 is surrounding[i - 1].
  std::size_t vehicle_count() const { return 1 + surrounding.size(); }
  const VehicleState& vehicle(std::size_t id) const {
    return id == 0 ? ego : surrounding.at(id - 1);
  }
  VehicleState& vehicle(std::size_t id) {
    return id == 0 ? ego : surrounding.at(id - 1);
  }

  std::size_t step_count() const {
    return static_cast<std::size_t>(std::llround(horizon_s / time_step_s));
  }
};

/// Structural checks plus the ego constant-speed assumption.
inline void validate_structure(const Scenario& s) {
  auto fail = [](const std::string& what) {
    throw ScenarioValidationError({}, what);
  };
  if (s.lane_count < 1) fail("lane count must be at least 1");
  if (!(s.time_step_s > 0.0) || !std::isfinite(s.time_step_s)) {
    fail("time step must be positive");
  }
  if (!(s.horizon_s >= 0.0) || !std::isfinite(s.horizon_s)) {
    fail("horizon must be non-negative");
  }
  const double steps = s.horizon_s / s.time_step_s;
  if (std::abs(steps - std::round(steps)) > 1e-6) {
    fail("horizon must be a whole number of time steps");
  }
  if (!(s.vehicle_length_m >= 0.0)) fail("vehicle length must be >= 0");
  if (!(s.min_speed_mps >= 0.0)) fail("minimum speed must be >= 0");
  for (std::size_t id = 0; id < s.vehicle_count(); ++id) {
    const auto& v = s.vehicle(id);
    const std::string who = id == 0 ? "ego" : "vehicle '" + v.name + "'";
    if (v.lane < 0 || v.lane >= s.lane_count) fail(who + " lane out of range");
    if (!std::isfinite(v.position_m) || !std::isfinite(v.velocity_mps) ||
        !std::isfinite(v.acceleration_mps2)) {
      fail(who + " has a non-finite state");
    }
  }
  if (s.ego.acceleration_mps2 != 0.0) {
    throw ScenarioValidationError("c5-ego-constant-speed",
                                  "ego acceleration must be zero");
  }
  const auto& c = s.controller;
  if (!(c.min_acceleration_mps2 < 0.0 && c.max_acceleration_mps2 > 0.0) ||
      !(c.interaction_range_m >= 0.0) || !(c.convergence_m > 0.0) ||
      c.max_iterations < 1) {
    fail("invalid controller parameters");
  }
}

struct Sample {
  double position_m = 0.0;
  double velocity_mps = 0.0;
  double acceleration_mps2 = 0.0;  // applied over the following step
};

/// Per-vehicle time series at uniform steps; vehicle ids as in Scenario.
class Trace {
 public:
  Trace(const Scenario& s)
      : time_step_(s.time_step_s),
        samples_per_vehicle_(s.step_count() + 1),
        samples_(s.vehicle_count() * samples_per_vehicle_) {
    for (std::size_t id = 0; id < s.vehicle_count(); ++id) {
      lanes_.push_back(s.vehicle(id).lane);
      names_.push_back(id == 0 ? std::string("ego") : s.vehicle(id).name);
    }
  }

  std::size_t vehicles() const { return lanes_.size(); }
  std::size_t samples() const { return samples_per_vehicle_; }
  double time_step() const { return time_step_; }
  double time(std::size_t step) const {
    return static_cast<double>(step) * time_step_;
  }
  int lane(std::size_t vehicle) const { return lanes_.at(vehicle); }
  const std::string& name(std::size_t vehicle) const {
    return names_.at(vehicle);
  }

  Sample& at(std::size_t vehicle, std::size_t step) {
    return samples_[vehicle * samples_per_vehicle_ + step];
  }
  const Sample& at(std::size_t vehicle, std::size_t step) const {
    return samples_[vehicle * samples_per_vehicle_ + step];
  }

 private:
  double time_step_;
  std::size_t samples_per_vehicle_;
  std::vector<Sample> samples_;
  std::vector<int> lanes_;
  std::vector<std::string> names_;
};

inline double constant_acceleration_position(double x0, double v, double a,
                                             double t) {
  if (!(t >= 0.0)) throw PreconditionError("time must be non-negative");
  return 0.5 * a * t * t + v * t + x0;
}

/// Constant-acceleration motion that stops decelerating at the speed floor
/// and then holds its velocity.
class PlannedMotion {
 public:
  PlannedMotion(const VehicleState& v, double floor)
      : x0_(v.position_m),
        v0_(v.velocity_mps),
        a_(v.acceleration_mps2),
        floor_(floor) {
    if (a_ < 0.0) {
      floor_time_ = v0_ > floor_ ? (floor_ - v0_) / a_ : 0.0;
    }
  }

  double acceleration_at(double t) const {
    return floor_time_ && t >= *floor_time_ ? 0.0 : a_;
  }

  Sample at(double t) const {
    if (floor_time_ && t >= *floor_time_) {
      const double tf = *floor_time_;
      const double xf = constant_acceleration_position(x0_, v0_, a_, tf);
      const double vf = v0_ + a_ * tf;
      return {xf + vf * (t - tf), vf, 0.0};
    }
    return {constant_acceleration_position(x0_, v0_, a_, t), v0_ + a_ * t, a_};
  }

 private:
  double x0_;
  double v0_;
  double a_;
  double floor_;
  std::optional<double> floor_time_;
};

inline Trace surrogate_predict(const Scenario& s) {
  validate_structure(s);
  Trace trace(s);
  for (std::size_t id = 0; id < s.vehicle_count(); ++id) {
    const PlannedMotion plan(s.vehicle(id), s.min_speed_mps);
    for (std::size_t n = 0; n < trace.samples(); ++n) {
      trace.at(id, n) = plan.at(trace.time(n));
    }
  }
  return trace;
}

/// Nearest vehicle ahead in the same lane at t = 0, per vehicle id.
inline std::vector<std::optional<std::size_t>> lane_leaders(const Scenario& s) {
  std::vector<std::optional<std::size_t>> leaders(s.vehicle_count());
  for (std::size_t i = 0; i < s.vehicle_count(); ++i) {
    const auto& self = s.vehicle(i);
    for (std::size_t j = 0; j < s.vehicle_count(); ++j) {
      const auto& other = s.vehicle(j);
      if (j == i || other.lane != self.lane ||
          !(other.position_m > self.position_m)) {
        continue;
      }
      if (!leaders[i] ||
          other.position_m < s.vehicle(*leaders[i]).position_m) {
        leaders[i] = j;
      }
    }
  }
  return leaders;
}

struct HighValidityResult {
  Trace trace;
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

// Piecewise-constant acceleration over one step, honoring the speed floor.
inline void advance(double& x, double& v, double a, double dt, double floor) {
  if (a < 0.0 && v + a * dt < floor) {
    if (v <= floor) {
      x += v * dt;
      return;
    }
    const double t1 = (floor - v) / a;
    x += v * t1 + 0.5 * a * t1 * t1 + floor * (dt - t1);
    v = floor;
    return;
  }
  x += v * dt + 0.5 * a * dt * dt;
  v += a * dt;
}

}  // namespace detail

/// Fixed-point prediction: iteration 0 is the surrogate trace; each further
/// iteration re-simulates every vehicle under the gap-keeping controller
/// against its leader's trace from the previous iteration, until positions
/// move less than the convergence threshold.
inline HighValidityResult high_validity_predict(const Scenario& s) {
  validate_structure(s);
  const auto& c = s.controller;
  const auto leaders = lane_leaders(s);
  const double dt = s.time_step_s;

  std::vector<PlannedMotion> plans;
  for (std::size_t id = 0; id < s.vehicle_count(); ++id) {
    plans.emplace_back(s.vehicle(id), s.min_speed_mps);
  }

  Trace previous = surrogate_predict(s);
  double residual = std::numeric_limits<double>::infinity();
  for (int iteration = 1; iteration <= c.max_iterations; ++iteration) {
    Trace next(s);
    for (std::size_t i = 0; i < s.vehicle_count(); ++i) {
      const auto& plan = plans[i];
      next.at(i, 0) = plan.at(0.0);
      double x = next.at(i, 0).position_m;
      double v = next.at(i, 0).velocity_mps;
      bool engaged = false;
      for (std::size_t n = 0; n + 1 < next.samples(); ++n) {
        const double t = next.time(n);
        double command = plan.acceleration_at(t);
        if (const auto j = leaders[i]) {
          const Sample& lead = previous.at(*j, n);
          const double gap = lead.position_m - x - s.vehicle_length_m;
          if (gap <= c.interaction_range_m) {
            const double desired = c.standstill_m + c.headway_s * v;
            const double law = std::clamp(
                c.velocity_gain * (lead.velocity_mps - v) +
                    c.gap_gain * (gap - desired),
                c.min_acceleration_mps2, c.max_acceleration_mps2);
            if (law < command) {
              command = law;
              engaged = true;
            }
          }
        }
        if (!engaged) {
          next.at(i, n + 1) = plan.at(next.time(n + 1));
          x = next.at(i, n + 1).position_m;
          v = next.at(i, n + 1).velocity_mps;
          continue;
        }
        next.at(i, n).acceleration_mps2 = command;
        detail::advance(x, v, command, dt, s.min_speed_mps);
        next.at(i, n + 1) = {x, v, command};
      }
    }

    residual = 0.0;
    for (std::size_t i = 0; i < s.vehicle_count(); ++i) {
      for (std::size_t n = 0; n < next.samples(); ++n) {
        residual = std::max(residual, std::abs(next.at(i, n).position_m -
                                               previous.at(i, n).position_m));
      }
    }
    previous = std::move(next);
    if (residual < c.convergence_m) {
      return {std::move(previous), residual, iteration};
    }
  }
  throw FixedPointDivergenceError(residual, c.max_iterations);
}

enum class ModelKind { constant_acceleration, high_validity };

inline std::string_view to_string(ModelKind m) {
  return m == ModelKind::constant_acceleration ? "constant-acceleration"
                                               : "high-validity";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "constant-acceleration") return ModelKind::constant_acceleration;
  if (s == "high-validity") return ModelKind::high_validity;
  return std::nullopt;
}

inline Trace predict(ModelKind kind, const Scenario& s) {
  return kind == ModelKind::constant_acceleration
             ? surrogate_predict(s)
             : high_validity_predict(s).trace;
}

}  // namespace decival::traffic
