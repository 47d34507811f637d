#pragma once

// Quantity-of-interest extraction and the rule-based lane-change decision
// applied to the traces of either model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "decival/core.hpp"
#include "decival/vehicle_models.hpp"

namespace decival::traffic {

enum class LaneAction { keep_lane, change_left, change_right };

inline std::string_view to_string(LaneAction a) {
  switch (a) {
    case LaneAction::keep_lane: return "KeepLane";
    case LaneAction::change_left: return "ChangeLeft";
    case LaneAction::change_right: return "ChangeRight";
  }
  return "KeepLane";
}

inline const CategoricalSpace& lane_decision_space() {
  static const CategoricalSpace space({"KeepLane", "ChangeLeft", "ChangeRight"});
  return space;
}

inline Decision to_decision(LaneAction a) {
  return lane_decision_space().make(to_string(a));
}

/// Thresholds of the decision rule. Lane clearance needs both the nearest
/// leader and the nearest trailer of that lane at least this far away.
struct DecisionRules {
  double safe_front_gap_m = 30.0;
  double clearance_front_m = 30.0;
  double clearance_rear_m = 30.0;
};

struct QuantityOfInterest {
  double min_front_gap_m = std::numeric_limits<double>::infinity();
  double min_time_to_collision_s = std::numeric_limits<double>::infinity();
  bool left_lane_exists = false;
  bool left_lane_clear = true;
  bool right_lane_exists = false;
  bool right_lane_clear = true;
};

namespace detail {

inline bool lane_clear(const Trace& trace, const Scenario& s, int lane,
                       const DecisionRules& rules) {
  for (std::size_t n = 0; n < trace.samples(); ++n) {
    const double ego = trace.at(0, n).position_m;
    for (std::size_t j = 1; j < trace.vehicles(); ++j) {
      if (trace.lane(j) != lane) continue;
      const double d = trace.at(j, n).position_m - ego;
      if (d >= 0.0) {
        if (d - s.vehicle_length_m < rules.clearance_front_m) return false;
      } else if (-d - s.vehicle_length_m < rules.clearance_rear_m) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace detail

/// Front gap and time-to-collision against the ego's lane leader at t = 0,
/// plus clearance of the adjacent lanes at every step.
inline QuantityOfInterest extract_quantities(const Trace& trace,
                                             const Scenario& s,
                                             const DecisionRules& rules = {}) {
  if (trace.vehicles() != s.vehicle_count() ||
      trace.samples() != s.step_count() + 1) {
    throw PreconditionError("trace does not cover the scenario horizon");
  }
  QuantityOfInterest q;
  const int lane = s.ego.lane;

  if (const auto leader = lane_leaders(s)[0]) {
    for (std::size_t n = 0; n < trace.samples(); ++n) {
      const Sample& e = trace.at(0, n);
      const Sample& l = trace.at(*leader, n);
      const double gap =
          std::max(0.0, l.position_m - e.position_m - s.vehicle_length_m);
      q.min_front_gap_m = std::min(q.min_front_gap_m, gap);
      const double closing = e.velocity_mps - l.velocity_mps;
      if (closing > 0.0 && gap > 0.0) {
        q.min_time_to_collision_s =
            std::min(q.min_time_to_collision_s, gap / closing);
      }
    }
  }

  q.left_lane_exists = lane + 1 < s.lane_count;
  q.right_lane_exists = lane - 1 >= 0;
  if (q.left_lane_exists) {
    q.left_lane_clear = detail::lane_clear(trace, s, lane + 1, rules);
  }
  if (q.right_lane_exists) {
    q.right_lane_clear = detail::lane_clear(trace, s, lane - 1, rules);
  }
  return q;
}

/// Keep the lane while the front gap stays safe; otherwise change to a clear
/// adjacent lane, left first.
inline LaneAction decide(const QuantityOfInterest& q,
                         const DecisionRules& rules = {}) {
  if (q.min_front_gap_m >= rules.safe_front_gap_m) return LaneAction::keep_lane;
  if (q.left_lane_exists && q.left_lane_clear) return LaneAction::change_left;
  if (q.right_lane_exists && q.right_lane_clear) return LaneAction::change_right;
  return LaneAction::keep_lane;
}

inline LaneAction pipeline_decision(ModelKind model, const Scenario& s,
                                    const DecisionRules& rules = {}) {
  return decide(extract_quantities(predict(model, s), s, rules), rules);
}

/// Both pipeline decisions for one scenario. A model that fails to converge
/// leaves its decision empty and sets `diverged`.
struct DualDecision {
  std::optional<LaneAction> surrogate;
  std::optional<LaneAction> reference;
  bool diverged = false;
  std::string note;

  bool agree() const {
    return surrogate && reference &&
           decisions_agree(to_decision(*surrogate), to_decision(*reference),
                           DecisionMetric::categorical());
  }
};

inline DualDecision compare_decisions(const Scenario& s, ModelKind surrogate,
                                      ModelKind reference,
                                      const DecisionRules& rules = {}) {
  DualDecision out;
  try {
    out.surrogate = pipeline_decision(surrogate, s, rules);
    out.reference = pipeline_decision(reference, s, rules);
  } catch (const FixedPointDivergenceError& e) {
    out.diverged = true;
    out.note = e.what();
  }
  return out;
}

}  // namespace decival::traffic
