#pragma once

// The lane-change study: per surrounding car, the (position, velocity,
// acceleration) space in which the constant-acceleration surrogate reaches
// the same lane decision as the controller-based reference.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "decival/boundary_search.hpp"
#include "decival/constraints.hpp"
#include "decival/core.hpp"
#include "decival/decision_maker.hpp"
#include "decival/vehicle_models.hpp"

namespace decival::traffic {

inline constexpr std::string_view kPositionAxis = "position_m";
inline constexpr std::string_view kVelocityAxis = "velocity_mps";
inline constexpr std::string_view kAccelerationAxis = "acceleration_mps2";

/// Scene-level quantities referenced by the domain constraints.
///
/// Gaps are bumper-to-bumper between consecutive vehicles of one lane; a
/// pair counts toward the front gap when its leader is ahead of the ego and
/// toward the rear gap otherwise.
class SceneQuantities {
 public:
  explicit SceneQuantities(const Scenario& s) : s_(s) {}

  std::optional<double> quantity(std::string_view name) const {
    if (name == "min_speed_mps") {
      double v = std::numeric_limits<double>::infinity();
      for (std::size_t id = 0; id < s_.vehicle_count(); ++id) {
        v = std::min(v, s_.vehicle(id).velocity_mps);
      }
      return v;
    }
    if (name == "front_gap_m") return gap(true);
    if (name == "rear_gap_m") return gap(false);
    if (name == "ego_acceleration_mps2") return s_.ego.acceleration_mps2;
    return std::nullopt;
  }

 private:
  double gap(bool front) const {
    double best = std::numeric_limits<double>::infinity();
    const double ego = s_.ego.position_m;
    for (int lane = 0; lane < s_.lane_count; ++lane) {
      std::vector<double> xs;
      for (std::size_t id = 0; id < s_.vehicle_count(); ++id) {
        if (s_.vehicle(id).lane == lane) xs.push_back(s_.vehicle(id).position_m);
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t k = 1; k < xs.size(); ++k) {
        if ((xs[k] > ego) != front) continue;
        best = std::min(best, xs[k] - xs[k - 1] - s_.vehicle_length_m);
      }
    }
    return best;
  }

  const Scenario& s_;
};

/// The seven domain constraints: the two checkable predicates, the modeling
/// assumptions and the two direction declarations.
inline ConstraintSet case_study_constraints(double min_speed_mps = 6.0,
                                            double min_gap_m = 30.0) {
  ConstraintSet set;
  set.add(Constraint::assumption("c1-deterministic",
                                 "vehicles behave deterministically"));
  set.add(Constraint::predicate("c2-min-speed", "min_speed_mps",
                                Comparison::greater_equal, min_speed_mps,
                                "every vehicle drives at least the minimum speed"));
  set.add(Constraint::assumption(
      "c3-constant-after-maneuver",
      "surrounding vehicles hold their speed once a maneuver ends"));
  set.add(Constraint::predicate("c4-front-gap", "front_gap_m",
                                Comparison::greater_equal, min_gap_m,
                                "gaps ahead of the ego are at least the minimum"));
  set.add(Constraint::predicate("c4-rear-gap", "rear_gap_m",
                                Comparison::greater_equal, min_gap_m,
                                "gaps behind the ego are at least the minimum"));
  set.add(Constraint::assumption("c5-ego-constant-speed",
                                 "the ego keeps a constant speed"));
  set.add(Constraint::direction(
      "c6-front-increasing",
      "a front car further ahead, faster or accelerating more is safer"));
  set.add(Constraint::direction(
      "c7-rear-decreasing",
      "a rear car further behind, slower or accelerating less is safer"));
  return set;
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Search bounds of a surrounding car; position is relative to the ego.
struct SearchBounds {
  Interval front_position{20.0, 150.0};
  Interval rear_position{-150.0, -20.0};
  Interval velocity{4.0, 16.0};
  Interval acceleration{-3.0, 2.0};
};

struct StudyDefinition {
  Scenario scenario;
  ConstraintSet constraints = case_study_constraints();
  DecisionRules rules;
  SearchBounds bounds;
  // Per surrounding car (index id - 1); empty entries use the defaults.
  std::vector<std::vector<Direction>> directions;
};

inline double relative_position(const Scenario& s, std::size_t id) {
  return s.vehicle(id).position_m - s.ego.position_m;
}

inline bool is_front_car(const Scenario& s, std::size_t id) {
  return relative_position(s, id) > 0.0;
}

inline void check_car(const Scenario& s, std::size_t id) {
  if (id == 0 || id >= s.vehicle_count()) {
    throw ConfigurationError("car index " + std::to_string(id) +
                             " is not a surrounding car (1.." +
                             std::to_string(s.vehicle_count() - 1) + ")");
  }
}

inline ParameterSpace car_space(const StudyDefinition& def, std::size_t id) {
  check_car(def.scenario, id);
  const auto& b = def.bounds;
  const Interval p =
      is_front_car(def.scenario, id) ? b.front_position : b.rear_position;
  return ParameterSpace({
      {std::string(kPositionAxis), "m", p.lower, p.upper},
      {std::string(kVelocityAxis), "m/s", b.velocity.lower, b.velocity.upper},
      {std::string(kAccelerationAxis), "m/s^2", b.acceleration.lower,
       b.acceleration.upper},
  });
}

inline StatePoint car_nominal(const StudyDefinition& def, std::size_t id) {
  const auto& v = def.scenario.vehicle(id);
  return car_space(def, id).point(
      {relative_position(def.scenario, id), v.velocity_mps, v.acceleration_mps2});
}

inline std::vector<Direction> default_directions(const Scenario& s,
                                                 std::size_t id) {
  check_car(s, id);
  return std::vector<Direction>(3, is_front_car(s, id) ? Direction::increasing
                                                       : Direction::decreasing);
}

inline MonotoneDirections car_directions(const StudyDefinition& def,
                                         std::size_t id) {
  check_car(def.scenario, id);
  if (id - 1 < def.directions.size() && !def.directions[id - 1].empty()) {
    if (def.directions[id - 1].size() != 3) {
      throw ConfigurationError("directions need one entry per dimension");
    }
    return MonotoneDirections(def.directions[id - 1]);
  }
  return MonotoneDirections(default_directions(def.scenario, id));
}

/// The scenario with car `id` moved to the point's state.
inline Scenario perturb(const Scenario& s, std::size_t id,
                        const StatePoint& point) {
  check_car(s, id);
  if (point.size() != 3) throw DimensionError("car states have 3 coordinates");
  Scenario out = s;
  auto& v = out.vehicle(id);
  v.position_m = s.ego.position_m + point[0];
  v.velocity_mps = point[1];
  v.acceleration_mps2 = point[2];
  return out;
}

inline std::vector<std::string> violated_at(const StudyDefinition& def,
                                            std::size_t id,
                                            const StatePoint& point) {
  const Scenario s = perturb(def.scenario, id, point);
  return violated_constraints(SceneQuantities(s), def.constraints);
}

struct ModelPair {
  ModelKind surrogate = ModelKind::constant_acceleration;
  ModelKind reference = ModelKind::high_validity;
};

/// Both pipeline decisions for car `id` at `point`.
inline DualDecision evaluate_point(const StudyDefinition& def,
                                   const ModelPair& models, std::size_t id,
                                   const StatePoint& point) {
  if (!point_in_bounds(point, car_space(def, id))) {
    throw PreconditionError("point lies outside the search bounds");
  }
  const auto violated = violated_at(def, id, point);
  if (!violated.empty()) {
    std::string names;
    for (const auto& n : violated) names += (names.empty() ? "" : ", ") + n;
    throw PreconditionError("infeasible point: " + names);
  }
  return compare_decisions(perturb(def.scenario, id, point), models.surrogate,
                           models.reference, def.rules);
}

inline Evaluation to_evaluation(const DualDecision& d) {
  Evaluation e;
  e.agree = d.agree();
  e.diverged = d.diverged;
  if (d.surrogate) e.surrogate_decision = std::string(to_string(*d.surrogate));
  if (d.reference) e.reference_decision = std::string(to_string(*d.reference));
  e.note = d.note;
  return e;
}

/// Agreement of the two pipelines at `point`, recorded in `cache`. A point
/// whose models fail to converge is reported invalid and left out of the
/// cache.
inline bool decision_probe(const StudyDefinition& def, const ModelPair& models,
                           std::size_t id, const StatePoint& point,
                           ExperimentCache& cache) {
  const Evaluation e = to_evaluation(evaluate_point(def, models, id, point));
  if (e.diverged) return false;
  cache.record(point, e.agree ? Verdict::valid : Verdict::invalid,
               Provenance::direct, e.surrogate_decision, e.reference_decision);
  return e.agree;
}

inline MembershipProbe make_probe(const StudyDefinition& def,
                                  const ModelPair& models, std::size_t id,
                                  ExperimentCache cache,
                                  std::size_t max_direct = kUnlimited) {
  return MembershipProbe(
      [&def, models, id](const StatePoint& p) {
        return to_evaluation(evaluate_point(def, models, id, p));
      },
      std::move(cache),
      [&def, id](const StatePoint& p) { return violated_at(def, id, p).empty(); },
      max_direct);
}

struct StudyOptions {
  ModelPair models;
  SearchConfig search;
  bool inference = true;     // false: exact replay only
  std::size_t workers = 1;
  std::vector<std::size_t> cars;  // empty: every surrounding car
};

struct CarResult {
  std::size_t vehicle_id = 0;
  std::string name;
  ValidityRegion region;
  ProbeStats stats;
  std::vector<ExperimentRecord> records;
  std::map<std::vector<double>, Evaluation> divergent;
  std::optional<std::string> budget_error;
};

struct StudyResult {
  std::vector<CarResult> cars;
  double wall_time_s = 0.0;

  bool budget_exhausted() const {
    return std::any_of(cars.begin(), cars.end(),
                       [](const CarResult& c) { return c.budget_error; });
  }
  std::size_t divergences() const {
    std::size_t n = 0;
    for (const auto& c : cars) n += c.stats.divergences;
    return n;
  }
};

/// Records from an earlier run, keyed by vehicle id.
using PreloadedRecords = std::map<std::size_t, std::vector<ExperimentRecord>>;

inline CarResult search_car(const StudyDefinition& def,
                            const StudyOptions& opt, std::size_t id,
                            const PreloadedRecords& preload = {}) {
  const ParameterSpace space = car_space(def, id);
  const MonotoneDirections directions = car_directions(def, id);
  ExperimentCache cache(opt.inference
                            ? directions
                            : MonotoneDirections::all(3, Direction::unknown));
  if (auto it = preload.find(id); it != preload.end()) {
    for (const auto& r : it->second) {
      cache.record(space.point(r.point.values()), r.verdict, r.source,
                   r.surrogate_decision, r.reference_decision);
    }
  }
  MembershipProbe probe =
      make_probe(def, opt.models, id, std::move(cache), opt.search.max_evaluations);

  CarResult out;
  out.vehicle_id = id;
  out.name = def.scenario.vehicle(id).name;
  try {
    out.region = validity_region_search(space, car_nominal(def, id), directions,
                                        probe, opt.search);
  } catch (const RegionBudgetExhausted& e) {
    out.region = e.partial();
    out.budget_error = e.what();
  }
  out.stats = probe.stats();
  out.records.assign(probe.cache().records().begin(),
                     probe.cache().records().end());
  out.divergent = probe.divergent();
  return out;
}

/// Runs the region search for every selected car. Cars are independent and
/// spread over `workers` threads; results come back in car order.
inline StudyResult run_study(const StudyDefinition& def,
                             const StudyOptions& opt,
                             const PreloadedRecords& preload = {}) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> cars = opt.cars;
  if (cars.empty()) {
    for (std::size_t id = 1; id < def.scenario.vehicle_count(); ++id) {
      cars.push_back(id);
    }
  }
  for (std::size_t id : cars) {
    check_car(def.scenario, id);
    opt.search.validate(car_space(def, id));
    car_directions(def, id);
  }

  StudyResult result;
  result.cars.resize(cars.size());
  std::vector<std::exception_ptr> errors(cars.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < cars.size();) {
      try {
        result.cars[k] = search_car(def, opt, cars[k], preload);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(opt.workers, 1, std::max<std::size_t>(cars.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  result.wall_time_s = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  return result;
}

}  // namespace decival::traffic
