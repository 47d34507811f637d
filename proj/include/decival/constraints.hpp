#pragma once

// Domain constraints, the feasible region and monotone-dominance inference
// over previously evaluated experiments.

#include <concepts>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "decival/core.hpp"

namespace decival {

/// Anything that can resolve named scalar quantities of a state, e.g. the
/// coordinates of a point or gaps computed from a traffic scene.
template <class S>
concept QuantitySource = requires(const S& s, std::string_view name) {
  { s.quantity(name) } -> std::convertible_to<std::optional<double>>;
};

/// Resolves quantities by dimension label.
class PointQuantities {
 public:
  explicit PointQuantities(const StatePoint& point) : point_(point) {}

  std::optional<double> quantity(std::string_view name) const {
    const auto& labels = point_.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == name) return point_[i];
    }
    return std::nullopt;
  }

 private:
  const StatePoint& point_;
};

enum class Comparison { less, less_equal, greater, greater_equal };

inline std::string_view to_string(Comparison c) {
  switch (c) {
    case Comparison::less: return "<";
    case Comparison::less_equal: return "<=";
    case Comparison::greater: return ">";
    case Comparison::greater_equal: return ">=";
  }
  return "?";
}

inline std::optional<Comparison> parse_comparison(std::string_view s) {
  if (s == "<") return Comparison::less;
  if (s == "<=") return Comparison::less_equal;
  if (s == ">") return Comparison::greater;
  if (s == ">=") return Comparison::greater_equal;
  return std::nullopt;
}

enum class ConstraintKind {
  predicate,   // comparison of a named quantity against a constant
  assumption,  // holds by construction of the models
  direction,   // monotone-direction declaration, consumed by inference
};

struct Constraint {
  std::string name;
  ConstraintKind kind = ConstraintKind::predicate;
  std::string quantity;
  Comparison comparison = Comparison::greater_equal;
  double bound = 0.0;
  std::string description;

  static Constraint predicate(std::string name, std::string quantity,
                              Comparison comparison, double bound,
                              std::string description = {}) {
    return {std::move(name), ConstraintKind::predicate, std::move(quantity),
            comparison, bound, std::move(description)};
  }
  static Constraint assumption(std::string name, std::string description) {
    return {std::move(name), ConstraintKind::assumption, {},
            Comparison::greater_equal, 0.0, std::move(description)};
  }
  static Constraint direction(std::string name, std::string description) {
    return {std::move(name), ConstraintKind::direction, {},
            Comparison::greater_equal, 0.0, std::move(description)};
  }

  template <QuantitySource S>
  bool evaluate(const S& source) const {
    if (kind != ConstraintKind::predicate) return true;
    const std::optional<double> value = source.quantity(quantity);
    if (!value) {
      throw ConfigurationError("constraint '" + name +
                               "' references undeclared quantity '" +
                               quantity + "'");
    }
    switch (comparison) {
      case Comparison::less: return *value < bound;
      case Comparison::less_equal: return *value <= bound;
      case Comparison::greater: return *value > bound;
      case Comparison::greater_equal: return *value >= bound;
    }
    return false;
  }
};

class ConstraintSet {
 public:
  ConstraintSet() = default;
  explicit ConstraintSet(std::vector<Constraint> constraints) {
    for (auto& c : constraints) add(std::move(c));
  }

  void add(Constraint c) {
    if (c.name.empty()) throw ConfigurationError("constraint without a name");
    if (find(c.name)) {
      throw ConfigurationError("duplicate constraint name '" + c.name + "'");
    }
    constraints_.push_back(std::move(c));
  }

  const Constraint* find(std::string_view name) const {
    for (const auto& c : constraints_) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }

  const std::vector<Constraint>& constraints() const { return constraints_; }
  std::size_t size() const { return constraints_.size(); }

 private:
  std::vector<Constraint> constraints_;
};

/// Names of the point predicates that evaluate false, in declaration order.
template <QuantitySource S>
std::vector<std::string> violated_constraints(const S& source,
                                              const ConstraintSet& set) {
  std::vector<std::string> violated;
  for (const auto& c : set.constraints()) {
    if (!c.evaluate(source)) violated.push_back(c.name);
  }
  return violated;
}

template <QuantitySource S>
bool is_feasible(const S& source, const ConstraintSet& set) {
  for (const auto& c : set.constraints()) {
    if (!c.evaluate(source)) return false;
  }
  return true;
}

inline bool is_feasible(const StatePoint& x, const ConstraintSet& set) {
  return is_feasible(PointQuantities(x), set);
}

// ---------------------------------------------------------------------------
// Monotone directions and the experiment cache
// ---------------------------------------------------------------------------

/// Direction along which a dimension moves toward validity.
enum class Direction { increasing, decreasing, unknown };

inline std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::increasing: return "increasing";
    case Direction::decreasing: return "decreasing";
    case Direction::unknown: return "unknown";
  }
  return "unknown";
}

inline std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "increasing") return Direction::increasing;
  if (s == "decreasing") return Direction::decreasing;
  if (s == "unknown") return Direction::unknown;
  return std::nullopt;
}

class MonotoneDirections {
 public:
  explicit MonotoneDirections(std::vector<Direction> directions)
      : directions_(std::move(directions)) {}

  static MonotoneDirections all(std::size_t count, Direction d) {
    return MonotoneDirections(std::vector<Direction>(count, d));
  }

  std::size_t size() const { return directions_.size(); }
  Direction operator[](std::size_t axis) const { return directions_.at(axis); }
  const std::vector<Direction>& values() const { return directions_; }

 private:
  std::vector<Direction> directions_;
};

enum class Verdict { valid, invalid };

inline std::string_view to_string(Verdict v) {
  return v == Verdict::valid ? "valid" : "invalid";
}

inline Verdict opposite(Verdict v) {
  return v == Verdict::valid ? Verdict::invalid : Verdict::valid;
}

struct ExperimentRecord {
  StatePoint point;
  Verdict verdict = Verdict::invalid;
  Provenance source = Provenance::direct;
  std::uint64_t order = 0;
  // Labels of the two compared decisions when known; empty otherwise.
  std::string surrogate_decision;
  std::string reference_decision;
};

class MonotonicityViolationError : public Error {
 public:
  MonotonicityViolationError(ExperimentRecord cached, ExperimentRecord offered)
      : Error("monotonicity violated: new " +
              std::string(to_string(offered.verdict)) +
              " record contradicts cached " +
              std::string(to_string(cached.verdict)) + " record #" +
              std::to_string(cached.order)),
        cached_(std::move(cached)),
        offered_(std::move(offered)) {}

  const ExperimentRecord& cached() const { return cached_; }
  const ExperimentRecord& offered() const { return offered_; }

 private:
  ExperimentRecord cached_;
  ExperimentRecord offered_;
};

class CacheInconsistencyError : public Error {
 public:
  CacheInconsistencyError(ExperimentRecord valid_witness,
                          ExperimentRecord invalid_witness)
      : Error("cache implies both verdicts: valid record #" +
              std::to_string(valid_witness.order) + ", invalid record #" +
              std::to_string(invalid_witness.order)),
        valid_(std::move(valid_witness)),
        invalid_(std::move(invalid_witness)) {}

  const ExperimentRecord& valid_witness() const { return valid_; }
  const ExperimentRecord& invalid_witness() const { return invalid_; }

 private:
  ExperimentRecord valid_;
  ExperimentRecord invalid_;
};

struct Inference {
  std::optional<Verdict> verdict;  // empty: unknown
  const ExperimentRecord* witness = nullptr;
  bool exact = false;  // the witness is the query point itself
};

/// Experiments evaluated so far plus the dominance rule derived from the
/// declared directions. Dimensions with an unknown direction only match on
/// equality, so an all-unknown cache degenerates to exact replay.
///
/// Readers may run concurrently; writers must be serialized by the owner.
class ExperimentCache {
 public:
  explicit ExperimentCache(MonotoneDirections directions)
      : directions_(std::move(directions)) {}

  const MonotoneDirections& directions() const { return directions_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::deque<ExperimentRecord>& records() const { return records_; }

  const ExperimentRecord* find_exact(const std::vector<double>& coords) const {
    auto it = exact_.find(coords);
    return it == exact_.end() ? nullptr : &records_[it->second];
  }

  Inference infer(const StatePoint& query) const {
    check_dimensions(query);
    const ExperimentRecord* valid_witness = nullptr;
    const ExperimentRecord* invalid_witness = nullptr;
    for (const auto& r : records_) {
      if (!valid_witness && r.verdict == Verdict::valid &&
          at_least_as_favorable(query, r.point)) {
        valid_witness = &r;
      }
      if (!invalid_witness && r.verdict == Verdict::invalid &&
          at_least_as_favorable(r.point, query)) {
        invalid_witness = &r;
      }
      if (valid_witness && invalid_witness) {
        throw CacheInconsistencyError(*valid_witness, *invalid_witness);
      }
    }
    Inference out;
    if (valid_witness) {
      out.verdict = Verdict::valid;
      out.witness = valid_witness;
    } else if (invalid_witness) {
      out.verdict = Verdict::invalid;
      out.witness = invalid_witness;
    }
    out.exact = out.witness && out.witness->point.values() == query.values();
    return out;
  }

  /// Stores an experiment. Fails when the verdict contradicts what the cache
  /// already implies for the point.
  const ExperimentRecord& record(const StatePoint& point, Verdict verdict,
                                 Provenance source = Provenance::direct,
                                 std::string surrogate_decision = {},
                                 std::string reference_decision = {}) {
    const Inference prior = infer(point);
    ExperimentRecord offered{point,
                             verdict,
                             source,
                             next_order_,
                             std::move(surrogate_decision),
                             std::move(reference_decision)};
    if (prior.verdict && *prior.verdict != verdict) {
      throw MonotonicityViolationError(*prior.witness, std::move(offered));
    }
    if (const auto* existing = find_exact(point.values())) return *existing;
    ++next_order_;
    exact_.emplace(point.values(), records_.size());
    records_.push_back(std::move(offered));
    return records_.back();
  }

 private:
  void check_dimensions(const StatePoint& p) const {
    if (p.size() != directions_.size()) {
      throw DimensionError("query has " + std::to_string(p.size()) +
                           " coordinates, directions declare " +
                           std::to_string(directions_.size()));
    }
  }

  // True when `a` is componentwise at least as favorable as `b`.
  bool at_least_as_favorable(const StatePoint& a, const StatePoint& b) const {
    for (std::size_t i = 0; i < a.size(); ++i) {
      switch (directions_[i]) {
        case Direction::increasing:
          if (a[i] < b[i]) return false;
          break;
        case Direction::decreasing:
          if (a[i] > b[i]) return false;
          break;
        case Direction::unknown:
          if (a[i] != b[i]) return false;
          break;
      }
    }
    return true;
  }

  MonotoneDirections directions_;
  std::deque<ExperimentRecord> records_;
  std::map<std::vector<double>, std::size_t> exact_;
  std::uint64_t next_order_ = 0;
};

inline std::optional<Verdict> infer_verdict(const StatePoint& query,
                                            const ExperimentCache& cache) {
  return cache.infer(query).verdict;
}

inline void record_experiment(const StatePoint& point, Verdict verdict,
                              ExperimentCache& cache) {
  cache.record(point, verdict);
}

}  // namespace decival
