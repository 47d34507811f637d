#pragma once

// Shared vocabulary: state points, parameter spaces, decisions, the decision
// metric and the discrete validity region.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace decival {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class MetricMismatchError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Parameter space and state points
// ---------------------------------------------------------------------------

struct Dimension {
  std::string name;
  std::string unit;
  double lower = 0.0;
  double upper = 0.0;

  double extent() const { return upper - lower; }
};

using DimensionLabels = std::vector<std::string>;

/// A point of the state space. Coordinates are ordered like the labels of
/// the parameter space that produced it and are always finite.
class StatePoint {
 public:
  StatePoint(std::shared_ptr<const DimensionLabels> labels,
             std::vector<double> coordinates)
      : labels_(std::move(labels)), coordinates_(std::move(coordinates)) {
    if (!labels_) throw DimensionError("state point without dimension labels");
    if (coordinates_.size() != labels_->size()) {
      throw DimensionError("state point has " +
                           std::to_string(coordinates_.size()) +
                           " coordinates, space declares " +
                           std::to_string(labels_->size()));
    }
    for (std::size_t i = 0; i < coordinates_.size(); ++i) {
      if (!std::isfinite(coordinates_[i])) {
        throw DimensionError("coordinate '" + (*labels_)[i] +
                             "' is not finite");
      }
    }
  }

  std::size_t size() const { return coordinates_.size(); }
  double operator[](std::size_t axis) const { return coordinates_.at(axis); }
  std::span<const double> coordinates() const { return coordinates_; }
  const std::vector<double>& values() const { return coordinates_; }
  const DimensionLabels& labels() const { return *labels_; }
  const std::shared_ptr<const DimensionLabels>& shared_labels() const {
    return labels_;
  }

  StatePoint with(std::size_t axis, double value) const {
    auto coords = coordinates_;
    coords.at(axis) = value;
    return StatePoint(labels_, std::move(coords));
  }

  bool same_dimensions(const StatePoint& other) const {
    return labels_ == other.labels_ || *labels_ == *other.labels_;
  }

  friend bool operator==(const StatePoint& a, const StatePoint& b) {
    return a.coordinates_ == b.coordinates_ && a.same_dimensions(b);
  }
  friend bool operator<(const StatePoint& a, const StatePoint& b) {
    return a.coordinates_ < b.coordinates_;
  }

 private:
  std::shared_ptr<const DimensionLabels> labels_;
  std::vector<double> coordinates_;
};

inline double distance(const StatePoint& a, const StatePoint& b) {
  if (!a.same_dimensions(b)) throw DimensionError("distance across spaces");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

inline StatePoint midpoint(const StatePoint& a, const StatePoint& b) {
  if (!a.same_dimensions(b)) throw DimensionError("midpoint across spaces");
  std::vector<double> mid(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) mid[i] = (a[i] + b[i]) / 2.0;
  return StatePoint(a.shared_labels(), std::move(mid));
}

class ParameterSpace {
 public:
  explicit ParameterSpace(std::vector<Dimension> dimensions)
      : dimensions_(std::move(dimensions)) {
    if (dimensions_.empty()) {
      throw ConfigurationError("parameter space needs at least one dimension");
    }
    auto labels = std::make_shared<DimensionLabels>();
    for (const auto& d : dimensions_) {
      if (!std::isfinite(d.lower) || !std::isfinite(d.upper) ||
          !(d.lower < d.upper)) {
        throw ConfigurationError("dimension '" + d.name +
                                 "' needs finite bounds with lower < upper");
      }
      if (std::find(labels->begin(), labels->end(), d.name) != labels->end()) {
        throw ConfigurationError("duplicate dimension name '" + d.name + "'");
      }
      labels->push_back(d.name);
    }
    labels_ = std::move(labels);
  }

  std::size_t size() const { return dimensions_.size(); }
  const Dimension& operator[](std::size_t axis) const {
    return dimensions_.at(axis);
  }
  const std::vector<Dimension>& dimensions() const { return dimensions_; }
  const std::shared_ptr<const DimensionLabels>& labels() const {
    return labels_;
  }

  std::optional<std::size_t> axis_of(std::string_view name) const {
    for (std::size_t i = 0; i < dimensions_.size(); ++i) {
      if (dimensions_[i].name == name) return i;
    }
    return std::nullopt;
  }

  StatePoint point(std::vector<double> coordinates) const {
    return StatePoint(labels_, std::move(coordinates));
  }

 private:
  std::vector<Dimension> dimensions_;
  std::shared_ptr<const DimensionLabels> labels_;
};

/// Closed-interval membership on every axis.
inline bool point_in_bounds(const StatePoint& x, const ParameterSpace& space) {
  if (x.labels() != *space.labels()) {
    throw DimensionError("state point dimensions do not match the space");
  }
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (x[i] < space[i].lower || x[i] > space[i].upper) return false;
  }
  return true;
}

/// Grid values lower, lower + step, ... not exceeding upper.
inline std::vector<double> axis_grid(const Dimension& dim, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw ConfigurationError("grid step for '" + dim.name +
                             "' must be positive");
  }
  if (!(dim.lower < dim.upper)) {
    throw ConfigurationError("dimension '" + dim.name + "' has zero extent");
  }
  const auto count =
      static_cast<std::size_t>(std::floor(dim.extent() / step + 1e-9)) + 1;
  std::vector<double> values;
  values.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    values.push_back(std::min(dim.lower + static_cast<double>(k) * step,
                              dim.upper));
  }
  return values;
}

// ---------------------------------------------------------------------------
// Decisions
// ---------------------------------------------------------------------------

enum class DecisionKind { categorical, numerical };

class Decision {
 public:
  static Decision numerical(double value) {
    if (!std::isfinite(value)) {
      throw ConfigurationError("numerical decision must be finite");
    }
    return Decision(DecisionKind::numerical, {}, value);
  }

  DecisionKind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  double value() const { return value_; }

  friend bool operator==(const Decision&, const Decision&) = default;

 private:
  friend class CategoricalSpace;
  Decision(DecisionKind kind, std::string label, double value)
      : kind_(kind), label_(std::move(label)), value_(value) {}

  DecisionKind kind_;
  std::string label_;
  double value_ = 0.0;
};

/// Finite label set of a categorical decision space.
class CategoricalSpace {
 public:
  explicit CategoricalSpace(std::vector<std::string> labels)
      : labels_(std::move(labels)) {
    if (labels_.empty()) throw ConfigurationError("empty label set");
  }

  Decision make(std::string_view label) const {
    if (!contains(label)) {
      throw ConfigurationError("label '" + std::string(label) +
                               "' is not in the decision space");
    }
    return Decision(DecisionKind::categorical, std::string(label), 0.0);
  }

  bool contains(std::string_view label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
  }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
};

class DecisionMetric {
 public:
  /// Equality of labels; the tolerance is not used.
  static DecisionMetric categorical() {
    return DecisionMetric(DecisionKind::categorical, 0.0);
  }
  /// Absolute difference, agreement when strictly below epsilon.
  static DecisionMetric numerical(double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw ConfigurationError("numerical decision tolerance must be > 0");
    }
    return DecisionMetric(DecisionKind::numerical, epsilon);
  }

  DecisionKind kind() const { return kind_; }
  double tolerance() const { return tolerance_; }

 private:
  DecisionMetric(DecisionKind kind, double tolerance)
      : kind_(kind), tolerance_(tolerance) {}

  DecisionKind kind_;
  double tolerance_;
};

inline double decision_distance(const Decision& a, const Decision& b,
                                const DecisionMetric& metric) {
  if (a.kind() != b.kind() || a.kind() != metric.kind()) {
    throw MetricMismatchError("decision kinds do not match the metric");
  }
  if (metric.kind() == DecisionKind::categorical) {
    return a.label() == b.label() ? 0.0 : 1.0;
  }
  return std::abs(a.value() - b.value());
}

inline bool decisions_agree(const Decision& a, const Decision& b,
                            const DecisionMetric& metric) {
  const double d = decision_distance(a, b, metric);
  if (metric.kind() == DecisionKind::categorical) return d == 0.0;
  return d < metric.tolerance();
}

// ---------------------------------------------------------------------------
// Validity region
// ---------------------------------------------------------------------------

enum class Provenance { direct, inferred };

inline std::string_view to_string(Provenance p) {
  return p == Provenance::direct ? "direct" : "inferred";
}

struct RegionPoint {
  StatePoint point;
  bool valid = false;
  Provenance provenance = Provenance::inferred;
};

/// Valid-side end of a bisection bracket on one axis.
struct BoundaryPoint {
  StatePoint point;
  std::size_t axis = 0;
  double interval_width = 0.0;
};

enum class AxisOutcome { bracketed, uniform_valid, uniform_invalid };

struct AxisDiagnostic {
  std::vector<double> prefix;  // fixed coordinates of the enclosing axes
  std::size_t axis = 0;
  AxisOutcome outcome = AxisOutcome::bracketed;
  bool orientation_conflict = false;  // data contradicted the declared side
};

/// Discrete approximation of the validity region: classified grid points of
/// the feasible region plus the boundary points found by bisection.
class ValidityRegion {
 public:
  /// Adds a classified point. Re-adding a point with the same verdict is a
  /// no-op; a contradictory verdict is an error.
  void add(RegionPoint p) {
    auto [it, inserted] = points_.try_emplace(p.point.values(), p);
    if (!inserted && it->second.valid != p.valid) {
      throw Error("contradictory verdicts for one region point");
    }
  }

  void add_boundary(BoundaryPoint b) { boundary_.push_back(std::move(b)); }
  void add_diagnostic(AxisDiagnostic d) { diagnostics_.push_back(std::move(d)); }
  void add_note(std::string note) { notes_.push_back(std::move(note)); }

  std::optional<bool> verdict(const std::vector<double>& coords) const {
    auto it = points_.find(coords);
    if (it == points_.end()) return std::nullopt;
    return it->second.valid;
  }

  /// Points in lexicographic coordinate order.
  std::vector<RegionPoint> points() const {
    std::vector<RegionPoint> out;
    out.reserve(points_.size());
    for (const auto& [_, p] : points_) out.push_back(p);
    return out;
  }

  std::size_t size() const { return points_.size(); }
  std::size_t valid_count() const {
    return static_cast<std::size_t>(
        std::count_if(points_.begin(), points_.end(),
                      [](const auto& kv) { return kv.second.valid; }));
  }
  const std::vector<BoundaryPoint>& boundary() const { return boundary_; }
  const std::vector<AxisDiagnostic>& diagnostics() const {
    return diagnostics_;
  }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  std::map<std::vector<double>, RegionPoint> points_;
  std::vector<BoundaryPoint> boundary_;
  std::vector<AxisDiagnostic> diagnostics_;
  std::vector<std::string> notes_;
};

}  // namespace decival
