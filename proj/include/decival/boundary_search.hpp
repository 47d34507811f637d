#pragma once

// Bisection boundary finding, the nested axis-by-axis region search and the
// exhaustive grid oracle used to verify it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "decival/constraints.hpp"
#include "decival/core.hpp"

namespace decival {

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

class InvalidBracketError : public Error {
 public:
  using Error::Error;
};

class BudgetExhaustedError : public Error {
 public:
  using Error::Error;
};

/// Budget exhaustion during a region search; carries what was found so far.
class RegionBudgetExhausted : public BudgetExhaustedError {
 public:
  RegionBudgetExhausted(const std::string& what, ValidityRegion partial)
      : BudgetExhaustedError(what), partial_(std::move(partial)) {}
  const ValidityRegion& partial() const { return partial_; }

 private:
  ValidityRegion partial_;
};

struct SearchConfig {
  std::vector<double> tolerance;  // bisection termination, per axis
  std::vector<double> step;       // discretization, per axis
  std::size_t max_evaluations = kUnlimited;

  void validate(const ParameterSpace& space) const {
    if (tolerance.size() != space.size() || step.size() != space.size()) {
      throw ConfigurationError("search config must give one tolerance and "
                               "one step per dimension");
    }
    if (max_evaluations == 0) {
      throw ConfigurationError("evaluation budget must be positive");
    }
    for (std::size_t i = 0; i < space.size(); ++i) {
      const auto& d = space[i];
      if (!(tolerance[i] > 0.0) || !(tolerance[i] < d.extent())) {
        throw ConfigurationError("tolerance for '" + d.name +
                                 "' must be positive and below the extent");
      }
      if (!(step[i] >= tolerance[i])) {
        throw ConfigurationError("step for '" + d.name +
                                 "' must be at least the tolerance");
      }
    }
  }
};

/// Final bisection interval: `valid` satisfied the probe, `invalid` did not.
struct Bracket {
  StatePoint valid;
  StatePoint invalid;
  std::size_t probes = 0;

  double width() const { return distance(valid, invalid); }
};

/// Bisects between a known valid and a known invalid point without probing
/// them again.
template <class Probe>
Bracket bisect(StatePoint valid, StatePoint invalid, Probe&& probe,
               double tolerance, std::size_t max_probes = kUnlimited) {
  if (!(tolerance > 0.0)) throw ConfigurationError("tolerance must be > 0");
  std::size_t probes = 0;
  while (distance(valid, invalid) > tolerance) {
    if (probes >= max_probes) {
      throw BudgetExhaustedError("bisection exceeded its probe budget");
    }
    StatePoint mid = midpoint(valid, invalid);
    ++probes;
    if (probe(mid)) {
      valid = std::move(mid);
    } else {
      invalid = std::move(mid);
    }
  }
  return Bracket{std::move(valid), std::move(invalid), probes};
}

/// Binary search for the boundary between `p1` (inside the region) and `p2`
/// (outside). Both endpoints are probed first to check the bracket. Returns
/// the last point found inside together with the final interval.
template <class Probe>
Bracket find_boundary(const StatePoint& p1, const StatePoint& p2,
                      Probe&& probe, double tolerance,
                      std::size_t max_probes = kUnlimited) {
  if (!(tolerance > 0.0)) throw ConfigurationError("tolerance must be > 0");
  if (max_probes < 2) {
    throw BudgetExhaustedError("budget too small to check the bracket");
  }
  if (!probe(p1)) throw InvalidBracketError("p1 is not inside the region");
  if (probe(p2)) throw InvalidBracketError("p2 is inside the region");
  Bracket b = bisect(p1, p2, probe, tolerance, max_probes - 2);
  b.probes += 2;
  return b;
}

// ---------------------------------------------------------------------------
// Membership probe
// ---------------------------------------------------------------------------

/// Result of one paired evaluation of surrogate and reference.
struct Evaluation {
  bool agree = false;
  bool diverged = false;  // the reference failed to produce a result
  std::string surrogate_decision;
  std::string reference_decision;
  std::string note;
};

enum class ProbeSource { infeasible, cached, inferred, direct };

struct ProbeStats {
  std::size_t probes = 0;  // feasible probes; = direct + cached + inferred
  std::size_t direct = 0;
  std::size_t cached = 0;
  std::size_t inferred = 0;
  std::size_t infeasible = 0;
  std::size_t divergences = 0;
};

/// Membership test for the validity region: feasibility check, then cache
/// inference, then (on unknown) a paired evaluation that is recorded.
class MembershipProbe {
 public:
  using Evaluator = std::function<Evaluation(const StatePoint&)>;
  using Feasibility = std::function<bool(const StatePoint&)>;

  struct Outcome {
    bool member = false;
    ProbeSource source = ProbeSource::direct;
  };

  MembershipProbe(Evaluator evaluator, ExperimentCache cache,
                  Feasibility feasibility = {},
                  std::size_t max_direct = kUnlimited)
      : evaluator_(std::move(evaluator)),
        feasibility_(std::move(feasibility)),
        cache_(std::move(cache)),
        max_direct_(max_direct) {}

  bool operator()(const StatePoint& x) { return probe(x).member; }

  Outcome probe(const StatePoint& x) {
    if (!feasible(x)) {
      ++stats_.infeasible;
      return {false, ProbeSource::infeasible};
    }
    ++stats_.probes;
    if (divergent_.count(x.values())) {
      ++stats_.cached;
      return {false, ProbeSource::cached};
    }
    const Inference inf = cache_.infer(x);
    if (inf.verdict) {
      ++(inf.exact ? stats_.cached : stats_.inferred);
      return {*inf.verdict == Verdict::valid,
              inf.exact ? ProbeSource::cached : ProbeSource::inferred};
    }
    if (stats_.direct >= max_direct_) {
      --stats_.probes;
      throw BudgetExhaustedError("direct evaluation budget of " +
                                 std::to_string(max_direct_) + " exhausted");
    }
    ++stats_.direct;
    Evaluation e = evaluator_(x);
    if (e.diverged) {
      ++stats_.divergences;
      divergent_.emplace(x.values(), std::move(e));
      return {false, ProbeSource::direct};
    }
    const Verdict v = e.agree ? Verdict::valid : Verdict::invalid;
    cache_.record(x, v, Provenance::direct, std::move(e.surrogate_decision),
                  std::move(e.reference_decision));
    return {e.agree, ProbeSource::direct};
  }

  bool feasible(const StatePoint& x) const {
    return !feasibility_ || feasibility_(x);
  }

  const ExperimentCache& cache() const { return cache_; }
  ExperimentCache& cache() { return cache_; }
  const ProbeStats& stats() const { return stats_; }
  const std::map<std::vector<double>, Evaluation>& divergent() const {
    return divergent_;
  }

 private:
  Evaluator evaluator_;
  Feasibility feasibility_;
  ExperimentCache cache_;
  std::size_t max_direct_;
  ProbeStats stats_;
  std::map<std::vector<double>, Evaluation> divergent_;
};

// ---------------------------------------------------------------------------
// Nested region search
// ---------------------------------------------------------------------------

namespace detail {

class RegionSearch {
 public:
  RegionSearch(const ParameterSpace& space, const StatePoint& nominal,
               const MonotoneDirections& directions, MembershipProbe& probe,
               const SearchConfig& config)
      : space_(space),
        directions_(directions),
        probe_(probe),
        config_(config) {
    for (std::size_t i = 0; i < space.size(); ++i) {
      grids_.push_back(axis_grid(space[i], config.step[i]));
    }
    // Inner axes are held at their most favorable feasible grid value when
    // the direction is declared, so an outer axis sees the projection of the
    // region; otherwise at the nominal state.
    for (std::size_t i = 0; i < space.size(); ++i) {
      anchors_.push_back(nominal[i]);
      if (directions[i] == Direction::unknown) continue;
      std::vector<double> order = grids_[i];
      if (directions[i] == Direction::increasing) {
        std::reverse(order.begin(), order.end());
      }
      for (double g : order) {
        if (probe_.feasible(nominal.with(i, g))) {
          anchors_.back() = g;
          break;
        }
      }
    }
  }

  void run(std::vector<double>& prefix) {
    const std::size_t axis = prefix.size();
    const std::vector<bool> valid = classify_axis(prefix);
    const auto& grid = grids_[axis];
    for (std::size_t k = 0; k < grid.size(); ++k) {
      prefix.push_back(grid[k]);
      if (axis + 1 == space_.size()) {
        add_point(prefix, valid[k]);
      } else if (valid[k]) {
        run(prefix);
      } else {
        add_invalid_subtree(prefix);
      }
      prefix.pop_back();
    }
  }

  ValidityRegion& region() { return region_; }

 private:
  StatePoint compose(const std::vector<double>& prefix, double value) const {
    std::vector<double> coords(prefix);
    coords.push_back(value);
    for (std::size_t j = coords.size(); j < space_.size(); ++j) {
      coords.push_back(anchors_[j]);
    }
    return space_.point(std::move(coords));
  }

  // Searches one axis between its first and last feasible grid values;
  // the feasible part of an axis is assumed to be an interval.
  std::vector<bool> classify_axis(const std::vector<double>& prefix) {
    const std::size_t axis = prefix.size();
    const auto& grid = grids_[axis];
    std::vector<bool> valid(grid.size(), false);
    AxisDiagnostic diag{prefix, axis, AxisOutcome::bracketed, false};

    std::optional<std::size_t> first, last;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (probe_.feasible(compose(prefix, grid[k]))) {
        if (!first) first = k;
        last = k;
      }
    }
    if (!first) {
      diag.outcome = AxisOutcome::uniform_invalid;
      region_.add_diagnostic(std::move(diag));
      return valid;
    }

    const StatePoint lo = compose(prefix, grid[*first]);
    const StatePoint hi = compose(prefix, grid[*last]);
    const bool lo_valid = probe_(lo);
    const bool hi_valid = *first == *last ? lo_valid : probe_(hi);

    if (lo_valid == hi_valid) {
      diag.outcome =
          lo_valid ? AxisOutcome::uniform_valid : AxisOutcome::uniform_invalid;
      for (std::size_t k = *first; k <= *last; ++k) valid[k] = lo_valid;
      region_.add_diagnostic(std::move(diag));
      return valid;
    }

    const bool valid_is_upper = hi_valid;
    diag.orientation_conflict =
        (directions_[axis] == Direction::increasing && !valid_is_upper) ||
        (directions_[axis] == Direction::decreasing && valid_is_upper);

    Bracket b = valid_is_upper
                    ? bisect(hi, lo, probe_, config_.tolerance[axis])
                    : bisect(lo, hi, probe_, config_.tolerance[axis]);
    const double in = b.valid[axis];
    const double out = b.invalid[axis];
    for (std::size_t k = *first; k <= *last; ++k) {
      const double g = grid[k];
      const bool inside = valid_is_upper ? g >= in : g <= in;
      const bool outside = valid_is_upper ? g <= out : g >= out;
      if (inside) {
        valid[k] = true;
      } else if (!outside) {
        // Grid value strictly inside the final bracket.
        valid[k] = probe_(compose(prefix, g));
      }
    }
    region_.add_boundary({b.valid, axis, b.width()});
    region_.add_diagnostic(std::move(diag));
    return valid;
  }

  void add_point(const std::vector<double>& coords, bool classified) {
    StatePoint p = space_.point(coords);
    if (!probe_.feasible(p)) return;
    Provenance provenance = Provenance::inferred;
    bool verdict = classified;
    if (const auto* rec = probe_.cache().find_exact(coords);
        rec && rec->source == Provenance::direct) {
      provenance = Provenance::direct;
      verdict = rec->verdict == Verdict::valid;
    } else if (probe_.divergent().count(coords)) {
      provenance = Provenance::direct;
      verdict = false;
    }
    if (verdict != classified) {
      region_.add_note("classification overridden by a direct evaluation");
    }
    region_.add({std::move(p), verdict, provenance});
  }

  void add_invalid_subtree(std::vector<double>& prefix) {
    if (prefix.size() == space_.size()) {
      add_point(prefix, false);
      return;
    }
    for (double g : grids_[prefix.size()]) {
      prefix.push_back(g);
      add_invalid_subtree(prefix);
      prefix.pop_back();
    }
  }

  const ParameterSpace& space_;
  const MonotoneDirections& directions_;
  MembershipProbe& probe_;
  const SearchConfig& config_;
  std::vector<std::vector<double>> grids_;
  std::vector<double> anchors_;
  ValidityRegion region_;
};

}  // namespace detail

/// Nested axis-by-axis search: bisect the first axis, then for every valid
/// grid value bisect the next axis, and so on. Returns every feasible grid
/// point with its verdict plus the boundary points found.
///
/// Each one-dimensional search probes both feasible ends of the axis first:
/// mixed ends are bisected, equal ends classify the whole axis at once.
inline ValidityRegion validity_region_search(const ParameterSpace& space,
                                             const StatePoint& nominal,
                                             const MonotoneDirections& directions,
                                             MembershipProbe& probe,
                                             const SearchConfig& config) {
  config.validate(space);
  if (directions.size() != space.size()) {
    throw ConfigurationError("one monotone direction per dimension required");
  }
  if (!point_in_bounds(nominal, space)) {
    throw PreconditionError("nominal state lies outside the bounds");
  }
  detail::RegionSearch search(space, nominal, directions, probe, config);
  std::vector<double> prefix;
  try {
    search.run(prefix);
  } catch (const BudgetExhaustedError& e) {
    throw RegionBudgetExhausted(e.what(), std::move(search.region()));
  }
  return std::move(search.region());
}

/// Exhaustive evaluation at every grid point, first dimension slowest.
template <class Probe>
std::vector<std::pair<StatePoint, bool>> grid_oracle(
    const ParameterSpace& space, Probe&& probe, const std::vector<double>& steps,
    std::size_t max_evaluations = kUnlimited) {
  if (steps.size() != space.size()) {
    throw ConfigurationError("one grid step per dimension required");
  }
  std::vector<std::vector<double>> grids;
  std::size_t total = 1;
  for (std::size_t i = 0; i < space.size(); ++i) {
    grids.push_back(axis_grid(space[i], steps[i]));
    total *= grids.back().size();
  }
  if (total > max_evaluations) {
    throw BudgetExhaustedError("grid of " + std::to_string(total) +
                               " points exceeds the evaluation budget");
  }
  std::vector<std::pair<StatePoint, bool>> out;
  out.reserve(total);
  std::vector<std::size_t> index(space.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    std::vector<double> coords(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) coords[i] = grids[i][index[i]];
    StatePoint p = space.point(std::move(coords));
    const bool member = probe(p);
    out.emplace_back(std::move(p), member);
    for (std::size_t i = space.size(); i-- > 0;) {
      if (++index[i] < grids[i].size()) break;
      index[i] = 0;
    }
  }
  return out;
}

}  // namespace decival
