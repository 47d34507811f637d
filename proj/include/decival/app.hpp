#pragma once

// Subcommand implementations behind the command-line tool. Each returns the
// process exit code; errors surface as exceptions mapped by `exit_code_for`.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "decival/boundary_search.hpp"
#include "decival/io.hpp"
#include "decival/lane_change_study.hpp"

namespace decival::app {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kBudgetExhausted = 3,
  kDivergence = 4,
};

struct RunConfig {
  std::string scenario_path;
  std::string out_dir = ".";
  std::optional<double> tolerance;  // default: a fraction of each step
  double step_p = 5.0;
  double step_v = 1.0;
  double step_a = 0.25;
  std::string cache_path;
  std::size_t workers = 1;
  std::size_t max_evals = kUnlimited;
  std::uint64_t seed = 0;  // reserved; every algorithm is deterministic
  traffic::ModelPair models;
  std::vector<std::size_t> cars;
  bool inference = true;
};

inline constexpr double kDefaultToleranceFraction = 0.05;

inline SearchConfig search_config(const RunConfig& c) {
  const std::vector<double> step{c.step_p, c.step_v, c.step_a};
  std::vector<double> tol;
  for (double s : step) {
    tol.push_back(c.tolerance ? *c.tolerance : s * kDefaultToleranceFraction);
  }
  return {tol, step, c.max_evals};
}

inline traffic::StudyOptions study_options(const RunConfig& c) {
  traffic::StudyOptions o;
  o.models = c.models;
  o.search = search_config(c);
  o.inference = c.inference;
  o.workers = c.workers;
  o.cars = c.cars;
  return o;
}

inline void prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigurationError("cannot create output directory '" + dir + "'");
  }
}

inline std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

inline int run_search(const RunConfig& c, std::ostream& log) {
  const auto loaded = io::load_scenario(c.scenario_path);
  for (const auto& line : loaded.report) log << line << "\n";
  const auto options = study_options(c);
  prepare_out_dir(c.out_dir);

  traffic::PreloadedRecords preload;
  if (!c.cache_path.empty() && std::filesystem::exists(c.cache_path)) {
    preload = io::parse_cache(io::read_file(c.cache_path), loaded.definition);
  }

  const auto result = traffic::run_study(loaded.definition, options, preload);
  io::write_file(join_path(c.out_dir, "region.csv"), io::region_csv(result));
  io::write_file(join_path(c.out_dir, "boundary.csv"), io::boundary_csv(result));
  io::write_file(join_path(c.out_dir, "summary.json"),
                 io::summary_json(result, c.models));
  if (!c.cache_path.empty()) io::write_file(c.cache_path, io::cache_lines(result));

  ProbeStats total;
  for (const auto& car : result.cars) {
    total.direct += car.stats.direct;
    total.cached += car.stats.cached;
    total.inferred += car.stats.inferred;
    log << "car " << car.vehicle_id << " (" << car.name
        << "): " << car.region.valid_count() << "/" << car.region.size()
        << " grid points agree, " << car.stats.direct << " direct evaluations"
        << (car.budget_error ? ", budget exhausted" : "") << "\n";
  }
  log << "direct=" << total.direct << " cached=" << total.cached
      << " inferred=" << total.inferred << " status=" << io::status_of(result)
      << "\n";
  if (result.budget_exhausted()) return kBudgetExhausted;
  if (result.divergences() > 0) return kDivergence;
  return kOk;
}

inline int check_point(const RunConfig& c, std::size_t car, double p, double v,
                       double a, std::ostream& out) {
  const auto loaded = io::load_scenario(c.scenario_path);
  const auto& def = loaded.definition;
  const auto space = traffic::car_space(def, car);
  const StatePoint point = space.point({p, v, a});
  if (!point_in_bounds(point, space)) {
    throw PreconditionError("point lies outside the search bounds of car " +
                            std::to_string(car));
  }
  out << "car " << car << " (" << def.scenario.vehicle(car).name
      << ") position_m=" << io::fmt(p) << " velocity_mps=" << io::fmt(v)
      << " acceleration_mps2=" << io::fmt(a) << "\n";

  const auto violated = traffic::violated_at(def, car, point);
  if (!violated.empty()) {
    out << "infeasible:";
    for (std::size_t i = 0; i < violated.size(); ++i) {
      out << (i ? ", " : " ") << violated[i];
    }
    out << "\n";
    return kOk;
  }
  out << "feasible\n";

  traffic::PreloadedRecords preload;
  if (!c.cache_path.empty() && std::filesystem::exists(c.cache_path)) {
    preload = io::parse_cache(io::read_file(c.cache_path), def);
  }
  ExperimentCache cache(c.inference
                            ? traffic::car_directions(def, car)
                            : MonotoneDirections::all(3, Direction::unknown));
  if (auto it = preload.find(car); it != preload.end()) {
    for (const auto& r : it->second) {
      cache.record(space.point(r.point.values()), r.verdict, r.source,
                   r.surrogate_decision, r.reference_decision);
    }
  }

  const Inference inf = cache.infer(point);
  if (inf.verdict) {
    const auto& w = *inf.witness;
    const bool exact = inf.exact;
    out << "decision_surrogate=" << (exact ? w.surrogate_decision : "n/a")
        << "\n"
        << "decision_reference=" << (exact ? w.reference_decision : "n/a")
        << "\n"
        << "agree=" << (*inf.verdict == Verdict::valid ? "true" : "false")
        << "\n"
        << "source=inferred ("
        << (exact ? "cached record #" : "dominated by record #") << w.order
        << ")\n";
    return kOk;
  }

  const auto d = traffic::evaluate_point(def, c.models, car, point);
  const auto e = traffic::to_evaluation(d);
  out << "decision_surrogate=" << e.surrogate_decision << "\n"
      << "decision_reference=" << e.reference_decision << "\n"
      << "agree=" << (e.agree ? "true" : "false") << "\n"
      << "source=direct\n";
  if (e.diverged) {
    out << "diverged: " << e.note << "\n";
    return kDivergence;
  }
  return kOk;
}

inline int simulate(const RunConfig& c, std::ostream& log) {
  const auto loaded = io::load_scenario(c.scenario_path);
  const auto& def = loaded.definition;
  prepare_out_dir(c.out_dir);
  std::string csv(io::kTraceHeader);
  int code = kOk;
  for (auto model : {c.models.surrogate, c.models.reference}) {
    try {
      const auto trace = traffic::predict(model, def.scenario);
      csv += io::trace_csv(trace, traffic::to_string(model));
      const auto q = traffic::extract_quantities(trace, def.scenario, def.rules);
      log << traffic::to_string(model) << ": "
          << traffic::to_string(traffic::decide(q, def.rules))
          << " (min front gap " << io::fmt(q.min_front_gap_m) << " m)\n";
    } catch (const traffic::FixedPointDivergenceError& e) {
      log << traffic::to_string(model) << ": diverged: " << e.what() << "\n";
      code = kDivergence;
    }
  }
  io::write_file(join_path(c.out_dir, "traces.csv"), csv);
  return code;
}

/// Direct evaluation at every grid point of the selected cars, without the
/// cache. Infeasible points are listed with empty decisions.
inline int oracle(const RunConfig& c, std::ostream& log) {
  const auto loaded = io::load_scenario(c.scenario_path);
  const auto& def = loaded.definition;
  prepare_out_dir(c.out_dir);
  std::vector<std::size_t> cars = c.cars;
  if (cars.empty()) {
    for (std::size_t id = 1; id < def.scenario.vehicle_count(); ++id) {
      cars.push_back(id);
    }
  }
  std::string csv =
      "car_index,position_m,velocity_mps,acceleration_mps2,feasible,"
      "decision_surrogate,decision_reference,agree\n";
  std::size_t divergences = 0;
  for (std::size_t car : cars) {
    const auto space = traffic::car_space(def, car);
    std::size_t agree = 0, feasible = 0;
    grid_oracle(
        space,
        [&](const StatePoint& p) {
          std::string row = std::to_string(car) + "," + io::fmt(p[0]) + "," +
                            io::fmt(p[1]) + "," + io::fmt(p[2]) + ",";
          if (!traffic::violated_at(def, car, p).empty()) {
            csv += row + "false,,,false\n";
            return false;
          }
          ++feasible;
          const auto e = traffic::to_evaluation(
              traffic::evaluate_point(def, c.models, car, p));
          if (e.diverged) ++divergences;
          if (e.agree) ++agree;
          csv += row + "true," + e.surrogate_decision + "," +
                 e.reference_decision + "," + (e.agree ? "true" : "false") +
                 "\n";
          return e.agree;
        },
        {c.step_p, c.step_v, c.step_a}, c.max_evals);
    log << "car " << car << ": " << agree << "/" << feasible
        << " feasible grid points agree\n";
  }
  io::write_file(join_path(c.out_dir, "oracle.csv"), csv);
  return divergences ? kDivergence : kOk;
}

/// Maps a library exception to the documented exit code.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const BudgetExhaustedError*>(&e)) return kBudgetExhausted;
  if (dynamic_cast<const traffic::FixedPointDivergenceError*>(&e)) {
    return kDivergence;
  }
  return kConfigError;
}

}  // namespace decival::app
