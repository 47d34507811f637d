#pragma once

// Scenario files, CSV exports and the newline-delimited experiment cache.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "decival/boundary_search.hpp"
#include "decival/constraints.hpp"
#include "decival/lane_change_study.hpp"
#include "decival/vehicle_models.hpp"

namespace decival::io {

using nlohmann::json;

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Fixed six-decimal formatting; negative zero prints as zero.
inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigurationError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ConfigurationError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("field '" + path_ + "': " + what);
  }

  Reader at(const std::string& key) const {
    if (!j_.is_object()) fail("expected an object");
    if (!j_.contains(key)) {
      throw ParseError("field '" + child(key) + "': missing");
    }
    return Reader(j_.at(key), child(key));
  }

  std::optional<Reader> maybe(const std::string& key) const {
    if (!j_.is_object()) fail("expected an object");
    if (!j_.contains(key)) return std::nullopt;
    return Reader(j_.at(key), child(key));
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  int integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<int>();
  }

  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  std::vector<Reader> array() const {
    if (!j_.is_array()) fail("expected an array");
    std::vector<Reader> out;
    for (std::size_t i = 0; i < j_.size(); ++i) {
      out.emplace_back(j_.at(i), path_ + "[" + std::to_string(i) + "]");
    }
    return out;
  }

  traffic::Interval interval() const {
    const auto items = array();
    if (items.size() != 2) fail("expected [lower, upper]");
    traffic::Interval iv{items[0].number(), items[1].number()};
    if (!(iv.lower < iv.upper)) fail("lower bound must be below upper bound");
    return iv;
  }

  void number_into(const std::string& key, double& target) const {
    if (auto r = maybe(key)) target = r->number();
  }

 private:
  std::string child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
};

inline traffic::VehicleState read_vehicle(const Reader& r) {
  traffic::VehicleState v;
  if (auto n = r.maybe("name")) v.name = n->string();
  v.lane = r.at("lane").integer();
  v.position_m = r.at("position_m").number();
  v.velocity_mps = r.at("velocity_mps").number();
  if (auto a = r.maybe("acceleration_mps2")) v.acceleration_mps2 = a->number();
  return v;
}

}  // namespace detail

struct LoadedStudy {
  traffic::StudyDefinition definition;
  std::vector<std::string> report;  // one line per checked constraint
};

/// Checks a study definition the way a freshly loaded file is checked:
/// structure, lane layout, the predicates at t = 0 and the search bounds.
inline std::vector<std::string> validate_study(
    const traffic::StudyDefinition& def) {
  using traffic::ScenarioValidationError;
  const auto& s = def.scenario;
  traffic::validate_structure(s);
  if (s.surrounding.size() != 2 * static_cast<std::size_t>(s.lane_count)) {
    throw ScenarioValidationError(
        {}, "expected two surrounding cars per lane (" +
                std::to_string(2 * s.lane_count) + "), found " +
                std::to_string(s.surrounding.size()));
  }
  for (std::size_t i = 0; i < s.surrounding.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (s.surrounding[i].name == s.surrounding[j].name) {
        throw ScenarioValidationError(
            {}, "duplicate vehicle name '" + s.surrounding[i].name + "'");
      }
    }
  }
  const traffic::SceneQuantities q(s);
  std::vector<std::string> report;
  for (const auto& c : def.constraints.constraints()) {
    if (!c.evaluate(q)) {
      throw ScenarioValidationError(
          c.name, "violated at t = 0 (" + c.quantity + " = " +
                      fmt(*q.quantity(c.quantity)) + ", required " +
                      std::string(to_string(c.comparison)) + " " +
                      fmt(c.bound) + ")");
    }
    switch (c.kind) {
      case ConstraintKind::predicate: report.push_back(c.name + ": satisfied"); break;
      case ConstraintKind::assumption: report.push_back(c.name + ": assumed"); break;
      case ConstraintKind::direction: report.push_back(c.name + ": declared"); break;
    }
  }
  for (std::size_t id = 1; id < s.vehicle_count(); ++id) {
    const auto space = traffic::car_space(def, id);
    traffic::car_directions(def, id);
    if (!point_in_bounds(traffic::car_nominal(def, id), space)) {
      throw ScenarioValidationError(
          {}, "vehicle '" + s.vehicle(id).name +
                  "' starts outside its search bounds");
    }
  }
  return report;
}

inline LoadedStudy parse_study(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("line " + std::to_string(detail::line_of(text, e.byte)) +
                     ": " + e.what());
  }
  const detail::Reader root(j, "");
  LoadedStudy out;
  auto& def = out.definition;
  auto& s = def.scenario;

  s.lane_count = root.at("lanes").integer();
  root.number_into("horizon_s", s.horizon_s);
  root.number_into("time_step_s", s.time_step_s);
  root.number_into("min_speed_mps", s.min_speed_mps);
  root.number_into("vehicle_length_m", s.vehicle_length_m);
  double min_gap = 30.0;
  root.number_into("min_gap_m", min_gap);
  def.constraints = traffic::case_study_constraints(s.min_speed_mps, min_gap);

  s.ego = detail::read_vehicle(root.at("ego"));
  if (s.ego.name.empty()) s.ego.name = "ego";
  const auto cars = root.at("surrounding").array();
  def.directions.resize(cars.size());
  for (std::size_t i = 0; i < cars.size(); ++i) {
    s.surrounding.push_back(detail::read_vehicle(cars[i]));
    if (s.surrounding.back().name.empty()) {
      s.surrounding.back().name = "car" + std::to_string(i + 1);
    }
    if (auto d = cars[i].maybe("directions")) {
      for (const auto& item : d->array()) {
        const auto parsed = parse_direction(item.string());
        if (!parsed) item.fail("expected increasing, decreasing or unknown");
        def.directions[i].push_back(*parsed);
      }
      if (def.directions[i].size() != 3) {
        d->fail("expected three entries (position, velocity, acceleration)");
      }
    }
  }

  if (auto c = root.maybe("controller")) {
    auto& p = s.controller;
    c->number_into("velocity_gain", p.velocity_gain);
    c->number_into("gap_gain", p.gap_gain);
    c->number_into("standstill_m", p.standstill_m);
    c->number_into("headway_s", p.headway_s);
    c->number_into("min_acceleration_mps2", p.min_acceleration_mps2);
    c->number_into("max_acceleration_mps2", p.max_acceleration_mps2);
    c->number_into("interaction_range_m", p.interaction_range_m);
    c->number_into("convergence_m", p.convergence_m);
    if (auto m = c->maybe("max_iterations")) p.max_iterations = m->integer();
  }
  if (auto d = root.maybe("decision")) {
    d->number_into("safe_front_gap_m", def.rules.safe_front_gap_m);
    d->number_into("clearance_front_m", def.rules.clearance_front_m);
    d->number_into("clearance_rear_m", def.rules.clearance_rear_m);
  }
  if (auto b = root.maybe("bounds")) {
    auto& sb = def.bounds;
    if (auto r = b->maybe("front_position_m")) sb.front_position = r->interval();
    if (auto r = b->maybe("rear_position_m")) sb.rear_position = r->interval();
    if (auto r = b->maybe("velocity_mps")) sb.velocity = r->interval();
    if (auto r = b->maybe("acceleration_mps2")) sb.acceleration = r->interval();
  }

  out.report = validate_study(def);
  return out;
}

inline LoadedStudy load_scenario(const std::string& path) {
  try {
    return parse_study(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Experiment cache
// ---------------------------------------------------------------------------

inline std::string cache_lines(const traffic::StudyResult& result) {
  std::string out;
  for (const auto& car : result.cars) {
    for (const auto& r : car.records) {
      json j = {{"car_index", car.vehicle_id},
                {"order", r.order},
                {"point", r.point.values()},
                {"verdict", std::string(to_string(r.verdict))},
                {"source", std::string(to_string(r.source))},
                {"decision_surrogate", r.surrogate_decision},
                {"decision_reference", r.reference_decision}};
      out += j.dump() + "\n";
    }
  }
  return out;
}

/// Reads records written by `cache_lines`; blank lines are skipped.
inline traffic::PreloadedRecords parse_cache(const std::string& text,
                                             const traffic::StudyDefinition& def) {
  traffic::PreloadedRecords out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "cache line " + std::to_string(number);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    const detail::Reader r(j, "");
    try {
      const int car = r.at("car_index").integer();
      if (car < 1 || static_cast<std::size_t>(car) >= def.scenario.vehicle_count()) {
        r.at("car_index").fail("not a surrounding car of this scenario");
      }
      std::vector<double> coords;
      for (const auto& c : r.at("point").array()) coords.push_back(c.number());
      const auto space = traffic::car_space(def, static_cast<std::size_t>(car));
      if (coords.size() != space.size()) r.at("point").fail("expected 3 values");
      ExperimentRecord rec{space.point(std::move(coords)), Verdict::invalid,
                           Provenance::direct, 0, {}, {}};
      const std::string verdict = r.at("verdict").string();
      if (verdict != "valid" && verdict != "invalid") {
        r.at("verdict").fail("expected valid or invalid");
      }
      rec.verdict = verdict == "valid" ? Verdict::valid : Verdict::invalid;
      const std::string source = r.at("source").string();
      if (source != "direct" && source != "inferred") {
        r.at("source").fail("expected direct or inferred");
      }
      rec.source = source == "direct" ? Provenance::direct : Provenance::inferred;
      if (auto o = r.maybe("order")) rec.order = static_cast<std::uint64_t>(o->integer());
      if (auto d = r.maybe("decision_surrogate")) rec.surrogate_decision = d->string();
      if (auto d = r.maybe("decision_reference")) rec.reference_decision = d->string();
      out[static_cast<std::size_t>(car)].push_back(std::move(rec));
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Result exports
// ---------------------------------------------------------------------------

inline std::string region_csv(const traffic::StudyResult& result) {
  std::string out =
      "car_index,position_m,velocity_mps,acceleration_mps2,decision_surrogate,"
      "decision_reference,agree,provenance\n";
  for (const auto& car : result.cars) {
    std::map<std::vector<double>, const ExperimentRecord*> direct;
    for (const auto& r : car.records) direct.emplace(r.point.values(), &r);
    for (const auto& p : car.region.points()) {
      std::string ds, dr;
      if (p.provenance == Provenance::direct) {
        if (auto it = direct.find(p.point.values()); it != direct.end()) {
          ds = it->second->surrogate_decision;
          dr = it->second->reference_decision;
        } else if (auto d = car.divergent.find(p.point.values());
                   d != car.divergent.end()) {
          ds = d->second.surrogate_decision;
          dr = d->second.reference_decision;
        }
      }
      out += std::to_string(car.vehicle_id) + "," + fmt(p.point[0]) + "," +
             fmt(p.point[1]) + "," + fmt(p.point[2]) + "," + ds + "," + dr +
             "," + (p.valid ? "true" : "false") + "," +
             std::string(to_string(p.provenance)) + "\n";
    }
  }
  return out;
}

inline std::string boundary_csv(const traffic::StudyResult& result) {
  std::string out =
      "car_index,axis,position_m,velocity_mps,acceleration_mps2,interval_width\n";
  for (const auto& car : result.cars) {
    for (const auto& b : car.region.boundary()) {
      out += std::to_string(car.vehicle_id) + "," + b.point.labels()[b.axis] +
             "," + fmt(b.point[0]) + "," + fmt(b.point[1]) + "," +
             fmt(b.point[2]) + "," + fmt(b.interval_width) + "\n";
    }
  }
  return out;
}

inline json stats_json(const ProbeStats& s) {
  return {{"probes", s.probes},           {"direct_evaluations", s.direct},
          {"cached", s.cached},           {"inferred", s.inferred},
          {"infeasible", s.infeasible},   {"divergences", s.divergences}};
}

inline std::string status_of(const traffic::StudyResult& r) {
  if (r.budget_exhausted()) return "budget_exhausted";
  if (r.divergences() > 0) return "divergence";
  return "complete";
}

inline std::string summary_json(const traffic::StudyResult& result,
                                const traffic::ModelPair& models) {
  ProbeStats total;
  json cars = json::array();
  for (const auto& car : result.cars) {
    const auto& s = car.stats;
    total.probes += s.probes;
    total.direct += s.direct;
    total.cached += s.cached;
    total.inferred += s.inferred;
    total.infeasible += s.infeasible;
    total.divergences += s.divergences;
    json boundary = json::array();
    for (const auto& b : car.region.boundary()) {
      boundary.push_back({{"axis", b.point.labels()[b.axis]},
                          {"point", b.point.values()},
                          {"interval_width", b.interval_width}});
    }
    json c = stats_json(s);
    c["car_index"] = car.vehicle_id;
    c["name"] = car.name;
    c["region_points"] = car.region.size();
    c["agreeing_points"] = car.region.valid_count();
    c["boundary"] = std::move(boundary);
    c["partial"] = car.budget_error.has_value();
    if (car.budget_error) c["error"] = *car.budget_error;
    cars.push_back(std::move(c));
  }
  json j = stats_json(total);
  j["status"] = status_of(result);
  j["partial"] = result.budget_exhausted();
  j["surrogate_model"] = std::string(traffic::to_string(models.surrogate));
  j["reference_model"] = std::string(traffic::to_string(models.reference));
  j["wall_time_s"] = result.wall_time_s;
  j["cars"] = std::move(cars);
  return j.dump(2) + "\n";
}

inline std::string trace_csv(const traffic::Trace& t, std::string_view model) {
  std::string out;
  for (std::size_t id = 0; id < t.vehicles(); ++id) {
    for (std::size_t n = 0; n < t.samples(); ++n) {
      const auto& s = t.at(id, n);
      out += std::string(model) + "," + fmt(t.time(n)) + "," +
             std::to_string(id) + "," + t.name(id) + "," +
             std::to_string(t.lane(id)) + "," + fmt(s.position_m) + "," +
             fmt(s.velocity_mps) + "," + fmt(s.acceleration_mps2) + "\n";
    }
  }
  return out;
}

inline constexpr std::string_view kTraceHeader =
    "model,time_s,vehicle_id,name,lane,position_m,velocity_mps,"
    "acceleration_mps2\n";

}  // namespace decival::io
