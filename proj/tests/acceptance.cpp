// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
//
//   acceptance --work-dir DIR --cli PATH_TO_DECIVAL

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "decival/boundary_search.hpp"
#include "decival/io.hpp"
#include "decival/lane_change_study.hpp"

namespace {

using namespace decival;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Report {
 public:
  void line(int id, const std::string& name, const Outcome& o, double seconds,
            double limit_s) {
    const bool ok = o.pass && (limit_s <= 0.0 || seconds < limit_s);
    all_ &= ok;
    char time[64];
    std::snprintf(time, sizeof time, "%.2f s", seconds);
    std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << name << ": "
              << o.detail << " (" << time;
    if (limit_s > 0.0) std::cout << ", limit " << limit_s << " s";
    std::cout << ")" << std::endl;
  }
  bool all() const { return all_; }

 private:
  bool all_ = true;
};

template <class F>
double timed(F&& f) {
  const auto t0 = Clock::now();
  f();
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string str(std::size_t n) { return std::to_string(n); }

// 1. Bisection against random step thresholds.
Outcome binary_search() {
  std::mt19937_64 rng(20240611);
  std::size_t misses = 0, over_budget = 0, max_calls = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_real_distribution<double> lower(-1000.0, 1000.0);
    std::uniform_real_distribution<double> extent(0.1, 2000.0);
    const double lo = lower(rng);
    const double hi = lo + extent(rng);
    const ParameterSpace s({{"x", "", lo, hi}});
    std::uniform_real_distribution<double> ut(lo, hi);
    const double t = ut(rng);
    const double tol = 1e-3 * (hi - lo);
    std::size_t calls = 0;
    auto probe = [&](const StatePoint& x) {
      ++calls;
      return x[0] <= t;
    };
    const auto b = find_boundary(s.point({lo}), s.point({hi}), probe, tol);
    if (std::abs(b.valid[0] - t) > tol) ++misses;
    const auto bound =
        static_cast<std::size_t>(std::ceil(std::log2((hi - lo) / tol))) + 2;
    if (calls > bound) ++over_budget;
    max_calls = std::max(max_calls, calls);
  }
  return {misses == 0 && over_budget == 0,
          "200 trials, " + str(misses) + " outside tolerance, " +
              str(over_budget) + " over the call bound, max " + str(max_calls) +
              " calls"};
}

// Synthetic monotone probes on a 21 x 21 x 25 grid.
struct Synthetic {
  std::function<bool(const StatePoint&)> truth;
  MonotoneDirections directions;
};

ParameterSpace synthetic_space() {
  return ParameterSpace({{"p", "m", 0.0, 200.0},
                         {"v", "m/s", 0.0, 40.0},
                         {"a", "m/s^2", -3.0, 3.0}});
}

const SearchConfig kSyntheticConfig{{0.5, 0.1, 0.0125}, {10.0, 2.0, 0.25}, kUnlimited};

std::vector<Synthetic> synthetic_probes() {
  const auto s = synthetic_space();
  std::mt19937_64 rng(4242);
  std::bernoulli_distribution coin(0.5);
  std::vector<Synthetic> out;
  for (int k = 0; k < 12; ++k) {
    std::vector<Direction> dirs;
    std::vector<double> w, t;
    for (std::size_t i = 0; i < 3; ++i) {
      dirs.push_back(coin(rng) ? Direction::increasing : Direction::decreasing);
      std::uniform_real_distribution<double> mag(0.2, 2.0);
      std::uniform_real_distribution<double> ut(s[i].lower, s[i].upper);
      const double sign = dirs.back() == Direction::increasing ? 1.0 : -1.0;
      w.push_back(sign * mag(rng) / s[i].extent());
      t.push_back(ut(rng));
    }
    std::function<bool(const StatePoint&)> truth;
    if (k % 2 == 0) {
      // Orthant: every coordinate on its favorable side of a threshold.
      truth = [t, dirs](const StatePoint& x) {
        for (std::size_t i = 0; i < t.size(); ++i) {
          if (dirs[i] == Direction::increasing ? x[i] < t[i] : x[i] > t[i]) {
            return false;
          }
        }
        return true;
      };
    } else {
      double lo = 0.0, hi = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        lo += std::min(w[i] * s[i].lower, w[i] * s[i].upper);
        hi += std::max(w[i] * s[i].lower, w[i] * s[i].upper);
      }
      std::uniform_real_distribution<double> uc(lo, hi);
      const double c = uc(rng);
      truth = [w, c](const StatePoint& x) {
        double sum = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] * x[i];
        return sum >= c;
      };
    }
    out.push_back({truth, MonotoneDirections(dirs)});
  }
  return out;
}

MembershipProbe membership(const Synthetic& p, bool inference) {
  return MembershipProbe(
      [truth = p.truth](const StatePoint& x) {
        Evaluation e;
        e.agree = truth(x);
        return e;
      },
      ExperimentCache(inference ? p.directions
                                : MonotoneDirections::all(3, Direction::unknown)),
      {}, kUnlimited);
}

StatePoint synthetic_nominal() { return synthetic_space().point({100, 20, 0}); }

// 2. Region search against the exhaustive grid.
Outcome oracle_equivalence() {
  const auto s = synthetic_space();
  const auto probes = synthetic_probes();
  std::size_t mismatched = 0, grid = 0;
  for (const auto& p : probes) {
    auto probe = membership(p, true);
    const auto region = validity_region_search(s, synthetic_nominal(),
                                               p.directions, probe,
                                               kSyntheticConfig);
    const auto oracle = grid_oracle(s, p.truth, kSyntheticConfig.step);
    grid = oracle.size();
    bool same = region.size() == oracle.size();
    for (const auto& [x, member] : oracle) {
      same &= region.verdict(x.values()) == member;
    }
    if (!same) ++mismatched;
  }
  return {mismatched == 0 && grid == 21u * 21u * 25u,
          str(probes.size()) + " probes over " + str(grid) + " grid points, " +
              str(mismatched) + " with a differing region"};
}

// 3. Inference soundness, savings and the braking example.
Outcome inference() {
  const auto s = synthetic_space();
  const auto probes = synthetic_probes();
  std::size_t contradictions = 0, with_direct = 0, without_direct = 0,
              inferred = 0;
  for (const auto& p : probes) {
    auto with = membership(p, true);
    auto without = membership(p, false);
    const auto a = validity_region_search(s, synthetic_nominal(), p.directions,
                                          with, kSyntheticConfig);
    validity_region_search(s, synthetic_nominal(), p.directions, without,
                           kSyntheticConfig);
    for (const auto& rec : with.cache().records()) {
      if ((rec.verdict == Verdict::valid) != p.truth(rec.point)) ++contradictions;
    }
    for (const auto& rp : a.points()) {
      if (rp.valid != p.truth(rp.point)) ++contradictions;
    }
    with_direct += with.stats().direct;
    without_direct += without.stats().direct;
    inferred += with.stats().inferred;
  }

  const ParameterSpace braking({{"mass_kg", "kg", 10000.0, 30000.0},
                                {"incline_deg", "deg", 0.0, 30.0}});
  ExperimentCache cache(
      MonotoneDirections({Direction::decreasing, Direction::decreasing}));
  cache.record(braking.point({15220.0, 19.0}), Verdict::invalid);
  cache.record(braking.point({22330.0, 6.0}), Verdict::valid);
  const bool triple =
      infer_verdict(braking.point({15220.0, 19.0}), cache) == Verdict::invalid &&
      infer_verdict(braking.point({22330.0, 6.0}), cache) == Verdict::valid &&
      infer_verdict(braking.point({18000.0, 10.0}), cache) == std::nullopt &&
      infer_verdict(braking.point({16000.0, 20.0}), cache) == Verdict::invalid &&
      infer_verdict(braking.point({25000.0, 25.0}), cache) == Verdict::invalid &&
      infer_verdict(braking.point({15000.0, 19.0}), cache) == std::nullopt;

  return {contradictions == 0 && with_direct < without_direct && triple,
          str(contradictions) + " contradictions, direct evaluations " +
              str(with_direct) + " with inference vs " + str(without_direct) +
              " without (" + str(inferred) + " inferred), braking triple " +
              (triple ? "reproduced" : "NOT reproduced")};
}

traffic::StudyDefinition bundled() {
  return io::load_scenario(std::string(DECIVAL_DATA_DIR) + "/case_study.json")
      .definition;
}

traffic::StudyOptions default_options() {
  traffic::StudyOptions o;
  const std::vector<double> step{5.0, 1.0, 0.25};
  o.search = SearchConfig{{0.25, 0.05, 0.0125}, step, kUnlimited};
  return o;
}

std::size_t feasible_grid_points(const traffic::StudyDefinition& def,
                                 std::size_t car, const std::vector<double>& step) {
  std::size_t n = 0;
  grid_oracle(traffic::car_space(def, car), [&](const StatePoint& x) {
    if (traffic::violated_at(def, car, x).empty()) ++n;
    return true;
  }, step);
  return n;
}

// 4. Surrogate = reference agrees everywhere.
Outcome identity() {
  const auto def = bundled();
  auto opt = default_options();
  opt.models = {traffic::ModelKind::high_validity,
                traffic::ModelKind::high_validity};
  const auto result = traffic::run_study(def, opt);
  std::size_t points = 0, disagree = 0, missing = 0;
  for (const auto& car : result.cars) {
    points += car.region.size();
    disagree += car.region.size() - car.region.valid_count();
    if (car.region.size() !=
        feasible_grid_points(def, car.vehicle_id, opt.search.step)) {
      ++missing;
    }
  }
  return {disagree == 0 && missing == 0 && !result.budget_exhausted(),
          str(points) + " feasible grid points over " +
              str(result.cars.size()) + " cars, " + str(disagree) +
              " disagreeing, " + str(missing) + " cars with incomplete coverage"};
}

// 5. Close decelerating front car triggers a lane change in the reference,
// and the front-car region is upward-closed in position.
Outcome case_study() {
  const auto def = bundled();
  auto opt = default_options();
  constexpr std::size_t kFront = 1;
  opt.cars = {kFront};
  const auto result = traffic::run_study(def, opt);
  const auto& region = result.cars.at(0).region;
  const auto space = traffic::car_space(def, kFront);

  std::string witness;
  std::size_t breaks = 0, truth_breaks = 0, agree_points = 0;
  // Sweep each (v, a) column of the grid in increasing position.
  const auto pg = axis_grid(space[0], opt.search.step[0]);
  const auto vg = axis_grid(space[1], opt.search.step[1]);
  const auto ag = axis_grid(space[2], opt.search.step[2]);
  for (double v : vg) {
    for (double a : ag) {
      bool seen_agree = false, seen_truth = false;
      for (double p : pg) {
        const auto x = space.point({p, v, a});
        if (!traffic::violated_at(def, kFront, x).empty()) continue;
        const auto d = traffic::evaluate_point(def, opt.models, kFront, x);
        const bool truth = d.agree();
        if (witness.empty() && a < 0.0 && p <= 40.0 && d.reference &&
            *d.reference != traffic::LaneAction::keep_lane) {
          witness = "p=" + io::fmt(p) + " v=" + io::fmt(v) + " a=" + io::fmt(a) +
                    " reference=" + std::string(traffic::to_string(*d.reference));
        }
        const auto found = region.verdict(x.values());
        if (!found) {
          ++breaks;
          continue;
        }
        if (*found) ++agree_points;
        if (seen_agree && !*found) ++breaks;
        if (seen_truth && !truth) ++truth_breaks;
        seen_agree |= *found;
        seen_truth |= truth;
      }
    }
  }
  const bool ok = !witness.empty() && breaks == 0 && truth_breaks == 0 &&
                  agree_points > 0 && agree_points < region.size();
  return {ok, (witness.empty() ? std::string("no lane-change witness")
                               : "lane change at " + witness) +
                  "; " + str(agree_points) + "/" + str(region.size()) +
                  " agree, " + str(breaks) + " region and " + str(truth_breaks) +
                  " grid-sweep violations of upward closure in position"};
}

// 6. Two CLI runs per worker count give identical files.
Outcome determinism(const std::string& cli, const std::filesystem::path& work) {
  const auto scenario = std::string(DECIVAL_DATA_DIR) + "/case_study.json";
  std::vector<std::string> notes;
  bool ok = true;
  auto slurp = [](const std::filesystem::path& p) {
    return decival::io::read_file(p.string());
  };
  std::string first_region;
  for (int workers : {1, 4}) {
    std::vector<std::filesystem::path> dirs;
    for (const char* run : {"a", "b"}) {
      const auto dir = work / ("w" + std::to_string(workers) + run);
      std::filesystem::remove_all(dir);
      const std::string cmd = "\"" + cli + "\" search --scenario \"" + scenario +
                              "\" --out \"" + dir.string() + "\" --workers " +
                              std::to_string(workers) + " > \"" +
                              (work / "search.log").string() + "\" 2>&1";
      const int rc = std::system(cmd.c_str());
      if (rc != 0) {
        ok = false;
        notes.push_back("search exited with " + std::to_string(rc));
      }
      dirs.push_back(dir);
    }
    if (!ok) break;
    for (const char* file : {"region.csv", "boundary.csv"}) {
      const auto x = slurp(dirs[0] / file);
      const auto y = slurp(dirs[1] / file);
      const bool same = x == y && !x.empty();
      ok &= same;
      notes.push_back(std::string(file) + " w" + std::to_string(workers) +
                      (same ? " identical" : " DIFFERS") + " (" +
                      str(x.size()) + " bytes)");
      if (std::string(file) == "region.csv") {
        if (first_region.empty()) first_region = x;
        else if (first_region != x) notes.push_back("note: w1 and w4 differ");
      }
    }
  }
  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : ", ") + n;
  return {ok, detail};
}

// 7. Kinematics and model sanity.
Outcome models() {
  using namespace decival::traffic;
  double closed = 0.0;
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> ux(-500, 500), uv(0, 40), ua(-3, 3),
      ut(0, 20);
  for (int i = 0; i < 1000; ++i) {
    const double x = ux(rng), v = uv(rng), a = ua(rng), t = ut(rng);
    const double expect = x + v * t + a * t * t / 2.0;
    closed = std::max(closed, std::abs(constant_acceleration_position(x, v, a, t) -
                                       expect));
  }
  closed = std::max(closed, std::abs(constant_acceleration_position(5, 10, 2, 2) - 29.0));

  const auto base = bundled().scenario;
  double translation = 0.0;
  std::uniform_real_distribution<double> shift(-10000, 10000), up(35, 100),
      ub(-3, 2);
  for (int i = 0; i < 20; ++i) {
    auto s = base;
    s.surrounding[0].position_m = up(rng);
    s.surrounding[0].acceleration_mps2 = ub(rng);
    auto moved = s;
    const double d = shift(rng);
    for (std::size_t id = 0; id < moved.vehicle_count(); ++id) {
      moved.vehicle(id).position_m += d;
    }
    for (auto kind : {ModelKind::constant_acceleration, ModelKind::high_validity}) {
      const auto t0 = predict(kind, s);
      const auto t1 = predict(kind, moved);
      for (std::size_t id = 0; id < t0.vehicles(); ++id) {
        for (std::size_t n = 0; n < t0.samples(); ++n) {
          translation = std::max(translation, std::abs(t1.at(id, n).position_m -
                                                       d - t0.at(id, n).position_m));
        }
      }
    }
  }

  // Cars spread far apart: nobody is within interaction range.
  auto sparse = base;
  const double spread[] = {400, -400, 900, -900, 1400, -1400};
  for (std::size_t i = 0; i < sparse.surrounding.size(); ++i) {
    sparse.surrounding[i].lane = sparse.ego.lane;
    sparse.surrounding[i].position_m = spread[i];
    sparse.surrounding[i].acceleration_mps2 = i % 2 ? 0.5 : -0.5;
  }
  const auto hv = high_validity_predict(sparse).trace;
  const auto sv = surrogate_predict(sparse);
  bool identical = true;
  for (std::size_t id = 0; id < hv.vehicles(); ++id) {
    for (std::size_t n = 0; n < hv.samples(); ++n) {
      identical &= hv.at(id, n).position_m == sv.at(id, n).position_m &&
                   hv.at(id, n).velocity_mps == sv.at(id, n).velocity_mps;
    }
  }

  double worst = 0.0;
  for (double p : {35.0, 40.0, 60.0}) {
    for (double a : {-3.0, -0.5, 0.0, 2.0}) {
      auto coarse = base;
      coarse.surrounding[0].position_m = p;
      coarse.surrounding[0].acceleration_mps2 = a;
      auto fine = coarse;
      fine.time_step_s /= 2.0;
      const auto hc = high_validity_predict(coarse).trace;
      const auto hf = high_validity_predict(fine).trace;
      for (std::size_t id = 0; id < hc.vehicles(); ++id) {
        const double xc = hc.at(id, hc.samples() - 1).position_m;
        const double xf = hf.at(id, hf.samples() - 1).position_m;
        // Relative to the distance travelled, which is what the step affects.
        const double travelled = std::abs(xc - coarse.vehicle(id).position_m);
        if (travelled > 0.0) worst = std::max(worst, std::abs(xf - xc) / travelled);
      }
    }
  }

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "closed form max error %.1e, translation max error %.1e, "
                "out-of-range traces %s, step halving max change %.3f%%",
                closed, translation, identical ? "identical" : "DIFFER",
                100.0 * worst);
  return {closed <= 1e-12 && translation <= 1e-9 && identical && worst < 0.01,
          buf};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  std::filesystem::path work = std::filesystem::temp_directory_path() / "decival_acceptance";
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--cli") cli = argv[i + 1];
    else if (flag == "--work-dir") work = argv[i + 1];
  }
  std::filesystem::create_directories(work);

  Report report;
  auto run = [&](int id, const std::string& name, double limit,
                 const std::function<Outcome()>& f) {
    Outcome o;
    const double s = timed([&] {
      try {
        o = f();
      } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
      }
    });
    report.line(id, name, o, s, limit);
  };

  run(1, "binary search", 5.0, binary_search);
  run(2, "oracle equivalence", 60.0, oracle_equivalence);
  run(3, "inference soundness and savings", 0.0, inference);
  run(4, "identity region", 30.0, identity);
  run(5, "case-study phenomenon", 600.0, case_study);
  if (cli.empty()) {
    report.line(6, "determinism", {false, "no --cli given"}, 0.0, 0.0);
  } else {
    run(6, "determinism", 0.0, [&] { return determinism(cli, work); });
  }
  run(7, "model sanity", 0.0, models);

  std::cout << (report.all() ? "ALL PASS" : "SOME FAILED") << std::endl;
  return report.all() ? 0 : 1;
}
