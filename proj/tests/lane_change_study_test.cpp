#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "decival/lane_change_study.hpp"
#include "test_support.hpp"

namespace decival::traffic {
namespace {

using decival::testing::bundled_study;

constexpr std::size_t kFront = 1;
constexpr std::size_t kRear = 2;
constexpr std::size_t kLeftRear = 4;

StudyOptions default_options() {
  StudyOptions o;
  o.search = SearchConfig{{0.25, 0.05, 0.0125}, {5.0, 1.0, 0.25}, kUnlimited};
  return o;
}

TEST(SceneQuantities, BundledScenario) {
  const auto def = bundled_study();
  const SceneQuantities q(def.scenario);
  EXPECT_EQ(q.quantity("min_speed_mps"), 10.0);
  EXPECT_EQ(q.quantity("front_gap_m"), 35.0);
  EXPECT_EQ(q.quantity("rear_gap_m"), 35.0);
  EXPECT_FALSE(q.quantity("mass_kg").has_value());
  EXPECT_TRUE(is_feasible(q, def.constraints));
}

TEST(Feasibility, CaseStudyPredicates) {
  const auto def = bundled_study();
  const auto space = car_space(def, kFront);
  EXPECT_EQ(violated_at(def, kFront, space.point({30, 10, 0})),
            std::vector<std::string>{"c4-front-gap"});
  EXPECT_EQ(violated_at(def, kFront, space.point({60, 5, 0})),
            std::vector<std::string>{"c2-min-speed"});
  EXPECT_TRUE(violated_at(def, kFront, space.point({40, 10, 0})).empty());
  const auto rear = car_space(def, kRear);
  EXPECT_EQ(violated_at(def, kRear, rear.point({-30, 10, 0})),
            std::vector<std::string>{"c4-rear-gap"});
}

TEST(CarSpace, BoundsAndDirectionsFollowPlacement) {
  const auto def = bundled_study();
  const auto front = car_space(def, kFront);
  EXPECT_EQ(front[0].lower, 20.0);
  EXPECT_EQ(front[0].upper, 150.0);
  const auto rear = car_space(def, kRear);
  EXPECT_EQ(rear[0].lower, -150.0);
  EXPECT_EQ(rear[0].upper, -20.0);
  EXPECT_EQ(car_directions(def, kFront).values(),
            std::vector<Direction>(3, Direction::increasing));
  EXPECT_EQ(car_directions(def, kRear).values(),
            std::vector<Direction>(3, Direction::decreasing));
  EXPECT_EQ(car_nominal(def, kFront).values(),
            (std::vector<double>{40.0, 10.0, -0.5}));
  EXPECT_THROW(car_space(def, 0), ConfigurationError);
  EXPECT_THROW(car_space(def, 7), ConfigurationError);
}

TEST(CarSpace, DirectionOverrides) {
  auto def = bundled_study();
  def.directions[kRear - 1] = {Direction::decreasing, Direction::unknown,
                               Direction::unknown};
  EXPECT_EQ(car_directions(def, kRear)[1], Direction::unknown);
  def.directions[kRear - 1] = {Direction::decreasing};
  EXPECT_THROW(car_directions(def, kRear), ConfigurationError);
}

TEST(Perturb, MovesOnlyTheSelectedCarRelativeToTheEgo) {
  auto def = bundled_study();
  def.scenario.ego.position_m = 1000.0;
  for (auto& c : def.scenario.surrounding) c.position_m += 1000.0;
  const auto s = perturb(def.scenario, kFront,
                         car_space(def, kFront).point({60, 12, 1}));
  EXPECT_EQ(s.surrounding[0].position_m, 1060.0);
  EXPECT_EQ(s.surrounding[0].velocity_mps, 12.0);
  EXPECT_EQ(s.surrounding[0].acceleration_mps2, 1.0);
  EXPECT_EQ(s.surrounding[1].position_m, def.scenario.surrounding[1].position_m);
}

TEST(DecisionProbe, FarFrontCarAgreesOnKeepLane) {
  const auto def = bundled_study();
  const auto p = car_space(def, kFront).point({150, 10, 0});
  const auto d = evaluate_point(def, {}, kFront, p);
  ASSERT_TRUE(d.surrogate && d.reference);
  EXPECT_EQ(*d.surrogate, LaneAction::keep_lane);
  EXPECT_EQ(*d.reference, LaneAction::keep_lane);
  ExperimentCache cache(car_directions(def, kFront));
  EXPECT_TRUE(decision_probe(def, {}, kFront, p, cache));
  EXPECT_EQ(cache.size(), 1u);
}

TEST(DecisionProbe, InfeasiblePointIsAPreconditionError) {
  const auto def = bundled_study();
  ExperimentCache cache(car_directions(def, kFront));
  EXPECT_THROW(decision_probe(def, {}, kFront,
                              car_space(def, kFront).point({25, 10, 0}), cache),
               PreconditionError);
}

TEST(DecisionProbe, MatchesAStandaloneDualSimulation) {
  const auto def = bundled_study();
  const auto space = car_space(def, kFront);
  for (double p : {35.0, 40.0, 45.0, 60.0}) {
    for (double a : {-3.0, -1.0, -0.25, 0.5}) {
      const auto point = space.point({p, 10, a});
      // Standalone: build the scenario by hand and run both models.
      auto s = def.scenario;
      s.surrounding[0].position_m = p;
      s.surrounding[0].acceleration_mps2 = a;
      const auto ds = decide(extract_quantities(surrogate_predict(s), s));
      const auto dr =
          decide(extract_quantities(high_validity_predict(s).trace, s));
      ExperimentCache cache(car_directions(def, kFront));
      EXPECT_EQ(decision_probe(def, {}, kFront, point, cache), ds == dr);
      const auto& rec = cache.records().front();
      EXPECT_EQ(rec.surrogate_decision, to_string(ds));
      EXPECT_EQ(rec.reference_decision, to_string(dr));
    }
  }
}

TEST(CaseStudy, ReferenceChangesLaneBehindACloseDeceleratingFrontCar) {
  const auto def = bundled_study();
  const auto d = evaluate_point(def, {}, kFront,
                                car_space(def, kFront).point({35, 10, -0.25}));
  ASSERT_TRUE(d.reference);
  EXPECT_EQ(*d.reference, LaneAction::change_left);
}

TEST(CaseStudy, FrontCarRegionMatchesTheOracle) {
  const auto def = bundled_study();
  auto opt = default_options();
  opt.cars = {kFront};
  const auto result = run_study(def, opt);
  const auto& region = result.cars.at(0).region;
  const auto space = car_space(def, kFront);
  std::size_t checked = 0;
  grid_oracle(space, [&](const StatePoint& x) {
    if (!violated_at(def, kFront, x).empty()) {
      EXPECT_FALSE(region.verdict(x.values()).has_value());
      return false;
    }
    const bool agree = evaluate_point(def, {}, kFront, x).agree();
    EXPECT_EQ(region.verdict(x.values()), agree);
    ++checked;
    return agree;
  }, opt.search.step);
  EXPECT_EQ(checked, region.size());
  EXPECT_LT(region.valid_count(), region.size());
}

TEST(CaseStudy, IdentityConfigurationAgreesEverywhere) {
  const auto def = bundled_study();
  auto opt = default_options();
  opt.models = {ModelKind::high_validity, ModelKind::high_validity};
  const auto result = run_study(def, opt);
  for (const auto& car : result.cars) {
    EXPECT_EQ(car.region.valid_count(), car.region.size()) << car.name;
    EXPECT_GT(car.region.size(), 0u);
  }
}

TEST(CaseStudy, InferenceSavesEvaluationsOnTheFrontCar) {
  const auto def = bundled_study();
  auto on = default_options();
  on.cars = {kFront};
  auto off = on;
  off.inference = false;
  const auto a = run_study(def, on);
  const auto b = run_study(def, off);
  EXPECT_LT(a.cars[0].stats.direct, b.cars[0].stats.direct);
  for (const auto& p : a.cars[0].region.points()) {
    EXPECT_EQ(b.cars[0].region.verdict(p.point.values()), p.valid);
  }
}

TEST(CaseStudy, WorkerCountDoesNotChangeResults) {
  const auto def = bundled_study();
  auto one = default_options();
  auto four = one;
  four.workers = 4;
  const auto a = run_study(def, one);
  const auto b = run_study(def, four);
  ASSERT_EQ(a.cars.size(), b.cars.size());
  for (std::size_t i = 0; i < a.cars.size(); ++i) {
    EXPECT_EQ(a.cars[i].vehicle_id, b.cars[i].vehicle_id);
    EXPECT_EQ(a.cars[i].stats.direct, b.cars[i].stats.direct);
    const auto pa = a.cars[i].region.points();
    const auto pb = b.cars[i].region.points();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) {
      EXPECT_EQ(pa[k].point, pb[k].point);
      EXPECT_EQ(pa[k].valid, pb[k].valid);
    }
  }
}

TEST(CaseStudy, PreloadedRecordsReplayWithoutEvaluations) {
  const auto def = bundled_study();
  auto opt = default_options();
  opt.cars = {kFront, kRear};
  const auto first = run_study(def, opt);
  PreloadedRecords preload;
  for (const auto& car : first.cars) {
    preload[car.vehicle_id].assign(car.records.begin(), car.records.end());
  }
  const auto second = run_study(def, opt, preload);
  for (std::size_t i = 0; i < second.cars.size(); ++i) {
    EXPECT_EQ(second.cars[i].stats.direct, 0u);
    EXPECT_EQ(second.cars[i].region.size(), first.cars[i].region.size());
    EXPECT_EQ(second.cars[i].region.valid_count(),
              first.cars[i].region.valid_count());
  }
}

TEST(CaseStudy, BudgetExhaustionIsReportedPerCar) {
  const auto def = bundled_study();
  auto opt = default_options();
  opt.cars = {kFront};
  opt.search.max_evaluations = 10;
  const auto r = run_study(def, opt);
  EXPECT_TRUE(r.budget_exhausted());
  EXPECT_EQ(r.cars[0].stats.direct, 10u);
}

// The ego brakes in the reference model, which shifts where the left-rear
// car ends up relative to it. Near the clearance threshold this produces a
// thin band of disagreement that is not monotone in position.
TEST(CaseStudy, LeftRearTruthHasAThinNonMonotoneBand) {
  const auto def = bundled_study();
  const auto space = car_space(def, kLeftRear);
  int flips = 0;
  for (double p = -150; p <= -20; p += 5) {
    const auto x = space.point({p, 16, 1.25});
    if (!violated_at(def, kLeftRear, x).empty()) continue;
    if (!evaluate_point(def, {}, kLeftRear, x).agree()) ++flips;
  }
  EXPECT_EQ(flips, 1);
}

}  // namespace
}  // namespace decival::traffic
