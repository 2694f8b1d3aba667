#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "pollisim/arm.hpp"

using namespace pollisim;

namespace {

// Independent permutation oracle for sequencing cost.
double oracle_best_cost(const std::vector<JointConfig>& configs, const JointConfig& start) {
  std::vector<int> idx(configs.size());
  std::iota(idx.begin(), idx.end(), 0);
  double best = 1e18;
  do {
    double cost = 0.0;
    JointConfig cur = start;
    for (int i : idx) {
      const double d1 = cur.q1 - configs[i].q1;
      const double d2 = cur.q2 - configs[i].q2;
      const double d3 = cur.q3 - configs[i].q3;
      cost += std::sqrt(d1 * d1 + d2 * d2 + d3 * d3);
      cur = configs[i];
    }
    best = std::min(best, cost);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return best;
}

std::vector<PlanarTarget> random_targets(Rng& rng, const ArmSpec& arm, int n) {
  std::vector<PlanarTarget> targets;
  while (static_cast<int>(targets.size()) < n) {
    const double r = rng.uniform(0.15, arm.reach() * 0.97);
    const double a = rng.uniform(-1.2, 1.2);
    targets.push_back({static_cast<int>(targets.size()),
                       {r * std::cos(a), r * std::sin(a)}});
  }
  return targets;
}

}  // namespace

TEST_SUITE_BEGIN("arm");

TEST_CASE("forward kinematics") {
  const ArmSpec arm;
  SUBCASE("straight arm") {
    const TipPose tip = fk(arm, {0, 0, 0});
    CHECK(tip.position.x == doctest::Approx(0.71));
    CHECK(tip.position.y == doctest::Approx(0.0));
    CHECK(tip.orientation == doctest::Approx(0.0));
  }
  SUBCASE("base joint at ninety degrees") {
    const TipPose tip = fk(arm, {kPi / 2, 0, 0});
    CHECK(tip.position.x == doctest::Approx(0.0));
    CHECK(tip.position.y == doctest::Approx(0.71));
    CHECK(tip.orientation == doctest::Approx(kPi / 2));
  }
  SUBCASE("folded elbow") {
    const TipPose tip = fk(arm, {kPi / 2, -kPi / 2, 0});
    CHECK(tip.position.x == doctest::Approx(0.43));
    CHECK(tip.position.y == doctest::Approx(0.28));
    CHECK(tip.orientation == doctest::Approx(0.0));
  }
}

TEST_CASE("inverse kinematics") {
  const ArmSpec arm;
  SUBCASE("full extension") {
    const JointConfig q = ik(arm, {{0.71, 0.0}, 0.0}, {0.1, 0.3, -0.3});
    const TipPose tip = fk(arm, q);
    CHECK((tip.position - Vec2{0.71, 0.0}).norm() < 1e-4);
    // near the singular full extension a 1e-4 tip tolerance admits small bends
    CHECK(std::abs(q.q1) < 0.05);
    CHECK(std::abs(q.q2) < 0.05);
    CHECK(std::abs(q.q3) < 0.05);
  }
  SUBCASE("beyond reach") {
    CHECK_THROWS_AS(ik(arm, {{0.9, 0.0}, std::nullopt}, {0, 0, 0}),
                    TargetUnreachableError);
  }
  SUBCASE("random reachable targets round-trip through fk") {
    Rng rng(41);
    for (int i = 0; i < 200; ++i) {
      JointConfig q{rng.uniform(-kPi, kPi), rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5)};
      const Vec2 target = fk(arm, q).position;
      const JointConfig sol =
          ik_multistart(arm, {target, std::nullopt}, {std::atan2(target.y, target.x), 0.3, -0.3});
      CHECK((fk(arm, sol).position - target).norm() < 1e-4);
      CHECK(sol.q1 >= arm.joint_limits[0][0]);
      CHECK(sol.q1 <= arm.joint_limits[0][1]);
    }
  }
}

TEST_CASE("workspace survey") {
  WorldConfig cfg;
  cfg.room_width = 8.0;
  cfg.room_length = 6.0;
  PlantRow row;
  row.id = 0;
  row.start = {2.0, 3.0};
  row.end = {5.44, 3.0};
  row.half_width = 0.25;
  cfg.rows.push_back(row);
  const ArmSpec arm;

  SUBCASE("no ready flowers yields an empty list") {
    cfg.flowers.push_back({1, {2.2, 3.1, 0.5}, 50.0, 100.0});  // still a bud
    const World w = build_world(cfg);
    Rng rng(1);
    CHECK(survey_workspace(w, {0, Side::kLeft, 0}, arm, 0.0, rng).empty());
  }
  SUBCASE("flowers out of reach are excluded") {
    cfg.flowers.push_back({1, {2.2, 3.1, 1.6}, 0.0, 100.0});  // 1.1 m above the base
    const World w = build_world(cfg);
    Rng rng(1);
    const GridCellRef cell = w.flowers[0].cell;
    const Vec3 base = arm_base_position(arm, w.parking_pose(cell));
    CHECK((w.flowers[0].position - base).norm() > arm.reach());
    CHECK(survey_workspace(w, cell, arm, 0.0, rng).empty());
  }
  SUBCASE("zero noise returns ground-truth positions") {
    cfg.flowers.push_back({1, {2.2, 3.1, 0.5}, 0.0, 100.0});
    const World w = build_world(cfg);
    Rng rng(1);
    const auto targets = survey_workspace(w, w.flowers[0].cell, arm, 0.0, rng);
    REQUIRE(targets.size() == 1);
    CHECK(targets[0].position.x == 2.2);
    CHECK(targets[0].position.y == 3.1);
    CHECK(targets[0].position.z == 0.5);
  }
}

TEST_CASE("exact sequencing") {
  const ArmSpec arm;
  const JointConfig home{0, 0.5, -0.5};

  SUBCASE("single target") {
    const std::vector<PlanarTarget> targets{{7, {0.4, 0.1}}};
    const SequencePlan plan = plan_sequence_exact(targets, arm, home);
    CHECK(plan.order == std::vector<int>{0});
  }
  SUBCASE("cap at nine targets") {
    Rng rng(42);
    const auto targets = random_targets(rng, arm, 10);
    CHECK_THROWS_AS(plan_sequence_exact(targets, arm, home), TooManyTargetsError);
  }
  SUBCASE("matches the permutation oracle on seeded instances") {
    for (int seed = 0; seed < 30; ++seed) {
      Rng rng(2000 + seed);
      const auto targets = random_targets(rng, arm, 3 + seed % 6);
      const SequencePlan plan = plan_sequence_exact(targets, arm, home);
      CHECK(plan.total_cost == doctest::Approx(oracle_best_cost(plan.configs, home)));
      // order is a permutation
      std::vector<int> sorted = plan.order;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == static_cast<int>(i));
    }
  }
}

TEST_CASE("nearest-neighbor sequencing") {
  const ArmSpec arm;
  const JointConfig home{0, 0.5, -0.5};

  SUBCASE("single target matches exact") {
    const std::vector<PlanarTarget> targets{{3, {0.3, -0.2}}};
    const SequencePlan nn = plan_sequence_nn(targets, arm, home);
    const SequencePlan exact = plan_sequence_exact(targets, arm, home);
    CHECK(nn.order == exact.order);
    CHECK(nn.total_cost == doctest::Approx(exact.total_cost));
  }
  SUBCASE("never beats the enumeration and sometimes loses to it") {
    bool found_strict = false;
    for (int seed = 0; seed < 60; ++seed) {
      Rng rng(3000 + seed);
      const auto targets = random_targets(rng, arm, 4);
      const SequencePlan nn = plan_sequence_nn(targets, arm, home);
      const SequencePlan exact = plan_sequence_exact(targets, arm, home);
      CHECK(nn.total_cost >= exact.total_cost - 1e-9);
      if (nn.total_cost > exact.total_cost + 1e-6) {
        found_strict = true;
        CHECK(exact.total_cost == doctest::Approx(oracle_best_cost(exact.configs, home)));
      }
    }
    CHECK(found_strict);  // greedy is suboptimal on at least one instance
  }
  SUBCASE("cost ratio stays under two on random instances") {
    for (int seed = 0; seed < 40; ++seed) {
      Rng rng(4000 + seed);
      const auto targets = random_targets(rng, arm, 3 + seed % 6);
      const SequencePlan nn = plan_sequence_nn(targets, arm, home);
      const SequencePlan exact = plan_sequence_exact(targets, arm, home);
      CHECK(nn.total_cost <= 2.0 * exact.total_cost + 1e-9);
    }
  }
}

TEST_CASE("visual servoing") {
  ServoParams params;
  params.sigma0 = 0.0;
  params.sigma_endo = 0.0;
  Rng rng(5);
  const Vec2 flower{0.5, 0.2};

  SUBCASE("full step converges immediately") {
    params.alpha = 1.0;
    ServoState s;
    s.tip = {0.1, 0.0};
    s.estimate = s.tip;
    const ServoState next = servo_step(s, flower, params, rng);
    CHECK(next.converged);
    CHECK((next.tip - flower).norm() < 1e-12);
  }
  SUBCASE("half steps converge in seven steps from 0.4 m") {
    params.alpha = 0.5;
    ServoState s;
    s.tip = {flower.x - 0.4, flower.y};
    s.estimate = s.tip;
    int steps = 0;
    while (!s.converged) {
      s = servo_step(s, flower, params, rng);
      ++steps;
      REQUIRE(steps < 50);
    }
    CHECK(steps == 7);
  }
  SUBCASE("regime switches below the blind-drive range") {
    params.alpha = 0.2;
    ServoState s;
    s.tip = {flower.x - 0.20, flower.y};
    s.estimate = s.tip;
    CHECK(s.regime == ServoRegime::kDepthCamera);
    const ServoState next = servo_step(s, flower, params, rng);
    CHECK((next.tip - flower).norm() < 0.18);
    CHECK(next.regime == ServoRegime::kEndoscope);
  }
  SUBCASE("regime always reflects the tip-to-estimate distance") {
    params.sigma0 = 0.05;
    params.alpha = 0.4;
    ServoState s;
    s.tip = {0.0, 0.0};
    s.estimate = s.tip;
    for (int i = 0; i < 30; ++i) {
      s = servo_step(s, flower, params, rng);
      const bool close = (s.estimate - s.tip).norm() < params.blind_range;
      CHECK((s.regime == ServoRegime::kEndoscope) == close);
    }
  }
}

TEST_CASE("pollination strokes") {
  Flower flower;
  flower.id = 3;
  flower.state = FlowerState::kReady;
  const PollinateParams params;  // delta 0.3, threshold 0.8

  SUBCASE("three strokes pollinate") {
    EndEffectorState eff;
    pollinate(eff, flower, 3, params, 12.0);
    CHECK(flower.pistil_coverage == doctest::Approx(0.9));
    CHECK(flower.state == FlowerState::kPollinated);
    CHECK(flower.pollinated_time == 12.0);
  }
  SUBCASE("two strokes leave the flower ready") {
    EndEffectorState eff;
    pollinate(eff, flower, 2, params, 12.0);
    CHECK(flower.pistil_coverage == doctest::Approx(0.6));
    CHECK(flower.state == FlowerState::kReady);
  }
  SUBCASE("wilted flowers are rejected untouched") {
    flower.state = FlowerState::kWilted;
    flower.pistil_coverage = 0.1;
    EndEffectorState eff;
    CHECK_THROWS_AS(pollinate(eff, flower, 3, params, 12.0), NotReadyError);
    CHECK(flower.pistil_coverage == 0.1);
  }
  SUBCASE("coverage is monotone and capped at one") {
    EndEffectorState eff;
    double last = 0.0;
    flower.state = FlowerState::kReady;
    for (int i = 0; i < 3; ++i) {
      flower.state = FlowerState::kReady;  // keep stroking past the threshold
      pollinate(eff, flower, 2, params, 12.0 + i);
      CHECK(flower.pistil_coverage >= last);
      CHECK(flower.pistil_coverage <= 1.0);
      last = flower.pistil_coverage;
    }
    CHECK(flower.pistil_coverage == 1.0);
  }
}

TEST_SUITE_END();
