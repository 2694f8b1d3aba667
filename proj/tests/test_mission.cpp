#include <doctest.h>

#include <map>
#include <set>
#include <vector>

#include "pollisim/mission.hpp"

using namespace pollisim;

namespace {

Scenario empty_scenario() {
  Scenario s;
  s.world.room_width = 6.0;
  s.world.room_length = 5.0;
  s.world.seed = 7;
  s.world.robot.start_pose = {2.0, 2.0, 0.0};
  s.mission.max_time = 60.0;
  return s;
}

Scenario one_row_scenario() {
  Scenario s;
  s.world.room_width = 8.0;
  s.world.room_length = 4.4;
  s.world.seed = 13;
  s.world.robot.start_pose = {1.0, 0.9, 0.5};
  s.world.robot.v_max = 0.8;
  PlantRow row;
  row.id = 0;
  row.start = {2.0, 2.2};
  row.end = {5.44, 2.2};
  row.half_width = 0.25;
  s.world.rows.push_back(row);
  s.world.odom_noise = {0.003, 0.001};
  s.world.scan_spec = {360, 2.0 * kPi, 12.0, 0.01};
  s.world.camera_spec = {1.5, 2.5, 1.0, 0.0, 0.005, 0.5};
  s.mission.max_time = 240.0;
  return s;
}

std::vector<MissionPhase> phase_sequence(const Mission& mission) {
  std::vector<MissionPhase> seq{MissionPhase::kInit};
  for (const TrajectorySample& s : mission.trajectory())
    if (s.phase != seq.back()) seq.push_back(s.phase);
  return seq;
}

bool transition_allowed(MissionPhase from, MissionPhase to) {
  using P = MissionPhase;
  static const std::set<std::pair<P, P>> allowed{
      {P::kInit, P::kInspect},
      {P::kInspect, P::kSelectCell},
      {P::kSelectCell, P::kDrive},
      {P::kSelectCell, P::kDone},
      {P::kDrive, P::kWorkspaceSurvey},
      {P::kWorkspaceSurvey, P::kPollinateSequence},
      {P::kWorkspaceSurvey, P::kSelectCell},
      {P::kPollinateSequence, P::kSelectCell},
  };
  return allowed.count({from, to}) > 0;
}

}  // namespace

TEST_SUITE_BEGIN("mission");

TEST_CASE("empty world runs init, inspect, select, done") {
  Mission m(empty_scenario());
  m.run();
  REQUIRE(m.done());
  const auto seq = phase_sequence(m);
  CHECK(seq == std::vector<MissionPhase>{MissionPhase::kInit, MissionPhase::kInspect,
                                         MissionPhase::kSelectCell, MissionPhase::kDone});
  const MissionReport report = summarize(m.metrics(), m.database());
  CHECK(report.metrics.pollinated == 0);
  CHECK(report.metrics.ready_total == 0);
  CHECK(report.pollination_rate == 1.0);
}

TEST_CASE("single ready flower: one drive, one attempt, then done") {
  Scenario s = one_row_scenario();
  // one flower in cell 2 on the left side, ready from the start
  s.world.flowers.push_back({5, {2.0 + 2.5 * 0.688, 2.33, 0.5}, 0.0, 1e9});
  Mission m(s);
  m.run();
  REQUIRE(m.done());

  const auto seq = phase_sequence(m);
  for (std::size_t i = 1; i < seq.size(); ++i) CHECK(transition_allowed(seq[i - 1], seq[i]));
  int drives = 0;
  for (const MissionPhase p : seq) drives += p == MissionPhase::kDrive ? 1 : 0;
  CHECK(drives == 1);

  REQUIRE(m.database().attempts.size() == 1);
  CHECK(m.database().attempts[0].flower_id == 5);
  CHECK(m.database().attempts[0].cell == GridCellRef{0, Side::kLeft, 2});
  CHECK(m.database().attempts[0].success);
  CHECK(m.world().flowers[0].state == FlowerState::kPollinated);
  CHECK(m.metrics().pollinated == 1);
  CHECK(summarize(m.metrics(), m.database()).pollination_rate == 1.0);
}

TEST_CASE("flowers that wilt before arrival cost no attempts") {
  Scenario s = one_row_scenario();
  // ready immediately, wilts long before the robot can finish inspecting
  s.world.flowers.push_back({5, {2.0 + 2.5 * 0.688, 2.33, 0.5}, 0.0, 12.0});
  Mission m(s);
  m.run();
  REQUIRE(m.done());
  CHECK(m.database().attempts.empty());
  CHECK(m.metrics().attempted == 0);
  CHECK(m.world().flowers[0].state == FlowerState::kWilted);
  CHECK(m.metrics().ready_total == 1);
  CHECK(summarize(m.metrics(), m.database()).pollination_rate == 0.0);
}

TEST_CASE("phase transitions obey the automaton on a multi-flower run") {
  Scenario s = one_row_scenario();
  s.world.flowers.push_back({0, {2.2, 2.3, 0.45}, 0.0, 1e9});
  s.world.flowers.push_back({1, {2.4, 2.1, 0.5}, 5.0, 1e9});
  s.world.flowers.push_back({2, {4.5, 2.32, 0.55}, 8.0, 1e9});
  s.world.flowers.push_back({3, {4.6, 2.28, 0.5}, 0.0, 1e9});
  Mission m(s);
  m.run();
  REQUIRE(m.done());
  const auto seq = phase_sequence(m);
  for (std::size_t i = 1; i < seq.size(); ++i) {
    CAPTURE(static_cast<int>(seq[i - 1]));
    CAPTURE(static_cast<int>(seq[i]));
    CHECK(transition_allowed(seq[i - 1], seq[i]));
  }
  CHECK(m.metrics().pollinated == 4);

  // no flower is attempted after it was pollinated
  std::map<int, int> attempts_by_flower;
  for (const AttemptRecord& a : m.database().attempts) ++attempts_by_flower[a.flower_id];
  for (const auto& [id, count] : attempts_by_flower) CHECK(count == 1);
}

TEST_CASE("identical scenario and seed replay bit-exactly") {
  Scenario s = one_row_scenario();
  s.world.flowers.push_back({0, {2.2, 2.3, 0.45}, 0.0, 1e9});
  s.world.flowers.push_back({1, {4.5, 2.1, 0.5}, 3.0, 1e9});

  Mission a(s), b(s);
  a.run();
  b.run();
  REQUIRE(a.trajectory().size() == b.trajectory().size());
  for (std::size_t i = 0; i < a.trajectory().size(); ++i) {
    CHECK(a.trajectory()[i].pose.x == b.trajectory()[i].pose.x);
    CHECK(a.trajectory()[i].pose.y == b.trajectory()[i].pose.y);
    CHECK(a.trajectory()[i].pose.theta == b.trajectory()[i].pose.theta);
    CHECK(a.trajectory()[i].phase == b.trajectory()[i].phase);
  }
  CHECK(a.metrics().distance_driven == b.metrics().distance_driven);
  CHECK(a.metrics().pose_rmse == b.metrics().pose_rmse);
  CHECK(a.database().attempts.size() == b.database().attempts.size());
}

TEST_CASE("distance metric matches reintegration of the trajectory") {
  Scenario s = one_row_scenario();
  s.world.flowers.push_back({0, {2.2, 2.3, 0.45}, 0.0, 1e9});
  Mission m(s);
  m.run();
  double distance = 0.0;
  const auto& traj = m.trajectory();
  for (std::size_t i = 1; i < traj.size(); ++i)
    distance += (traj[i].pose.position() - traj[i - 1].pose.position()).norm();
  // the first sample is after the first step; add the leg from the start pose
  distance += (traj[0].pose.position() - s.world.robot.start_pose.position()).norm();
  CHECK(std::abs(distance - m.metrics().distance_driven) < 1e-6);
}

TEST_CASE("summary conventions") {
  MissionMetrics metrics;
  metrics.ready_total = 0;
  metrics.pollinated = 0;
  CHECK(summarize(metrics, {}).pollination_rate == 1.0);
  metrics.ready_total = 10;
  metrics.pollinated = 9;
  CHECK(summarize(metrics, {}).pollination_rate == doctest::Approx(0.9));
}

TEST_SUITE_END();
