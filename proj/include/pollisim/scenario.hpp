#pragma once

#include <stdexcept>
#include <string>

#include "pollisim/arm.hpp"
#include "pollisim/planning.hpp"
#include "pollisim/slam.hpp"
#include "pollisim/vision.hpp"
#include "pollisim/world.hpp"

#include <json.hpp>

namespace pollisim {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SlamParams {
  double keyframe_dist{0.25};
  double keyframe_angle{deg2rad(10.0)};
  double loop_threshold{0.8};
  IcpParams icp{40, 0.5, 1e-9};
  double grid_resolution{0.05};
  double inflate_margin{0.05};
  LmParams lm{};
  OffsetParams offset{};
};

struct VisionParams {
  int min_blob{25};
  double patch_tau{0.6};
  int patch_min_area{25};
  int patch_max_area{1000000};
};

struct PlanningParams {
  CostParams cost{};
  DWAParams dwa{};
  double plan_margin{0.1};  // extra inflation for the global planner only
};

struct ArmParams {
  ArmSpec spec{};
  ServoParams servo{};
  PollinateParams pollinate{};
  int strokes{3};
  int max_servo_steps{60};
  double survey_sigma{0.01};
  double survey_duration{2.0};
};

struct MissionParams {
  double dt{0.1};
  double max_time{600.0};
  double arrival_pos_tol{0.05};
  double arrival_heading_tol{deg2rad(5.0)};
  double goal_lookahead{0.6};
};

struct Scenario {
  WorldConfig world;
  SlamParams slam;
  VisionParams vision;
  PlanningParams planning;
  ArmParams arm;
  MissionParams mission;
};

/// Parse a scenario document. Unknown keys anywhere are rejected; the
/// mandatory fields are seed, world.room, world.rows and world.flowers.
Scenario parse_scenario(const nlohmann::json& doc);

Scenario load_scenario(const std::string& path);

/// Full serialization, every default expanded.
nlohmann::json scenario_to_json(const Scenario& scenario);

}  // namespace pollisim
