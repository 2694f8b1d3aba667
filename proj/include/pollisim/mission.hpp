#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "pollisim/arm.hpp"
#include "pollisim/planning.hpp"
#include "pollisim/scenario.hpp"
#include "pollisim/slam.hpp"
#include "pollisim/vision.hpp"
#include "pollisim/world.hpp"

namespace pollisim {

enum class MissionPhase {
  kInit,
  kInspect,
  kSelectCell,
  kDrive,
  kWorkspaceSurvey,
  kPollinateSequence,
  kDone,
};

const char* to_string(MissionPhase phase);

struct AttemptRecord {
  int flower_id{0};
  GridCellRef cell;
  double time{0.0};
  bool success{false};
};

struct FlowerDatabase {
  CellFlowerMap cells;
  std::vector<AttemptRecord> attempts;
};

struct MissionMetrics {
  double distance_driven{0.0};
  double sim_time{0.0};
  int pollinated{0};
  int attempted{0};
  int ready_total{0};
  int collisions{0};
  double pose_rmse{0.0};
  std::map<MissionPhase, double> phase_duration;
};

struct MissionReport {
  MissionMetrics metrics;
  double pollination_rate{1.0};  // pollinated / ever-ready, 1 when none were ready
};

MissionReport summarize(const MissionMetrics& metrics, const FlowerDatabase& db);

struct TrajectorySample {
  double t{0.0};
  Pose2 pose;  // ground truth
  MissionPhase phase{MissionPhase::kInit};
};

/// The session executive: one inspection pass, then greedy cell visits until
/// no candidates remain. Owns the world and all mutable state; planners see
/// pose estimates, sensors see ground truth.
class Mission {
 public:
  explicit Mission(const Scenario& scenario);

  void tick();
  /// Ticks until Done or the configured max time.
  void run();

  bool done() const { return phase_ == MissionPhase::kDone; }
  MissionPhase phase() const { return phase_; }
  const World& world() const { return world_; }
  const FlowerDatabase& database() const { return db_; }
  const std::vector<TrajectorySample>& trajectory() const { return trajectory_; }
  const VoronoiGraph& roadmap() const { return voronoi_; }
  Pose2 estimated_pose() const { return est_pose_; }
  MissionMetrics metrics() const;
  const Scenario& scenario() const { return scenario_; }
  const std::vector<Vec2>& current_waypoints() const { return waypoints_; }
  std::size_t current_waypoint_index() const { return waypoint_idx_; }
  GridCellRef current_target_cell() const { return target_cell_; }
  const OccupancyGrid& inflated_grid() const { return inflated_; }

 private:
  void tick_init();
  void tick_inspect();
  void tick_select_cell();
  void tick_drive();
  void tick_survey();
  void tick_pollinate();

  void enter_phase(MissionPhase next);
  void advance_world(const VelocityCommand& cmd);
  void add_keyframe();
  void ingest_detections();
  VelocityCommand follow_waypoints();
  VelocityCommand dock_at(const Pose2& goal);
  bool plan_drive_to(const GridCellRef& cell);
  void finish_cell();
  void start_next_target();

  Scenario scenario_;
  World world_;
  Rng odom_rng_;
  Rng scan_rng_;
  Rng detect_rng_;
  Rng survey_rng_;
  Rng servo_rng_;

  MissionPhase phase_{MissionPhase::kInit};
  FlowerDatabase db_;
  std::vector<TrajectorySample> trajectory_;

  // prior knowledge and plans
  PointCloud2 prior_map_;
  OccupancyGrid grid_;
  OccupancyGrid inflated_;   // robot radius + margin: DWA collision space
  OccupancyGrid plan_grid_;  // wider margin for the global planner
  std::optional<DistanceField> dist_field_;
  VoronoiGraph voronoi_;

  // state estimation
  FactorGraph graph_;
  std::vector<Pose2> node_est_;
  Pose2 prev_true_;
  Pose2 accum_rel_;
  double accum_dist_{0.0};
  double accum_angle_{0.0};
  int steps_since_kf_{0};
  Pose2 est_pose_;

  // driving
  std::vector<Vec2> waypoints_;
  std::size_t waypoint_idx_{0};
  VelocityCommand last_cmd_;

  // current cell work
  GridCellRef target_cell_;
  Pose2 target_parking_;
  std::map<GridCellRef, int> plan_failures_;
  std::set<GridCellRef> finished_cells_;
  double survey_end_time_{0.0};

  // arm sequence
  std::vector<FlowerTarget> seq_targets_;
  SequencePlan seq_plan_;
  std::size_t seq_pos_{0};
  Vec3 arm_base_;
  ServoState servo_;
  int servo_steps_{0};
  EndEffectorState effector_;
  JointConfig q_home_{0.0, 0.6, -0.6};

  // metrics
  double distance_driven_{0.0};
  int collisions_{0};
  double pose_err_sq_sum_{0.0};
  long pose_err_samples_{0};
  std::map<MissionPhase, double> phase_duration_;
  int pollinated_{0};
  int attempted_{0};
  int init_attempts_{0};
};

}  // namespace pollisim
