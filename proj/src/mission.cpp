#include "pollisim/mission.hpp"

#include <algorithm>
#include <cmath>

namespace pollisim {

const char* to_string(MissionPhase phase) {
  switch (phase) {
    case MissionPhase::kInit: return "init";
    case MissionPhase::kInspect: return "inspect";
    case MissionPhase::kSelectCell: return "select_cell";
    case MissionPhase::kDrive: return "drive";
    case MissionPhase::kWorkspaceSurvey: return "workspace_survey";
    case MissionPhase::kPollinateSequence: return "pollinate_sequence";
    case MissionPhase::kDone: return "done";
  }
  return "?";
}

MissionReport summarize(const MissionMetrics& metrics, const FlowerDatabase&) {
  MissionReport report;
  report.metrics = metrics;
  report.pollination_rate =
      metrics.ready_total > 0
          ? static_cast<double>(metrics.pollinated) / metrics.ready_total
          : 1.0;
  return report;
}

namespace {

Eigen::Matrix3d diag_info(double sx, double sy, double st) {
  return Eigen::Vector3d(1.0 / (sx * sx), 1.0 / (sy * sy), 1.0 / (st * st)).asDiagonal();
}

std::optional<GridCell> nearest_free_cell(const OccupancyGrid& grid, const Vec2& p,
                                          int search_radius) {
  int ix, iy;
  if (!grid.world_to_cell(p, ix, iy)) return std::nullopt;
  for (int r = 0; r <= search_radius; ++r) {
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
        const int nx = ix + dx, ny = iy + dy;
        if (grid.in_bounds(nx, ny) && grid.at(nx, ny) == CellState::kFree)
          return GridCell{nx, ny};
      }
    }
  }
  return std::nullopt;
}

}  // namespace

Mission::Mission(const Scenario& scenario)
    : scenario_(scenario),
      world_(build_world(scenario.world)),
      odom_rng_(scenario.world.seed ^ 0x9e3779b97f4a7c15ull),
      scan_rng_(scenario.world.seed ^ 0xbf58476d1ce4e5b9ull),
      detect_rng_(scenario.world.seed ^ 0x94d049bb133111ebull),
      survey_rng_(scenario.world.seed ^ 0x2545f4914f6cdd1dull),
      servo_rng_(scenario.world.seed ^ 0xd6e8feb86659fd93ull) {
  prev_true_ = world_.robot.pose;
  est_pose_ = Pose2{};
  // Prior map sampled densely; point-to-point ICP accuracy tracks spacing.
  prior_map_ = sample_boundary_points(scenario_.world, 0.02);
}

MissionMetrics Mission::metrics() const {
  MissionMetrics m;
  m.distance_driven = distance_driven_;
  m.sim_time = world_.time;
  m.pollinated = pollinated_;
  m.attempted = attempted_;
  m.collisions = collisions_;
  m.phase_duration = phase_duration_;
  m.pose_rmse = pose_err_samples_ > 0
                    ? std::sqrt(pose_err_sq_sum_ / static_cast<double>(pose_err_samples_))
                    : 0.0;
  int ready_total = 0;
  for (const Flower& f : world_.flowers) ready_total += f.was_ready ? 1 : 0;
  m.ready_total = ready_total;
  return m;
}

void Mission::run() {
  while (!done() && world_.time < scenario_.mission.max_time) tick();
}

void Mission::enter_phase(MissionPhase next) {
  phase_ = next;
}

void Mission::tick() {
  if (done()) return;
  switch (phase_) {
    case MissionPhase::kInit: tick_init(); break;
    case MissionPhase::kInspect: tick_inspect(); break;
    case MissionPhase::kSelectCell: tick_select_cell(); break;
    case MissionPhase::kDrive: tick_drive(); break;
    case MissionPhase::kWorkspaceSurvey: tick_survey(); break;
    case MissionPhase::kPollinateSequence: tick_pollinate(); break;
    case MissionPhase::kDone: break;
  }
}

void Mission::tick_init() {
  const auto ranges = simulate_scan(world_, world_.robot.pose, scenario_.world.scan_spec,
                                    scan_rng_);
  const PointCloud2 local = scan_to_points(ranges, scenario_.world.scan_spec);

  Pose2 initial;
  bool located = false;
  OffsetParams offset = scenario_.slam.offset;
  for (int attempt = 0; attempt < 2 && !located; ++attempt) {
    try {
      initial = estimate_initial_offset(local, prior_map_, offset);
      located = true;
    } catch (const NoAlignmentError&) {
      ++init_attempts_;
      offset.n_starts *= 2;
      offset.translation_grid += 1;
    }
  }
  if (!located) initial = Pose2{};  // drive on dead reckoning from the origin

  graph_ = FactorGraph{};
  graph_.add_node();
  graph_.anchors.push_back({0, initial, diag_info(0.01, 0.01, 0.01)});
  node_est_ = {initial};
  accum_rel_ = Pose2{};
  accum_dist_ = accum_angle_ = 0.0;
  steps_since_kf_ = 0;
  est_pose_ = initial;

  grid_ = planning_grid(scenario_.world, scenario_.slam.grid_resolution);
  inflated_ = inflate(grid_, scenario_.world.robot.radius + scenario_.slam.inflate_margin);
  plan_grid_ = inflate(grid_, scenario_.world.robot.radius + scenario_.slam.inflate_margin +
                                  scenario_.planning.plan_margin);
  dist_field_.emplace(inflated_);
  voronoi_ = build_voronoi(grid_, row_faces(scenario_.world.rows),
                           scenario_.world.parking_offset);

  const int start_node = voronoi_.nearest_node(est_pose_.position());
  const InspectionRoute route = plan_inspection(voronoi_, start_node);
  waypoints_.clear();
  if (route.node_path.size() > 1) {  // an empty requirement needs no driving
    for (std::size_t i = 0; i < route.node_path.size(); i += 2)
      waypoints_.push_back(voronoi_.nodes[route.node_path[i]]);
    waypoints_.push_back(voronoi_.nodes[route.node_path.back()]);
  }
  waypoint_idx_ = 0;
  db_.cells.begin_pass();

  enter_phase(MissionPhase::kInspect);
  advance_world({0.0, 0.0});
}

void Mission::ingest_detections() {
  const auto events = simulate_cluster_detections(world_, world_.robot.pose,
                                                  scenario_.world.camera_spec, detect_rng_);
  std::map<GridCellRef, int> frame_counts;
  const double georef_range = scenario_.world.camera_spec.reliable_range + 0.5;
  for (const DetectionEvent& ev : events) {
    const auto cell = bearing_to_cell(est_pose_, scenario_.world.camera_spec.height,
                                      ev.bearing, scenario_.world.rows, georef_range);
    if (cell) ++frame_counts[*cell];
  }
  for (const auto& [cell, count] : frame_counts)
    update_cell_map(db_.cells, cell, count, world_.time);
}

VelocityCommand Mission::follow_waypoints() {
  // Advance past waypoints already within the lookahead.
  while (waypoint_idx_ + 1 < waypoints_.size() &&
         (waypoints_[waypoint_idx_] - est_pose_.position()).norm() <
             scenario_.mission.goal_lookahead)
    ++waypoint_idx_;
  // Carrot: the farthest upcoming waypoint still in line of sight, so the
  // heading target never points through an inflated corner.
  Vec2 goal = waypoints_[waypoint_idx_];
  for (std::size_t i = waypoint_idx_; i > 0; --i) {
    if (line_free(inflated_, est_pose_.position(), waypoints_[i])) {
      goal = waypoints_[i];
      break;
    }
    if (i == 1) goal = waypoints_[0];
  }
  RobotState state;
  state.pose = est_pose_;
  state.v = last_cmd_.v;
  state.omega = last_cmd_.omega;
  return dwa_step(state, goal, *dist_field_, scenario_.planning.dwa);
}

VelocityCommand Mission::dock_at(const Pose2& goal) {
  const Vec2 d = goal.position() - est_pose_.position();
  const double dist = d.norm();
  if (dist > scenario_.mission.arrival_pos_tol) {
    const double bearing = wrap_angle(std::atan2(d.y, d.x) - est_pose_.theta);
    if (std::abs(bearing) > 0.3)
      return {0.0, std::clamp(2.0 * bearing, -scenario_.world.robot.omega_max,
                              scenario_.world.robot.omega_max)};
    return {std::min(0.8 * dist + 0.02, scenario_.world.robot.v_max),
            std::clamp(2.0 * bearing, -1.0, 1.0)};
  }
  const double herr = wrap_angle(goal.theta - est_pose_.theta);
  return {0.0, std::clamp(2.0 * herr, -scenario_.world.robot.omega_max,
                          scenario_.world.robot.omega_max)};
}

void Mission::tick_inspect() {
  ingest_detections();
  VelocityCommand cmd{0.0, 0.0};
  const bool at_end = waypoints_.empty() ||
                      (waypoint_idx_ + 1 >= waypoints_.size() &&
                       (waypoints_.back() - est_pose_.position()).norm() < 0.3);
  if (at_end) {
    enter_phase(MissionPhase::kSelectCell);
  } else {
    cmd = follow_waypoints();
  }
  advance_world(cmd);
}

bool Mission::plan_drive_to(const GridCellRef& cell) {
  const Pose2 park = world_.parking_pose(cell);
  const auto start = nearest_free_cell(plan_grid_, est_pose_.position(), 8);
  const auto goal = nearest_free_cell(plan_grid_, park.position(), 4);
  if (!start || !goal) return false;
  std::vector<GridCell> path;
  try {
    path = dijkstra_path(plan_grid_, *start, *goal);
  } catch (const NoPathError&) {
    return false;
  } catch (const BlockedEndpointError&) {
    return false;
  }
  waypoints_.clear();
  for (std::size_t i = 0; i < path.size(); i += 2)
    waypoints_.push_back(plan_grid_.cell_center(path[i].ix, path[i].iy));
  waypoints_.push_back(park.position());
  waypoint_idx_ = 0;
  target_cell_ = cell;
  target_parking_ = park;
  return true;
}

void Mission::tick_select_cell() {
  std::vector<CandidateCell> candidates;
  for (const auto& [cell, obs] : db_.cells.cells) {
    if (obs.observed_count <= 0 || finished_cells_.count(cell)) continue;
    candidates.push_back({cell, world_.parking_pose(cell), obs.observed_count});
  }

  GridCellRef chosen;
  try {
    chosen = next_pollination_cell(est_pose_, candidates, scenario_.planning.cost).cell;
  } catch (const NoCandidatesError&) {
    enter_phase(MissionPhase::kDone);
    advance_world({0.0, 0.0});
    return;
  }

  if (plan_drive_to(chosen)) {
    plan_failures_.erase(chosen);
    enter_phase(MissionPhase::kDrive);
  } else if (++plan_failures_[chosen] >= 2) {
    finished_cells_.insert(chosen);  // one retry, then the cell is skipped
  }
  advance_world({0.0, 0.0});
}

void Mission::tick_drive() {
  ingest_detections();

  const double pos_err = (target_parking_.position() - est_pose_.position()).norm();
  const double heading_err = std::abs(wrap_angle(target_parking_.theta - est_pose_.theta));
  if (pos_err < scenario_.mission.arrival_pos_tol &&
      heading_err < scenario_.mission.arrival_heading_tol) {
    survey_end_time_ = world_.time + scenario_.arm.survey_duration;
    enter_phase(MissionPhase::kWorkspaceSurvey);
    advance_world({0.0, 0.0});
    return;
  }

  VelocityCommand cmd;
  if (pos_err < 0.35) {
    cmd = dock_at(target_parking_);
  } else {
    cmd = follow_waypoints();
  }
  advance_world(cmd);
}

void Mission::finish_cell() {
  db_.cells.cells[target_cell_].observed_count = 0;  // n_f zeroed after the visit
  finished_cells_.insert(target_cell_);
  enter_phase(MissionPhase::kSelectCell);
}

void Mission::start_next_target() {
  const FlowerTarget& target = seq_targets_[seq_plan_.order[seq_pos_]];
  const JointConfig& q = seq_plan_.configs[seq_plan_.order[seq_pos_]];
  servo_ = ServoState{};
  servo_.tip = fk(scenario_.arm.spec, q).position;
  servo_.estimate = to_arm_plane(arm_base_, target.position);
  servo_.regime = (servo_.estimate - servo_.tip).norm() < scenario_.arm.servo.blind_range
                      ? ServoRegime::kEndoscope
                      : ServoRegime::kDepthCamera;
  servo_steps_ = 0;
}

void Mission::tick_survey() {
  if (world_.time < survey_end_time_) {
    advance_world({0.0, 0.0});
    return;
  }
  seq_targets_ = survey_workspace(world_, target_cell_, scenario_.arm.spec,
                                  scenario_.arm.survey_sigma, survey_rng_);
  if (seq_targets_.empty()) {
    finish_cell();
    advance_world({0.0, 0.0});
    return;
  }

  arm_base_ = arm_base_position(scenario_.arm.spec, world_.parking_pose(target_cell_));
  std::vector<PlanarTarget> planar;
  for (const FlowerTarget& t : seq_targets_)
    planar.push_back({t.flower_id, to_arm_plane(arm_base_, t.position)});

  try {
    seq_plan_ = planar.size() <= 9
                    ? plan_sequence_exact(planar, scenario_.arm.spec, q_home_)
                    : plan_sequence_nn(planar, scenario_.arm.spec, q_home_);
  } catch (const std::runtime_error&) {
    finish_cell();  // nothing reachable in joint space, move on
    advance_world({0.0, 0.0});
    return;
  }
  seq_pos_ = 0;
  start_next_target();
  enter_phase(MissionPhase::kPollinateSequence);
  advance_world({0.0, 0.0});
}

void Mission::tick_pollinate() {
  const FlowerTarget& target = seq_targets_[seq_plan_.order[seq_pos_]];
  Flower* flower = nullptr;
  for (Flower& f : world_.flowers)
    if (f.id == target.flower_id) flower = &f;

  bool attempt_over = false;
  bool success = false;

  if (flower == nullptr || flower->state != FlowerState::kReady) {
    attempt_over = true;  // wilted (or already pollinated) while we approached
  } else if (!servo_.converged) {
    if (servo_steps_ >= scenario_.arm.max_servo_steps) {
      attempt_over = true;
    } else {
      const Vec2 true_plane = to_arm_plane(arm_base_, flower->position);
      servo_ = servo_step(servo_, true_plane, scenario_.arm.servo, servo_rng_);
      ++servo_steps_;
    }
  } else {
    try {
      pollinate(effector_, *flower, scenario_.arm.strokes, scenario_.arm.pollinate,
                world_.time);
      success = flower->state == FlowerState::kPollinated;
    } catch (const NotReadyError&) {
      success = false;
    }
    attempt_over = true;
  }

  if (attempt_over) {
    ++attempted_;
    if (success) ++pollinated_;
    db_.attempts.push_back({target.flower_id, target_cell_, world_.time, success});
    auto& obs = db_.cells.cells[target_cell_];
    if (success) ++obs.pollinated_count;
    ++seq_pos_;
    if (seq_pos_ >= seq_plan_.order.size()) {
      finish_cell();
    } else {
      start_next_target();
    }
  }
  advance_world({0.0, 0.0});
}

void Mission::advance_world(const VelocityCommand& cmd) {
  const Pose2 before = world_.robot.pose;
  step(world_, cmd.v, cmd.omega, scenario_.mission.dt);
  last_cmd_ = {world_.robot.v, world_.robot.omega};

  const Pose2 after = world_.robot.pose;
  distance_driven_ += (after.position() - before.position()).norm();
  collisions_ += world_.collided ? 1 : 0;
  phase_duration_[phase_] += scenario_.mission.dt;

  const bool moved = (after.position() - before.position()).norm() > 1e-12 ||
                     std::abs(wrap_angle(after.theta - before.theta)) > 1e-12;
  Pose2 rel{};
  if (moved)
    rel = simulate_odometry(before, after, scenario_.world.odom_noise, odom_rng_);
  accum_rel_ = compose(accum_rel_, rel);
  accum_dist_ += Vec2{rel.x, rel.y}.norm();
  accum_angle_ += std::abs(rel.theta);
  ++steps_since_kf_;
  prev_true_ = after;

  if (moved && (accum_dist_ >= scenario_.slam.keyframe_dist ||
                accum_angle_ >= scenario_.slam.keyframe_angle))
    add_keyframe();

  est_pose_ = compose(node_est_.back(), accum_rel_);

  pose_err_sq_sum_ += (est_pose_.position() - after.position()).squared_norm();
  ++pose_err_samples_;
  trajectory_.push_back({world_.time, after, phase_});
}

void Mission::add_keyframe() {
  const int node = graph_.add_node();
  const Pose2 initial = compose(node_est_.back(), accum_rel_);

  const double n = std::max(1, steps_since_kf_);
  const double st = std::max(scenario_.world.odom_noise.sigma_trans * std::sqrt(n), 1e-4);
  const double sr = std::max(scenario_.world.odom_noise.sigma_rot * std::sqrt(n), 1e-4);
  graph_.odometry.push_back({node - 1, node, accum_rel_, diag_info(st, st, sr)});

  const auto ranges =
      simulate_scan(world_, world_.robot.pose, scenario_.world.scan_spec, scan_rng_);
  const PointCloud2 local = scan_to_points(ranges, scenario_.world.scan_spec);
  if (local.size() >= 3) {
    try {
      const IcpResult res = icp_match(local, prior_map_, initial, scenario_.slam.icp);
      if (loop_closure_check(res, scenario_.slam.loop_threshold)) {
        const double sp = std::max(res.rms_error, 0.005);
        graph_.anchors.push_back({node, res.transform, diag_info(sp, sp, 0.01)});
      }
    } catch (const IcpDegenerateError&) {
      // drive on odometry until the next keyframe matches
    }
  }

  node_est_.push_back(initial);
  node_est_ = optimize_lm(graph_, node_est_, scenario_.slam.lm).estimate;

  accum_rel_ = Pose2{};
  accum_dist_ = accum_angle_ = 0.0;
  steps_since_kf_ = 0;
}

}  // namespace pollisim
