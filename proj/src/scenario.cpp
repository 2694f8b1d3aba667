#include "pollisim/scenario.hpp"

#include <fstream>
#include <set>

namespace pollisim {

using nlohmann::json;

namespace {

/// Wrapper that records consumed keys and rejects leftovers.
class Strict {
 public:
  Strict(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + ": expected an object");
  }
  ~Strict() = default;

  bool has(const std::string& key) {
    return j_.contains(key);
  }

  const json& required(const std::string& key) {
    if (!j_.contains(key)) throw ValidationError(path_ + ": missing required key '" + key + "'");
    used_.insert(key);
    return j_.at(key);
  }

  const json* optional(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    used_.insert(key);
    return &j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (const json* v = optional(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        throw ValidationError(path_ + "." + key + ": wrong type");
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key))
        throw ValidationError(path_ + ": unknown key '" + key + "'");
    }
  }

  std::string path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

Vec2 parse_vec2(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw ValidationError(path + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 parse_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(path + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Pose2 parse_pose(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(path + ": expected [x, y, theta]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void parse_world(const json& j, WorldConfig& world) {
  Strict w(j, "world");
  {
    Strict room(w.required("room"), "world.room");
    room.get("width", world.room_width);
    room.get("length", world.room_length);
    room.finish();
  }
  {
    const json& rows = w.required("rows");
    if (!rows.is_array()) throw ValidationError("world.rows: expected an array");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string path = "world.rows[" + std::to_string(i) + "]";
      Strict r(rows[i], path);
      PlantRow row;
      row.id = static_cast<int>(i);
      r.get("id", row.id);
      row.start = parse_vec2(r.required("start"), path + ".start");
      row.end = parse_vec2(r.required("end"), path + ".end");
      r.get("half_width", row.half_width);
      r.get("cells_per_side", row.cells_per_side);
      r.finish();
      world.rows.push_back(row);
    }
  }
  {
    const json& flowers = w.required("flowers");
    if (!flowers.is_array()) throw ValidationError("world.flowers: expected an array");
    for (std::size_t i = 0; i < flowers.size(); ++i) {
      const std::string path = "world.flowers[" + std::to_string(i) + "]";
      Strict f(flowers[i], path);
      FlowerSpec spec;
      spec.id = static_cast<int>(i);
      f.get("id", spec.id);
      spec.position = parse_vec3(f.required("position"), path + ".position");
      f.get("ready_time", spec.ready_time);
      f.get("wilt_time", spec.wilt_time);
      f.finish();
      world.flowers.push_back(spec);
    }
  }
  if (const json* robot = w.optional("robot")) {
    Strict r(*robot, "world.robot");
    r.get("radius", world.robot.radius);
    r.get("v_max", world.robot.v_max);
    r.get("omega_max", world.robot.omega_max);
    r.get("accel_v", world.robot.accel_v);
    r.get("accel_omega", world.robot.accel_omega);
    if (const json* pose = r.optional("start_pose"))
      world.robot.start_pose = parse_pose(*pose, "world.robot.start_pose");
    r.finish();
  }
  w.get("parking_offset", world.parking_offset);
  w.finish();
}

void parse_sensors(const json& j, WorldConfig& world) {
  Strict s(j, "sensors");
  if (const json* odo = s.optional("odometry")) {
    Strict o(*odo, "sensors.odometry");
    o.get("sigma_trans", world.odom_noise.sigma_trans);
    o.get("sigma_rot", world.odom_noise.sigma_rot);
    o.finish();
  }
  if (const json* scan = s.optional("scan")) {
    Strict o(*scan, "sensors.scan");
    o.get("beam_count", world.scan_spec.beam_count);
    o.get("fov", world.scan_spec.fov);
    o.get("max_range", world.scan_spec.max_range);
    o.get("sigma_range", world.scan_spec.sigma_range);
    o.finish();
  }
  if (const json* cam = s.optional("camera")) {
    Strict o(*cam, "sensors.camera");
    o.get("fov", world.camera_spec.fov);
    o.get("reliable_range", world.camera_spec.reliable_range);
    o.get("detect_prob", world.camera_spec.detect_prob);
    o.get("false_positive_rate", world.camera_spec.false_positive_rate);
    o.get("sigma_bearing", world.camera_spec.sigma_bearing);
    o.get("height", world.camera_spec.height);
    o.finish();
  }
  s.finish();
}

void parse_slam(const json& j, SlamParams& slam) {
  Strict s(j, "slam");
  s.get("keyframe_dist", slam.keyframe_dist);
  s.get("keyframe_angle", slam.keyframe_angle);
  s.get("loop_closure_threshold", slam.loop_threshold);
  s.get("grid_resolution", slam.grid_resolution);
  s.get("inflate_margin", slam.inflate_margin);
  if (const json* icp = s.optional("icp")) {
    Strict o(*icp, "slam.icp");
    o.get("max_iters", slam.icp.max_iters);
    o.get("d_corr", slam.icp.d_corr);
    o.get("tol", slam.icp.tol);
    o.finish();
  }
  if (const json* lm = s.optional("lm")) {
    Strict o(*lm, "slam.lm");
    o.get("lambda0", slam.lm.lambda0);
    o.get("max_iters", slam.lm.max_iters);
    o.get("tol", slam.lm.tol);
    o.finish();
  }
  if (const json* off = s.optional("initial_offset")) {
    Strict o(*off, "slam.initial_offset");
    o.get("n_starts", slam.offset.n_starts);
    o.get("translation_grid", slam.offset.translation_grid);
    o.get("threshold", slam.offset.threshold);
    o.finish();
  }
  s.finish();
}

void parse_vision(const json& j, VisionParams& vision) {
  Strict s(j, "vision");
  s.get("min_blob", vision.min_blob);
  if (const json* patch = s.optional("patch")) {
    Strict o(*patch, "vision.patch");
    o.get("tau", vision.patch_tau);
    o.get("min_area", vision.patch_min_area);
    o.get("max_area", vision.patch_max_area);
    o.finish();
  }
  s.finish();
}

void parse_planning(const json& j, PlanningParams& planning) {
  Strict s(j, "planning");
  s.get("plan_margin", planning.plan_margin);
  if (const json* cost = s.optional("cost")) {
    Strict o(*cost, "planning.cost");
    o.get("c_d", planning.cost.c_d);
    o.get("c_f", planning.cost.c_f);
    o.finish();
  }
  if (const json* dwa = s.optional("dwa")) {
    Strict o(*dwa, "planning.dwa");
    o.get("v_samples", planning.dwa.v_samples);
    o.get("omega_samples", planning.dwa.omega_samples);
    o.get("horizon", planning.dwa.horizon);
    o.get("dt", planning.dwa.dt);
    o.get("w_heading", planning.dwa.w_heading);
    o.get("w_clearance", planning.dwa.w_clearance);
    o.get("w_velocity", planning.dwa.w_velocity);
    o.get("clearance_cap", planning.dwa.clearance_cap);
    o.finish();
  }
  s.finish();
}

void parse_arm(const json& j, ArmParams& arm) {
  Strict s(j, "arm");
  if (const json* links = s.optional("links")) {
    if (!links->is_array() || links->size() != 3)
      throw ValidationError("arm.links: expected [L1, L2, L3]");
    for (int i = 0; i < 3; ++i) arm.spec.links[i] = (*links)[i].get<double>();
  }
  if (const json* limits = s.optional("joint_limits")) {
    if (!limits->is_array() || limits->size() != 3)
      throw ValidationError("arm.joint_limits: expected three [lo, hi] pairs");
    for (int i = 0; i < 3; ++i) {
      const json& pair = (*limits)[i];
      if (!pair.is_array() || pair.size() != 2)
        throw ValidationError("arm.joint_limits: expected three [lo, hi] pairs");
      arm.spec.joint_limits[i] = {pair[0].get<double>(), pair[1].get<double>()};
    }
  }
  if (const json* mount = s.optional("mount")) {
    Strict o(*mount, "arm.mount");
    o.get("forward", arm.spec.mount_forward);
    o.get("height", arm.spec.mount_height);
    o.finish();
  }
  if (const json* servo = s.optional("servo")) {
    Strict o(*servo, "arm.servo");
    o.get("alpha", arm.servo.alpha);
    o.get("sigma0", arm.servo.sigma0);
    o.get("sigma_endo", arm.servo.sigma_endo);
    o.get("tol", arm.servo.tol);
    o.get("blind_range", arm.servo.blind_range);
    o.finish();
  }
  if (const json* pol = s.optional("pollinate")) {
    Strict o(*pol, "arm.pollinate");
    o.get("delta", arm.pollinate.delta);
    o.get("threshold", arm.pollinate.threshold);
    o.finish();
  }
  s.get("strokes", arm.strokes);
  s.get("max_servo_steps", arm.max_servo_steps);
  s.get("survey_sigma", arm.survey_sigma);
  s.get("survey_duration", arm.survey_duration);
  s.finish();
}

void parse_mission(const json& j, MissionParams& mission) {
  Strict s(j, "mission");
  s.get("dt", mission.dt);
  s.get("max_time", mission.max_time);
  s.get("arrival_pos_tol", mission.arrival_pos_tol);
  s.get("arrival_heading_tol", mission.arrival_heading_tol);
  s.get("goal_lookahead", mission.goal_lookahead);
  s.finish();
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  Strict root(doc, "scenario");
  Scenario s;

  const json& seed = root.required("seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer())
    throw ValidationError("seed: expected an integer");
  s.world.seed = seed.get<std::uint64_t>();

  parse_world(root.required("world"), s.world);
  if (const json* sensors = root.optional("sensors")) parse_sensors(*sensors, s.world);
  if (const json* slam = root.optional("slam")) parse_slam(*slam, s.slam);
  if (const json* vision = root.optional("vision")) parse_vision(*vision, s.vision);
  if (const json* planning = root.optional("planning")) parse_planning(*planning, s.planning);
  if (const json* arm = root.optional("arm")) parse_arm(*arm, s.arm);
  if (const json* mission = root.optional("mission")) parse_mission(*mission, s.mission);
  root.finish();

  // DWA windows follow the robot unless the scenario narrowed them already.
  s.planning.dwa.v_min = 0.0;
  s.planning.dwa.v_max = s.world.robot.v_max;
  s.planning.dwa.omega_min = -s.world.robot.omega_max;
  s.planning.dwa.omega_max = s.world.robot.omega_max;
  s.planning.dwa.accel_v = s.world.robot.accel_v;
  s.planning.dwa.accel_omega = s.world.robot.accel_omega;
  s.planning.dwa.dt = s.mission.dt;
  s.slam.offset.threshold = s.slam.loop_threshold;
  s.slam.offset.icp = s.slam.icp;
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

nlohmann::json scenario_to_json(const Scenario& s) {
  json rows = json::array();
  for (const PlantRow& row : s.world.rows) {
    rows.push_back({{"id", row.id},
                    {"start", {row.start.x, row.start.y}},
                    {"end", {row.end.x, row.end.y}},
                    {"half_width", row.half_width},
                    {"cells_per_side", row.cells_per_side}});
  }
  json flowers = json::array();
  for (const FlowerSpec& f : s.world.flowers) {
    flowers.push_back({{"id", f.id},
                       {"position", {f.position.x, f.position.y, f.position.z}},
                       {"ready_time", f.ready_time},
                       {"wilt_time", f.wilt_time}});
  }
  return json{
      {"seed", s.world.seed},
      {"world",
       {{"room", {{"width", s.world.room_width}, {"length", s.world.room_length}}},
        {"rows", rows},
        {"flowers", flowers},
        {"robot",
         {{"radius", s.world.robot.radius},
          {"v_max", s.world.robot.v_max},
          {"omega_max", s.world.robot.omega_max},
          {"accel_v", s.world.robot.accel_v},
          {"accel_omega", s.world.robot.accel_omega},
          {"start_pose",
           {s.world.robot.start_pose.x, s.world.robot.start_pose.y,
            s.world.robot.start_pose.theta}}}},
        {"parking_offset", s.world.parking_offset}}},
      {"sensors",
       {{"odometry",
         {{"sigma_trans", s.world.odom_noise.sigma_trans},
          {"sigma_rot", s.world.odom_noise.sigma_rot}}},
        {"scan",
         {{"beam_count", s.world.scan_spec.beam_count},
          {"fov", s.world.scan_spec.fov},
          {"max_range", s.world.scan_spec.max_range},
          {"sigma_range", s.world.scan_spec.sigma_range}}},
        {"camera",
         {{"fov", s.world.camera_spec.fov},
          {"reliable_range", s.world.camera_spec.reliable_range},
          {"detect_prob", s.world.camera_spec.detect_prob},
          {"false_positive_rate", s.world.camera_spec.false_positive_rate},
          {"sigma_bearing", s.world.camera_spec.sigma_bearing},
          {"height", s.world.camera_spec.height}}}}},
      {"slam",
       {{"keyframe_dist", s.slam.keyframe_dist},
        {"keyframe_angle", s.slam.keyframe_angle},
        {"loop_closure_threshold", s.slam.loop_threshold},
        {"grid_resolution", s.slam.grid_resolution},
        {"inflate_margin", s.slam.inflate_margin},
        {"icp",
         {{"max_iters", s.slam.icp.max_iters},
          {"d_corr", s.slam.icp.d_corr},
          {"tol", s.slam.icp.tol}}},
        {"lm",
         {{"lambda0", s.slam.lm.lambda0},
          {"max_iters", s.slam.lm.max_iters},
          {"tol", s.slam.lm.tol}}},
        {"initial_offset",
         {{"n_starts", s.slam.offset.n_starts},
          {"translation_grid", s.slam.offset.translation_grid},
          {"threshold", s.slam.offset.threshold}}}}},
      {"vision",
       {{"min_blob", s.vision.min_blob},
        {"patch",
         {{"tau", s.vision.patch_tau},
          {"min_area", s.vision.patch_min_area},
          {"max_area", s.vision.patch_max_area}}}}},
      {"planning",
       {{"plan_margin", s.planning.plan_margin},
        {"cost", {{"c_d", s.planning.cost.c_d}, {"c_f", s.planning.cost.c_f}}},
        {"dwa",
         {{"v_samples", s.planning.dwa.v_samples},
          {"omega_samples", s.planning.dwa.omega_samples},
          {"horizon", s.planning.dwa.horizon},
          {"dt", s.planning.dwa.dt},
          {"w_heading", s.planning.dwa.w_heading},
          {"w_clearance", s.planning.dwa.w_clearance},
          {"w_velocity", s.planning.dwa.w_velocity},
          {"clearance_cap", s.planning.dwa.clearance_cap}}}}},
      {"arm",
       {{"links", {s.arm.spec.links[0], s.arm.spec.links[1], s.arm.spec.links[2]}},
        {"joint_limits",
         {{s.arm.spec.joint_limits[0][0], s.arm.spec.joint_limits[0][1]},
          {s.arm.spec.joint_limits[1][0], s.arm.spec.joint_limits[1][1]},
          {s.arm.spec.joint_limits[2][0], s.arm.spec.joint_limits[2][1]}}},
        {"mount",
         {{"forward", s.arm.spec.mount_forward}, {"height", s.arm.spec.mount_height}}},
        {"servo",
         {{"alpha", s.arm.servo.alpha},
          {"sigma0", s.arm.servo.sigma0},
          {"sigma_endo", s.arm.servo.sigma_endo},
          {"tol", s.arm.servo.tol},
          {"blind_range", s.arm.servo.blind_range}}},
        {"pollinate",
         {{"delta", s.arm.pollinate.delta}, {"threshold", s.arm.pollinate.threshold}}},
        {"strokes", s.arm.strokes},
        {"max_servo_steps", s.arm.max_servo_steps},
        {"survey_sigma", s.arm.survey_sigma},
        {"survey_duration", s.arm.survey_duration}}},
      {"mission",
       {{"dt", s.mission.dt},
        {"max_time", s.mission.max_time},
        {"arrival_pos_tol", s.mission.arrival_pos_tol},
        {"arrival_heading_tol", s.mission.arrival_heading_tol},
        {"goal_lookahead", s.mission.goal_lookahead}}}};
}

}  // namespace pollisim
