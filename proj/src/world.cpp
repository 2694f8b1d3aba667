#include "pollisim/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pollisim {

const char* to_string(FlowerState s) {
  switch (s) {
    case FlowerState::kBud: return "bud";
    case FlowerState::kReady: return "ready";
    case FlowerState::kPollinated: return "pollinated";
    case FlowerState::kWilted: return "wilted";
  }
  return "?";
}

int grid_cell_of(const PlantRow& row, Side /*side*/, double arclength) {
  const double len = row.length();
  if (arclength < 0.0 || arclength > len) {
    std::ostringstream msg;
    msg << "arclength " << arclength << " outside [0, " << len << "] on row " << row.id;
    throw OutOfRowError(msg.str());
  }
  const int idx = static_cast<int>(std::floor(arclength / row.cell_length()));
  return std::min(idx, row.cells_per_side - 1);
}

int World::cell_linear_index(const GridCellRef& c) const {
  const auto it = row_index_by_id_.find(c.row_id);
  if (it == row_index_by_id_.end())
    throw GeometryError("unknown row id " + std::to_string(c.row_id));
  const PlantRow& row = config.rows[it->second];
  if (c.index < 0 || c.index >= row.cells_per_side)
    throw GeometryError("cell index out of range on row " + std::to_string(c.row_id));
  int base = 0;
  for (int i = 0; i < it->second; ++i) base += 2 * config.rows[i].cells_per_side;
  return base + (c.side == Side::kLeft ? 0 : row.cells_per_side) + c.index;
}

const PlantRow& World::row_by_id(int row_id) const {
  const auto it = row_index_by_id_.find(row_id);
  if (it == row_index_by_id_.end())
    throw GeometryError("unknown row id " + std::to_string(row_id));
  return config.rows[it->second];
}

const std::vector<int>& World::flowers_in_cell(const GridCellRef& c) const {
  return cell_flowers_[cell_linear_index(c)];
}

namespace {

Pose2 compute_parking_pose(const PlantRow& row, const GridCellRef& cell,
                           double d_park) {
  const double mid = (cell.index + 0.5) * row.cell_length();
  const Vec2 n = row.side_normal(cell.side);
  const Vec2 pos = row.centerline_point(mid) + n * d_park;
  // Face the centerline: heading along -n.
  const double heading = std::atan2(-n.y, -n.x);
  return {pos.x, pos.y, wrap_angle(heading)};
}

double rect_rect_distance(const OrientedRect& a, const OrientedRect& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ea : a.edges())
    for (const auto& c : {b.corners()[0], b.corners()[1], b.corners()[2], b.corners()[3]})
      best = std::min(best, distance_to_segment(c, ea));
  for (const auto& eb : b.edges())
    for (const auto& c : {a.corners()[0], a.corners()[1], a.corners()[2], a.corners()[3]})
      best = std::min(best, distance_to_segment(c, eb));
  // Overlap check: any corner containment collapses the distance to zero.
  for (const auto& c : a.corners())
    if (b.contains(c)) return 0.0;
  for (const auto& c : b.corners())
    if (a.contains(c)) return 0.0;
  return best;
}

void advance_phenology(World& world) {
  for (Flower& f : world.flowers) {
    if (f.state == FlowerState::kBud && world.time >= f.ready_time) {
      f.state = FlowerState::kReady;
      f.was_ready = true;
    }
    if (f.state == FlowerState::kReady && world.time >= f.wilt_time) {
      f.state = FlowerState::kWilted;
    }
  }
}

}  // namespace

World build_world(const WorldConfig& config) {
  if (config.room_width <= 0.0 || config.room_length <= 0.0)
    throw GeometryError("room dimensions must be positive");

  World world;
  world.config = config;

  const double diameter = 2.0 * config.robot.radius;
  for (std::size_t i = 0; i < config.rows.size(); ++i) {
    const PlantRow& row = config.rows[i];
    if (row.cells_per_side <= 0)
      throw GeometryError("row " + std::to_string(row.id) + " needs cells_per_side > 0");
    if (row.length() <= 0.0)
      throw GeometryError("row " + std::to_string(row.id) + " has zero length");
    for (const Vec2& c : row.rect().corners()) {
      if (c.x <= 0.0 || c.x >= config.room_width || c.y <= 0.0 ||
          c.y >= config.room_length) {
        throw GeometryError("row " + std::to_string(row.id) +
                            " is not strictly inside the room");
      }
    }
    // Corridor clearance to walls.
    double wall_gap = std::numeric_limits<double>::infinity();
    for (const Vec2& c : row.rect().corners()) {
      wall_gap = std::min({wall_gap, c.x, config.room_width - c.x, c.y,
                           config.room_length - c.y});
    }
    if (wall_gap < diameter)
      throw GeometryError("corridor between row " + std::to_string(row.id) +
                          " and a wall is narrower than the robot diameter");
    if (world.row_index_by_id_.count(row.id))
      throw GeometryError("duplicate row id " + std::to_string(row.id));
    world.row_index_by_id_[row.id] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < config.rows.size(); ++i) {
    for (std::size_t j = i + 1; j < config.rows.size(); ++j) {
      const double gap = rect_rect_distance(config.rows[i].rect(), config.rows[j].rect());
      if (gap < diameter)
        throw GeometryError("corridor between rows " + std::to_string(config.rows[i].id) +
                            " and " + std::to_string(config.rows[j].id) +
                            " is narrower than the robot diameter");
    }
  }

  for (const PlantRow& row : config.rows) {
    for (Side side : {Side::kLeft, Side::kRight}) {
      for (int k = 0; k < row.cells_per_side; ++k) {
        const GridCellRef cell{row.id, side, k};
        world.cells.push_back(cell);
        world.parking_.push_back(compute_parking_pose(row, cell, config.parking_offset));
      }
    }
  }
  world.cell_flowers_.resize(world.cells.size());

  for (const FlowerSpec& spec : config.flowers) {
    if (spec.ready_time >= spec.wilt_time)
      throw GeometryError("flower " + std::to_string(spec.id) +
                          " must have ready_time < wilt_time");
    const PlantRow* host = nullptr;
    for (const PlantRow& row : config.rows) {
      if (row.rect().contains(spec.position.xy())) {
        host = &row;
        break;
      }
    }
    if (host == nullptr)
      throw GeometryError("flower " + std::to_string(spec.id) + " lies outside every row");
    const Vec2 d = spec.position.xy() - host->start;
    const double along = std::clamp(d.dot(host->axis()), 0.0, host->length());
    const double lateral = host->axis().cross(d);  // >0 on the left
    const Side side = lateral >= 0.0 ? Side::kLeft : Side::kRight;
    const GridCellRef cell{host->id, side, grid_cell_of(*host, side, along)};
    Flower f;
    f.id = spec.id;
    f.position = spec.position;
    f.cell = cell;
    f.ready_time = spec.ready_time;
    f.wilt_time = spec.wilt_time;
    world.flowers.push_back(f);
    world.cell_flowers_[world.cell_linear_index(cell)].push_back(
        static_cast<int>(world.flowers.size() - 1));
  }

  // Walls, counter-clockwise, then row outlines.
  const double w = config.room_width, l = config.room_length;
  world.obstacle_segments_ = {{{0, 0}, {w, 0}}, {{w, 0}, {w, l}}, {{w, l}, {0, l}}, {{0, l}, {0, 0}}};
  for (const PlantRow& row : config.rows)
    for (const Segment& e : row.rect().edges()) world.obstacle_segments_.push_back(e);

  world.robot.pose = config.robot.start_pose;
  world.time = 0.0;
  advance_phenology(world);  // apply thresholds already passed at t = 0
  return world;
}

void step(World& world, double v_cmd, double omega_cmd, double dt) {
  const RobotSpec& spec = world.config.robot;
  const double v = std::clamp(v_cmd, -spec.v_max, spec.v_max);
  const double omega = std::clamp(omega_cmd, -spec.omega_max, spec.omega_max);

  Pose2& p = world.robot.pose;
  if (std::abs(omega) > 1e-9) {
    const double r = v / omega;
    p.x += r * (std::sin(p.theta + omega * dt) - std::sin(p.theta));
    p.y += r * (-std::cos(p.theta + omega * dt) + std::cos(p.theta));
    p.theta = wrap_angle(p.theta + omega * dt);
  } else {
    p.x += v * dt * std::cos(p.theta);
    p.y += v * dt * std::sin(p.theta);
  }
  world.robot.v = v;
  world.robot.omega = omega;
  world.time += dt;
  world.robot.time = world.time;

  const double r = spec.radius;
  bool hit = p.x < r || p.x > world.config.room_width - r || p.y < r ||
             p.y > world.config.room_length - r;
  if (!hit) {
    for (const PlantRow& row : world.config.rows) {
      if (row.rect().distance(p.position()) < r) {
        hit = true;
        break;
      }
    }
  }
  world.collided = hit;

  advance_phenology(world);
}

Pose2 parking_pose(const World& world, const GridCellRef& cell) {
  return world.parking_pose(cell);
}

Pose2 simulate_odometry(const Pose2& prev, const Pose2& curr, const OdomNoise& noise,
                        Rng& rng) {
  const Pose2 rel = compose(inverse(prev), curr);
  return {rel.x + rng.gauss(noise.sigma_trans), rel.y + rng.gauss(noise.sigma_trans),
          wrap_angle(rel.theta + rng.gauss(noise.sigma_rot))};
}

std::vector<double> simulate_scan(const World& world, const Pose2& pose,
                                  const ScanSpec& spec, Rng& rng) {
  std::vector<double> ranges(spec.beam_count, spec.max_range);
  for (int i = 0; i < spec.beam_count; ++i) {
    double bearing = 0.0;
    if (spec.beam_count > 1)
      bearing = -spec.fov / 2.0 + spec.fov * i / (spec.beam_count - 1);
    const double ang = pose.theta + bearing;
    const Vec2 dir{std::cos(ang), std::sin(ang)};
    double nearest = std::numeric_limits<double>::infinity();
    for (const Segment& s : world.obstacle_segments()) {
      if (auto t = ray_segment_intersection(pose.position(), dir, s))
        nearest = std::min(nearest, *t);
    }
    if (nearest <= spec.max_range) {
      const double noisy = nearest + rng.gauss(spec.sigma_range);
      ranges[i] = std::clamp(noisy, 0.0, spec.max_range);
    }
  }
  return ranges;
}

PointCloud2 scan_to_points(const std::vector<double>& ranges, const ScanSpec& spec) {
  PointCloud2 points;
  points.reserve(ranges.size());
  const int n = static_cast<int>(ranges.size());
  for (int i = 0; i < n; ++i) {
    if (ranges[i] >= spec.max_range) continue;
    double bearing = 0.0;
    if (n > 1) bearing = -spec.fov / 2.0 + spec.fov * i / (n - 1);
    points.push_back({ranges[i] * std::cos(bearing), ranges[i] * std::sin(bearing)});
  }
  return points;
}

std::vector<DetectionEvent> simulate_cluster_detections(const World& world,
                                                        const Pose2& pose,
                                                        const CameraSpec& camera,
                                                        Rng& rng) {
  std::vector<DetectionEvent> events;
  for (const GridCellRef& cell : world.cells) {
    const auto& members = world.flowers_in_cell(cell);
    Vec3 centroid{0, 0, 0};
    int alive = 0;
    for (int fi : members) {
      const Flower& f = world.flowers[fi];
      if (f.state == FlowerState::kWilted) continue;
      centroid = centroid + f.position;
      ++alive;
    }
    if (alive == 0) continue;
    centroid = centroid * (1.0 / alive);

    const Vec2 flat = centroid.xy() - pose.position();
    const double dist = flat.norm();
    if (dist > camera.reliable_range || dist < 1e-9) continue;
    const double azimuth = wrap_angle(std::atan2(flat.y, flat.x) - pose.theta);
    if (std::abs(azimuth) > camera.fov / 2.0) continue;

    // Rows are opaque: the cell is visible only from its own side, and only
    // when no other row body blocks the line of sight.
    const PlantRow& host = world.row_by_id(cell.row_id);
    const double lateral = host.axis().cross(pose.position() - host.start);
    const Side camera_side = lateral >= 0.0 ? Side::kLeft : Side::kRight;
    if (camera_side != cell.side) continue;
    bool blocked = false;
    const Vec2 dir = flat.normalized();
    for (const PlantRow& other : world.config.rows) {
      if (other.id == cell.row_id) continue;
      for (const Segment& e : other.rect().edges()) {
        const auto t = ray_segment_intersection(pose.position(), dir, e);
        if (t && *t < dist) {
          blocked = true;
          break;
        }
      }
      if (blocked) break;
    }
    if (blocked) continue;
    if (!rng.bernoulli(camera.detect_prob)) continue;

    const double az = azimuth + rng.gauss(camera.sigma_bearing);
    const double dz = centroid.z - camera.height;
    const double elev = std::atan2(dz, dist);
    events.push_back({Vec3{std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                           std::sin(elev)}});
  }
  const int spurious = rng.poisson(camera.false_positive_rate);
  for (int k = 0; k < spurious; ++k) {
    const double az = rng.uniform(-camera.fov / 2.0, camera.fov / 2.0);
    events.push_back({Vec3{std::cos(az), std::sin(az), 0.0}});
  }
  return events;
}

PointCloud2 sample_boundary_points(const WorldConfig& config, double spacing) {
  PointCloud2 cloud;
  std::vector<Segment> segments{{{0, 0}, {config.room_width, 0}},
                                {{config.room_width, 0}, {config.room_width, config.room_length}},
                                {{config.room_width, config.room_length}, {0, config.room_length}},
                                {{0, config.room_length}, {0, 0}}};
  for (const PlantRow& row : config.rows)
    for (const Segment& e : row.rect().edges()) segments.push_back(e);
  for (const Segment& s : segments) {
    const double len = (s.b - s.a).norm();
    const int n = std::max(1, static_cast<int>(std::floor(len / spacing)));
    for (int i = 0; i < n; ++i) cloud.push_back(s.a + (s.b - s.a) * (static_cast<double>(i) / n));
  }
  return cloud;
}

}  // namespace pollisim
