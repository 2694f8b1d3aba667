#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pollisim/geometry.hpp"
#include "pollisim/rng.hpp"

namespace pollisim {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutOfRowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Side : int { kLeft = 0, kRight = 1 };

inline const char* to_string(Side s) { return s == Side::kLeft ? "left" : "right"; }

/// One grid cell on one side of a plant row.
struct GridCellRef {
  int row_id{0};
  Side side{Side::kLeft};
  int index{0};

  auto operator<=>(const GridCellRef&) const = default;
};

struct PlantRow {
  int id{0};
  Vec2 start;
  Vec2 end;
  double half_width{0.25};
  int cells_per_side{5};

  double length() const { return (end - start).norm(); }
  double cell_length() const { return length() / cells_per_side; }
  Vec2 axis() const { return (end - start).normalized(); }
  /// Outward unit normal of the given side (left of the start->end axis for kLeft).
  Vec2 side_normal(Side s) const {
    const Vec2 n = axis().perp();
    return s == Side::kLeft ? n : -n;
  }
  OrientedRect rect() const { return {start, end, half_width}; }
  /// The long face of the row on the given side, running the full length.
  Segment face(Side s) const {
    const Vec2 off = side_normal(s) * half_width;
    return {start + off, end + off};
  }
  Vec2 centerline_point(double arclength) const { return start + axis() * arclength; }
};

/// Cell index for an arclength along the row; the far boundary clamps into
/// the last cell.
int grid_cell_of(const PlantRow& row, Side side, double arclength);

enum class FlowerState : int { kBud = 0, kReady = 1, kPollinated = 2, kWilted = 3 };

const char* to_string(FlowerState s);

struct FlowerSpec {
  int id{0};
  Vec3 position;
  double ready_time{0.0};
  double wilt_time{1e9};
};

struct Flower {
  int id{0};
  Vec3 position;
  GridCellRef cell;
  double ready_time{0.0};
  double wilt_time{1e9};
  FlowerState state{FlowerState::kBud};
  double pistil_coverage{0.0};
  double pollinated_time{-1.0};
  /// True if the flower was Ready at any point of the run so far.
  bool was_ready{false};
};

struct OdomNoise {
  double sigma_trans{0.0};  // m per step, on x and y
  double sigma_rot{0.0};    // rad per step
};

struct ScanSpec {
  int beam_count{360};
  double fov{2.0 * kPi};
  double max_range{10.0};
  double sigma_range{0.0};
};

struct CameraSpec {
  double fov{1.5};
  double reliable_range{2.5};
  double detect_prob{1.0};
  double false_positive_rate{0.0};  // expected spurious detections per frame
  double sigma_bearing{0.0};        // rad, azimuth noise on true detections
  double height{0.5};               // camera height above ground
};

struct RobotSpec {
  double radius{0.3};
  double v_max{1.0};
  double omega_max{1.5};
  double accel_v{1.0};
  double accel_omega{2.0};
  Pose2 start_pose{};
};

struct WorldConfig {
  double room_width{8.0};   // x extent
  double room_length{6.0};  // y extent
  std::vector<PlantRow> rows;
  std::vector<FlowerSpec> flowers;
  OdomNoise odom_noise;
  ScanSpec scan_spec;
  CameraSpec camera_spec;
  RobotSpec robot;
  double parking_offset{0.75};  // d_park, from the row centerline
  std::uint64_t seed{0};
};

struct RobotState {
  Pose2 pose;
  double v{0.0};
  double omega{0.0};
  double time{0.0};
};

/// Long-range detection: a unit bearing in the camera frame
/// (x forward, y left, z up).
struct DetectionEvent {
  Vec3 bearing;
};

struct World {
  WorldConfig config;
  std::vector<Flower> flowers;
  std::vector<GridCellRef> cells;  // row-major: row, side, index
  RobotState robot;
  double time{0.0};
  bool collided{false};  // set by the last step

  int cell_count() const { return static_cast<int>(cells.size()); }
  int cell_linear_index(const GridCellRef& c) const;
  const PlantRow& row_by_id(int row_id) const;
  const std::vector<int>& flowers_in_cell(const GridCellRef& c) const;
  Pose2 parking_pose(const GridCellRef& c) const { return parking_[cell_linear_index(c)]; }
  const std::vector<Segment>& obstacle_segments() const { return obstacle_segments_; }

  // populated by build_world
  std::vector<Pose2> parking_;
  std::vector<std::vector<int>> cell_flowers_;
  std::vector<Segment> obstacle_segments_;  // walls then row edges
  std::map<int, int> row_index_by_id_;
};

/// Validates the configuration and precomputes cells, parking poses and
/// flower-to-cell assignment. Throws GeometryError on invalid geometry.
World build_world(const WorldConfig& config);

/// Advance the world by one control step: clamp commands, integrate the
/// unicycle exactly, advance flower phenology, set the collision flag.
void step(World& world, double v_cmd, double omega_cmd, double dt);

/// Parking pose for a cell: offset d_park from the centerline at the cell
/// midpoint, heading facing the row.
Pose2 parking_pose(const World& world, const GridCellRef& cell);

/// Noisy relative pose inverse(prev) o curr.
Pose2 simulate_odometry(const Pose2& prev, const Pose2& curr, const OdomNoise& noise,
                        Rng& rng);

/// Simulated 2D range scan against walls and row rectangles.
std::vector<double> simulate_scan(const World& world, const Pose2& pose,
                                  const ScanSpec& spec, Rng& rng);

/// Convert a scan to points in the sensor frame, dropping max-range misses.
PointCloud2 scan_to_points(const std::vector<double>& ranges, const ScanSpec& spec);

/// Long-range flower-cluster detections from the given camera pose.
std::vector<DetectionEvent> simulate_cluster_detections(const World& world,
                                                        const Pose2& pose,
                                                        const CameraSpec& camera,
                                                        Rng& rng);

/// Points sampled along the walls and row outlines; the robot's prior map of
/// the room.
PointCloud2 sample_boundary_points(const WorldConfig& config, double spacing);

}  // namespace pollisim
