#pragma once

#include <map>
#include <stdexcept>
#include <vector>

#include "pollisim/geometry.hpp"
#include "pollisim/slam.hpp"
#include "pollisim/world.hpp"

namespace pollisim {

struct NoFreeSpaceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RouteUnreachableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoCandidatesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoPathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BlockedEndpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RowSideKey {
  int row_id{0};
  Side side{Side::kLeft};
  auto operator<=>(const RowSideKey&) const = default;
};

/// One side face of a plant row, used to tag inspection-required edges.
struct RowFace {
  RowSideKey key;
  Segment face;
  Vec2 axis;       // unit vector along the row
  Vec2 outward;    // unit normal pointing away from the row
  double length{0.0};
};

struct VoronoiEdge {
  int a{0};
  int b{0};
  double length{0.0};
};

struct VoronoiGraph {
  std::vector<Vec2> nodes;
  std::vector<VoronoiEdge> edges;
  std::vector<std::vector<std::pair<int, int>>> adjacency;  // node -> (neighbor, edge id)
  std::map<RowSideKey, std::vector<int>> required;          // edge ids flanking each side

  int nearest_node(const Vec2& p) const;
  std::size_t required_edge_total() const;
};

std::vector<RowFace> row_faces(const std::vector<PlantRow>& rows);

/// Planning grid for a room: boundary points rasterized, row interiors and
/// everything outside the walls stamped occupied.
OccupancyGrid planning_grid(const WorldConfig& config, double resolution);

/// Medial-axis roadmap of the free space: exact euclidean distance transform,
/// generator-discontinuity ridge extraction, thinning to unit width, then
/// 8-connected graph construction. Edges within 1.5 * d_park of a row face
/// (and axially inside the row) are tagged required for that side.
VoronoiGraph build_voronoi(const OccupancyGrid& grid, const std::vector<RowFace>& faces,
                           double d_park);

struct InspectionRoute {
  std::vector<int> node_path;
  double length{0.0};
};

/// Greedy coverage of all required edges: repeatedly walk the shortest path
/// to the nearest endpoint of an uncovered required edge and traverse it.
InspectionRoute plan_inspection(const VoronoiGraph& graph, int start_node);

struct CandidateCell {
  GridCellRef cell;
  Pose2 parking;
  int n_f{0};  // observed flower clusters
};

struct CostParams {
  double c_d{1.0};  // weight per meter of driving
  double c_f{1.0};  // weight on the inverse flower count
};

/// Greedy next-cell rule: minimize c_d * dist(robot, parking) + c_f / n_f over
/// candidates with n_f >= 1; ties break on the lowest (row, side, index).
CandidateCell next_pollination_cell(const Pose2& robot,
                                    const std::vector<CandidateCell>& candidates,
                                    const CostParams& params);

struct GridCell {
  int ix{0};
  int iy{0};
  auto operator<=>(const GridCell&) const = default;
};

/// True when the straight segment stays out of occupied cells (sampled at
/// half the grid resolution).
bool line_free(const OccupancyGrid& grid, const Vec2& a, const Vec2& b);

/// 8-connected grid shortest path; unit cost per axis move, sqrt(2) per
/// diagonal, diagonals forbidden past occupied corners. Path cost is in cell
/// units.
std::vector<GridCell> dijkstra_path(const OccupancyGrid& grid, const GridCell& start,
                                    const GridCell& goal);

double path_cost(const std::vector<GridCell>& path);

/// Exact euclidean distance transform of a grid: per-cell distance (m) to the
/// nearest occupied cell center. Used for DWA clearance scoring.
class DistanceField {
 public:
  explicit DistanceField(const OccupancyGrid& grid);

  double distance(const Vec2& world_point) const;  // 0 outside the grid
  const OccupancyGrid& grid() const { return grid_; }

 private:
  OccupancyGrid grid_;
  std::vector<double> dist_;  // meters
};

struct DWAParams {
  double v_min{0.0};
  double v_max{1.0};
  double omega_min{-1.5};
  double omega_max{1.5};
  double accel_v{1.0};
  double accel_omega{2.0};
  int v_samples{7};
  int omega_samples{11};
  double horizon{1.5};  // s
  double dt{0.1};       // window period and rollout step
  double w_heading{1.0};
  double w_clearance{0.1};
  double w_velocity{0.1};
  double clearance_cap{2.0};  // m mapped to clearance score 1
};

struct VelocityCommand {
  double v{0.0};
  double omega{0.0};
};

/// One Dynamic Window step: sample the reachable velocity window, discard
/// rollouts that collide or cannot brake in time, score the rest. Falls back
/// to rotating in place toward the goal when nothing is admissible.
VelocityCommand dwa_step(const RobotState& state, const Vec2& local_goal,
                         const DistanceField& field, const DWAParams& params);

}  // namespace pollisim
