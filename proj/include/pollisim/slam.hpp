#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pollisim/geometry.hpp"

namespace pollisim {

struct IcpDegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularSystemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoAlignmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OdometryFactor {
  int from_node{0};
  int to_node{0};
  Pose2 measurement;             // relative pose, from -> to
  Eigen::Matrix3d information;   // symmetric positive definite
};

struct AnchorFactor {
  int node{0};
  Pose2 measurement;             // global-frame pose
  Eigen::Matrix3d information;
};

struct FactorGraph {
  int num_nodes{0};
  std::vector<OdometryFactor> odometry;
  std::vector<AnchorFactor> anchors;

  int add_node() { return num_nodes++; }
  /// Throws std::invalid_argument when factor endpoints are out of range,
  /// an information matrix is not SPD, or no anchor exists.
  void validate() const;
};

/// Stacked whitened residual and its block-sparse jacobian at the given
/// estimate. Row order: odometry factors then anchors, three rows each;
/// columns follow node order, three per node.
struct Linearization {
  Eigen::VectorXd residual;
  Eigen::SparseMatrix<double> jacobian;
};

Linearization graph_residual(const FactorGraph& graph, const std::vector<Pose2>& estimate);

struct LmParams {
  double lambda0{1e-4};
  int max_iters{50};
  double tol{1e-9};  // relative cost decrease
};

struct LmResult {
  std::vector<Pose2> estimate;
  std::vector<double> cost_history;  // accepted costs, starting with the initial cost
  int iterations{0};
  bool converged{false};
};

/// Batch Levenberg-Marquardt with multiplicative damping. Accepted steps
/// strictly decrease the cost. Throws SingularSystemError when the damped
/// normal equations cannot be solved at any damping level.
LmResult optimize_lm(const FactorGraph& graph, const std::vector<Pose2>& initial,
                     const LmParams& params = {});

struct IcpParams {
  int max_iters{30};
  double d_corr{0.5};  // correspondence distance gate, m
  double tol{1e-6};    // |delta rms| stop
};

struct IcpResult {
  Pose2 transform;          // maps source points into the target frame
  double match_fraction{0.0};
  double rms_error{0.0};
  int iterations{0};
};

/// 2D point-to-point ICP with closed-form SVD updates. Throws
/// IcpDegenerateError when an iteration finds fewer than 3 correspondences.
IcpResult icp_match(const PointCloud2& source, const PointCloud2& target,
                    const Pose2& init, const IcpParams& params = {});

inline bool loop_closure_check(const IcpResult& result, double threshold) {
  return result.match_fraction >= threshold;
}

struct OffsetParams {
  int n_starts{12};        // evenly spaced initial headings
  int translation_grid{3}; // per-axis coarse translation seeds over the map bbox
  double threshold{0.8};
  IcpParams icp{};
};

/// Multi-start ICP alignment of a local cloud against the prior map.
/// Returns the best transform by match fraction; throws NoAlignmentError
/// when no start passes the threshold.
Pose2 estimate_initial_offset(const PointCloud2& local, const PointCloud2& prior_map,
                              const OffsetParams& params = {});

enum class CellState : std::uint8_t { kFree = 0, kOccupied = 1, kUnknown = 2 };

struct GridSpec {
  Pose2 origin;           // pose of the grid's (0,0) corner
  double resolution{0.1}; // m per cell
  int width{0};
  int height{0};
};

struct OccupancyGrid {
  GridSpec spec;
  std::vector<CellState> values;  // row-major, index = iy * width + ix

  CellState at(int ix, int iy) const { return values[iy * spec.width + ix]; }
  void set(int ix, int iy, CellState v) { values[iy * spec.width + ix] = v; }
  bool in_bounds(int ix, int iy) const {
    return ix >= 0 && ix < spec.width && iy >= 0 && iy < spec.height;
  }
  /// Cell containing a world point, or false when outside the grid.
  bool world_to_cell(const Vec2& p, int& ix, int& iy) const;
  Vec2 cell_center(int ix, int iy) const;
  bool occupied_at(const Vec2& p) const;  // out-of-bounds counts as occupied
};

OccupancyGrid rasterize(const PointCloud2& points, const GridSpec& spec);

/// Occupy every free cell whose center lies within radius of an occupied
/// cell's area.
OccupancyGrid inflate(const OccupancyGrid& grid, double radius);

}  // namespace pollisim
