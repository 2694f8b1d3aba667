#include "pollisim/slam.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace pollisim {

namespace {

Eigen::Matrix3d sqrt_information(const Eigen::Matrix3d& info) {
  const Eigen::LLT<Eigen::Matrix3d> llt(info);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("information matrix is not positive definite");
  // r = L^T e gives r^T r = e^T (L L^T) e.
  return llt.matrixL().transpose();
}

void check_spd(const Eigen::Matrix3d& info) {
  if (!info.isApprox(info.transpose(), 1e-9))
    throw std::invalid_argument("information matrix is not symmetric");
  sqrt_information(info);
}

Eigen::Matrix2d rot(double theta) {
  Eigen::Matrix2d r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

// d/dtheta of R(theta)^T
Eigen::Matrix2d drot_t(double theta) {
  Eigen::Matrix2d r;
  r << -std::sin(theta), std::cos(theta), -std::cos(theta), -std::sin(theta);
  return r;
}

double graph_cost(const FactorGraph& graph, const std::vector<Pose2>& estimate) {
  // Residual only; avoids assembling the jacobian when probing LM steps.
  double cost = 0.0;
  const auto add = [&cost](const Eigen::Matrix3d& info, const Eigen::Vector3d& e) {
    cost += e.dot(info * e);
  };
  for (const OdometryFactor& f : graph.odometry) {
    const Pose2 pred = compose(inverse(estimate[f.from_node]), estimate[f.to_node]);
    const Pose2 err = compose(inverse(f.measurement), pred);
    add(f.information, {err.x, err.y, wrap_angle(err.theta)});
  }
  for (const AnchorFactor& f : graph.anchors) {
    const Pose2 err = compose(inverse(f.measurement), estimate[f.node]);
    add(f.information, {err.x, err.y, wrap_angle(err.theta)});
  }
  return cost;
}

}  // namespace

void FactorGraph::validate() const {
  for (const OdometryFactor& f : odometry) {
    if (f.from_node < 0 || f.from_node >= num_nodes || f.to_node < 0 ||
        f.to_node >= num_nodes)
      throw std::invalid_argument("odometry factor references a missing node");
    if (f.from_node == f.to_node)
      throw std::invalid_argument("odometry factor endpoints must differ");
    check_spd(f.information);
  }
  for (const AnchorFactor& f : anchors) {
    if (f.node < 0 || f.node >= num_nodes)
      throw std::invalid_argument("anchor factor references a missing node");
    check_spd(f.information);
  }
  if (anchors.empty())
    throw std::invalid_argument("graph needs at least one anchor factor");
}

Linearization graph_residual(const FactorGraph& graph, const std::vector<Pose2>& estimate) {
  if (static_cast<int>(estimate.size()) != graph.num_nodes)
    throw std::invalid_argument("estimate does not cover all nodes");

  const int rows = 3 * static_cast<int>(graph.odometry.size() + graph.anchors.size());
  const int cols = 3 * graph.num_nodes;
  Linearization lin;
  lin.residual.resize(rows);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(graph.odometry.size() * 18 + graph.anchors.size() * 9);

  int row = 0;
  for (const OdometryFactor& f : graph.odometry) {
    const Pose2& xi = estimate[f.from_node];
    const Pose2& xj = estimate[f.to_node];
    const Eigen::Vector2d d(xj.x - xi.x, xj.y - xi.y);
    const Eigen::Matrix2d rm_t = rot(f.measurement.theta).transpose();
    const Eigen::Matrix2d ri_t = rot(xi.theta).transpose();

    // e_t = Rm^T (Ri^T d - tm), e_theta = wrap(thj - thi - thm)
    const Eigen::Vector2d local = ri_t * d;
    const Eigen::Vector2d et =
        rm_t * (local - Eigen::Vector2d(f.measurement.x, f.measurement.y));
    const double eth = wrap_angle(xj.theta - xi.theta - f.measurement.theta);

    Eigen::Matrix3d ji = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d jj = Eigen::Matrix3d::Zero();
    ji.block<2, 2>(0, 0) = -(rm_t * ri_t);
    ji.block<2, 1>(0, 2) = rm_t * (drot_t(xi.theta) * d);
    ji(2, 2) = -1.0;
    jj.block<2, 2>(0, 0) = rm_t * ri_t;
    jj(2, 2) = 1.0;

    const Eigen::Matrix3d w = sqrt_information(f.information);
    const Eigen::Vector3d e(et.x(), et.y(), eth);
    lin.residual.segment<3>(row) = w * e;
    const Eigen::Matrix3d wji = w * ji;
    const Eigen::Matrix3d wjj = w * jj;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        triplets.emplace_back(row + r, 3 * f.from_node + c, wji(r, c));
        triplets.emplace_back(row + r, 3 * f.to_node + c, wjj(r, c));
      }
    }
    row += 3;
  }
  for (const AnchorFactor& f : graph.anchors) {
    const Pose2& xi = estimate[f.node];
    const Eigen::Matrix2d rm_t = rot(f.measurement.theta).transpose();
    const Eigen::Vector2d et =
        rm_t * Eigen::Vector2d(xi.x - f.measurement.x, xi.y - f.measurement.y);
    const double eth = wrap_angle(xi.theta - f.measurement.theta);

    Eigen::Matrix3d ji = Eigen::Matrix3d::Zero();
    ji.block<2, 2>(0, 0) = rm_t;
    ji(2, 2) = 1.0;

    const Eigen::Matrix3d w = sqrt_information(f.information);
    lin.residual.segment<3>(row) = w * Eigen::Vector3d(et.x(), et.y(), eth);
    const Eigen::Matrix3d wj = w * ji;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        triplets.emplace_back(row + r, 3 * f.node + c, wj(r, c));
    row += 3;
  }

  lin.jacobian.resize(rows, cols);
  lin.jacobian.setFromTriplets(triplets.begin(), triplets.end());
  return lin;
}

LmResult optimize_lm(const FactorGraph& graph, const std::vector<Pose2>& initial,
                     const LmParams& params) {
  graph.validate();
  LmResult result;
  result.estimate = initial;

  double lambda = params.lambda0;
  double cost = graph_cost(graph, result.estimate);
  result.cost_history.push_back(cost);

  for (int iter = 0; iter < params.max_iters; ++iter) {
    result.iterations = iter + 1;
    const Linearization lin = graph_residual(graph, result.estimate);
    const Eigen::SparseMatrix<double> jt = lin.jacobian.transpose();
    const Eigen::SparseMatrix<double> h = jt * lin.jacobian;
    const Eigen::VectorXd g = jt * lin.residual;

    if (g.lpNorm<Eigen::Infinity>() < 1e-14) {
      result.converged = true;
      break;
    }

    bool accepted = false;
    bool any_solved = false;
    while (lambda < 1e12) {
      // Marquardt scaling: damp with lambda * diag(H), floored for gauge
      // directions that an anchor has not pinned yet.
      Eigen::SparseMatrix<double> damped = h;
      for (int k = 0; k < h.rows(); ++k) {
        const double dk = std::max(h.coeff(k, k), 1e-12);
        damped.coeffRef(k, k) = h.coeff(k, k) + lambda * dk;
      }
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(damped);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd dx = solver.solve(-g);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      any_solved = true;
      std::vector<Pose2> candidate = result.estimate;
      for (int n = 0; n < graph.num_nodes; ++n) {
        candidate[n].x += dx(3 * n);
        candidate[n].y += dx(3 * n + 1);
        candidate[n].theta = wrap_angle(candidate[n].theta + dx(3 * n + 2));
      }
      const double new_cost = graph_cost(graph, candidate);
      if (new_cost < cost) {
        const double drop = cost - new_cost;
        result.estimate = std::move(candidate);
        cost = new_cost;
        result.cost_history.push_back(cost);
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (drop <= params.tol * std::max(cost, 1e-12)) result.converged = true;
        break;
      }
      lambda *= 2.0;
    }
    if (!accepted) {
      if (!any_solved)
        throw SingularSystemError("damped normal equations unsolvable");
      result.converged = true;  // no improving step exists at any damping
      break;
    }
    if (result.converged) break;
  }
  return result;
}

namespace {

/// Uniform-grid spatial hash for nearest-neighbor queries within a radius.
class GridIndex {
 public:
  GridIndex(const PointCloud2& points, double cell) : points_(points), cell_(cell) {
    buckets_.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
      buckets_[key(points[i])].push_back(static_cast<int>(i));
  }

  /// Index of the nearest point within radius, or -1.
  int nearest(const Vec2& q, double radius) const {
    const long qx = coord(q.x), qy = coord(q.y);
    int best = -1;
    double best_d2 = radius * radius;
    for (long dx = -1; dx <= 1; ++dx) {
      for (long dy = -1; dy <= 1; ++dy) {
        const auto it = buckets_.find(pack(qx + dx, qy + dy));
        if (it == buckets_.end()) continue;
        for (int i : it->second) {
          const double d2 = (points_[i] - q).squared_norm();
          if (d2 <= best_d2) {
            best_d2 = d2;
            best = i;
          }
        }
      }
    }
    return best;
  }

 private:
  long coord(double v) const { return static_cast<long>(std::floor(v / cell_)); }
  std::uint64_t key(const Vec2& p) const { return pack(coord(p.x), coord(p.y)); }
  static std::uint64_t pack(long x, long y) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) |
           static_cast<std::uint32_t>(y);
  }

  const PointCloud2& points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<int>> buckets_;
};

}  // namespace

IcpResult icp_match(const PointCloud2& source, const PointCloud2& target,
                    const Pose2& init, const IcpParams& params) {
  if (source.empty() || target.empty())
    throw std::invalid_argument("icp_match requires non-empty clouds");

  const GridIndex index(target, params.d_corr);
  IcpResult result;
  result.transform = init;
  double prev_rms = std::numeric_limits<double>::infinity();

  std::vector<std::pair<int, int>> pairs;  // (source idx, target idx)
  for (int iter = 0; iter < params.max_iters; ++iter) {
    result.iterations = iter + 1;
    pairs.clear();
    for (std::size_t i = 0; i < source.size(); ++i) {
      const Vec2 p = transform_point(result.transform, source[i]);
      const int j = index.nearest(p, params.d_corr);
      if (j >= 0) pairs.emplace_back(static_cast<int>(i), j);
    }
    if (pairs.size() < 3)
      throw IcpDegenerateError("fewer than 3 ICP correspondences");

    // Closed-form 2D rigid fit over the original source points.
    Vec2 sc{0, 0}, tc{0, 0};
    for (const auto& [si, ti] : pairs) {
      sc += source[si];
      tc += target[ti];
    }
    const double n = static_cast<double>(pairs.size());
    sc = sc * (1.0 / n);
    tc = tc * (1.0 / n);
    double a = 0.0, b = 0.0;
    for (const auto& [si, ti] : pairs) {
      const Vec2 s = source[si] - sc;
      const Vec2 t = target[ti] - tc;
      a += s.dot(t);
      b += s.cross(t);
    }
    const double theta = std::atan2(b, a);
    const Vec2 rsc = sc.rotated(theta);
    result.transform = {tc.x - rsc.x, tc.y - rsc.y, wrap_angle(theta)};

    double sq = 0.0;
    for (const auto& [si, ti] : pairs) {
      const Vec2 p = transform_point(result.transform, source[si]);
      sq += (p - target[ti]).squared_norm();
    }
    const double rms = std::sqrt(sq / n);
    if (std::abs(prev_rms - rms) < params.tol) {
      prev_rms = rms;
      break;
    }
    prev_rms = rms;
  }

  // Report correspondences under the final transform.
  int matched = 0;
  double sq = 0.0;
  for (const Vec2& s : source) {
    const Vec2 p = transform_point(result.transform, s);
    const int j = index.nearest(p, params.d_corr);
    if (j >= 0) {
      ++matched;
      sq += (p - target[j]).squared_norm();
    }
  }
  result.match_fraction = static_cast<double>(matched) / source.size();
  result.rms_error = matched > 0 ? std::sqrt(sq / matched) : 0.0;
  return result;
}

Pose2 estimate_initial_offset(const PointCloud2& local, const PointCloud2& prior_map,
                              const OffsetParams& params) {
  if (prior_map.empty()) throw std::invalid_argument("prior map is empty");

  Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Vec2 hi{-lo.x, -lo.y};
  for (const Vec2& p : prior_map) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }

  Vec2 centroid{0, 0};
  for (const Vec2& p : local) centroid += p;
  if (!local.empty()) centroid = centroid * (1.0 / local.size());

  bool found = false;
  IcpResult best;
  const int g = std::max(1, params.translation_grid);
  for (int r = 0; r < params.n_starts; ++r) {
    const double heading = wrap_angle(2.0 * kPi * r / params.n_starts);
    for (int gx = 0; gx < g; ++gx) {
      for (int gy = 0; gy < g; ++gy) {
        // Seed so the rotated local centroid lands on this grid point.
        const Vec2 at{lo.x + (hi.x - lo.x) * (gx + 0.5) / g,
                      lo.y + (hi.y - lo.y) * (gy + 0.5) / g};
        const Vec2 rc = centroid.rotated(heading);
        const Pose2 seed{at.x - rc.x, at.y - rc.y, heading};
        IcpResult res;
        try {
          res = icp_match(local, prior_map, seed, params.icp);
        } catch (const IcpDegenerateError&) {
          continue;
        }
        // Rank by match fraction, then by rms among equally matched starts.
        const bool better = !found || res.match_fraction > best.match_fraction ||
                            (res.match_fraction == best.match_fraction &&
                             res.rms_error < best.rms_error);
        if (better) {
          best = res;
          found = true;
        }
      }
    }
  }
  if (!found || !loop_closure_check(best, params.threshold))
    throw NoAlignmentError("no ICP start passed the match-fraction threshold");
  return best.transform;
}

bool OccupancyGrid::world_to_cell(const Vec2& p, int& ix, int& iy) const {
  const Vec2 local = untransform_point(spec.origin, p);
  ix = static_cast<int>(std::floor(local.x / spec.resolution));
  iy = static_cast<int>(std::floor(local.y / spec.resolution));
  return in_bounds(ix, iy);
}

Vec2 OccupancyGrid::cell_center(int ix, int iy) const {
  return transform_point(spec.origin,
                         {(ix + 0.5) * spec.resolution, (iy + 0.5) * spec.resolution});
}

bool OccupancyGrid::occupied_at(const Vec2& p) const {
  int ix, iy;
  if (!world_to_cell(p, ix, iy)) return true;
  return at(ix, iy) != CellState::kFree;
}

OccupancyGrid rasterize(const PointCloud2& points, const GridSpec& spec) {
  if (spec.resolution <= 0.0) throw std::invalid_argument("resolution must be positive");
  if (spec.width <= 0 || spec.height <= 0)
    throw std::invalid_argument("grid dimensions must be positive");
  OccupancyGrid grid;
  grid.spec = spec;
  grid.values.assign(static_cast<std::size_t>(spec.width) * spec.height,
                     CellState::kFree);
  for (const Vec2& p : points) {
    int ix, iy;
    if (grid.world_to_cell(p, ix, iy)) grid.set(ix, iy, CellState::kOccupied);
  }
  return grid;
}

OccupancyGrid inflate(const OccupancyGrid& grid, double radius) {
  if (radius < 0.0) throw std::invalid_argument("inflation radius must be >= 0");
  OccupancyGrid out = grid;
  if (radius == 0.0) return out;

  // Offsets whose cell-center lies within radius of the source cell's area.
  const double res = grid.spec.resolution;
  const int reach = static_cast<int>(std::ceil(radius / res)) + 1;
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -reach; dy <= reach; ++dy) {
    for (int dx = -reach; dx <= reach; ++dx) {
      const double ex = std::max(0.0, (std::abs(dx) - 0.5) * res);
      const double ey = std::max(0.0, (std::abs(dy) - 0.5) * res);
      if (std::hypot(ex, ey) <= radius) offsets.emplace_back(dx, dy);
    }
  }
  for (int iy = 0; iy < grid.spec.height; ++iy) {
    for (int ix = 0; ix < grid.spec.width; ++ix) {
      if (grid.at(ix, iy) != CellState::kOccupied) continue;
      for (const auto& [dx, dy] : offsets) {
        if (out.in_bounds(ix + dx, iy + dy) &&
            out.at(ix + dx, iy + dy) == CellState::kFree)
          out.set(ix + dx, iy + dy, CellState::kOccupied);
      }
    }
  }
  return out;
}

}  // namespace pollisim
