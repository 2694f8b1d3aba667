#include "pollisim/planning.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <set>

namespace pollisim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Exact euclidean distance transform with generator tracking.
/// Distances are in cell units; generators are cell coordinates of the
/// nearest occupied cell (-1,-1 when no occupied cell exists).
struct Edt {
  std::vector<double> dist;                 // cell units
  std::vector<std::pair<int, int>> gen;     // nearest occupied cell
};

Edt distance_transform(const OccupancyGrid& grid) {
  const int w = grid.spec.width, h = grid.spec.height;
  Edt out;
  out.dist.assign(static_cast<std::size_t>(w) * h, kInf);
  out.gen.assign(static_cast<std::size_t>(w) * h, {-1, -1});

  // Pass 1: per column, nearest occupied row for every cell of that column.
  std::vector<int> col_near(static_cast<std::size_t>(w) * h, -1);
  for (int ix = 0; ix < w; ++ix) {
    int last = -1;
    for (int iy = 0; iy < h; ++iy) {
      if (grid.at(ix, iy) == CellState::kOccupied) last = iy;
      col_near[static_cast<std::size_t>(iy) * w + ix] = last;
    }
    last = -1;
    for (int iy = h - 1; iy >= 0; --iy) {
      if (grid.at(ix, iy) == CellState::kOccupied) last = iy;
      const std::size_t at = static_cast<std::size_t>(iy) * w + ix;
      const int down = col_near[at];
      if (last >= 0 && (down < 0 || last - iy < iy - down)) col_near[at] = last;
    }
  }

  // Pass 2: per row, minimize over source columns.
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const std::size_t at = static_cast<std::size_t>(iy) * w + ix;
      double best = kInf;
      std::pair<int, int> best_gen{-1, -1};
      for (int cx = 0; cx < w; ++cx) {
        const int jy = col_near[static_cast<std::size_t>(iy) * w + cx];
        if (jy < 0) continue;
        const double ddx = ix - cx;
        const double ddy = iy - jy;
        const double d2 = ddx * ddx + ddy * ddy;
        if (d2 < best) {
          best = d2;
          best_gen = {cx, jy};
        }
      }
      out.dist[at] = best == kInf ? kInf : std::sqrt(best);
      out.gen[at] = best_gen;
    }
  }
  return out;
}

/// Classic two-subiteration thinning; preserves 8-connectivity of the mask.
void thin_mask(std::vector<std::uint8_t>& mask, int w, int h) {
  const auto at = [&](int x, int y) -> std::uint8_t {
    if (x < 0 || x >= w || y < 0 || y >= h) return 0;
    return mask[static_cast<std::size_t>(y) * w + x];
  };
  bool changed = true;
  std::vector<std::size_t> kill;
  while (changed) {
    changed = false;
    for (int phase = 0; phase < 2; ++phase) {
      kill.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!at(x, y)) continue;
          const int p2 = at(x, y - 1), p3 = at(x + 1, y - 1), p4 = at(x + 1, y);
          const int p5 = at(x + 1, y + 1), p6 = at(x, y + 1), p7 = at(x - 1, y + 1);
          const int p8 = at(x - 1, y), p9 = at(x - 1, y - 1);
          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (b < 2 || b > 6) continue;
          const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
          int a = 0;
          for (int k = 0; k < 8; ++k)
            if (seq[k] == 0 && seq[k + 1] == 1) ++a;
          if (a != 1) continue;
          if (phase == 0) {
            if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
          } else {
            if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
          }
          kill.push_back(static_cast<std::size_t>(y) * w + x);
        }
      }
      for (std::size_t k : kill) mask[k] = 0;
      if (!kill.empty()) changed = true;
    }
  }
}

}  // namespace

int VoronoiGraph::nearest_node(const Vec2& p) const {
  int best = -1;
  double best_d = kInf;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double d = (nodes[i] - p).squared_norm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::size_t VoronoiGraph::required_edge_total() const {
  std::set<int> ids;
  for (const auto& [key, list] : required) ids.insert(list.begin(), list.end());
  return ids.size();
}

std::vector<RowFace> row_faces(const std::vector<PlantRow>& rows) {
  std::vector<RowFace> faces;
  for (const PlantRow& row : rows) {
    for (Side side : {Side::kLeft, Side::kRight}) {
      faces.push_back(
          {{row.id, side}, row.face(side), row.axis(), row.side_normal(side), row.length()});
    }
  }
  return faces;
}

OccupancyGrid planning_grid(const WorldConfig& config, double resolution) {
  // One padding cell per side keeps the wall lines strictly inside the grid.
  GridSpec spec;
  spec.origin = {-resolution, -resolution, 0};
  spec.resolution = resolution;
  spec.width = static_cast<int>(std::ceil(config.room_width / resolution)) + 2;
  spec.height = static_cast<int>(std::ceil(config.room_length / resolution)) + 2;
  OccupancyGrid grid = rasterize(sample_boundary_points(config, resolution / 2.0), spec);
  for (int iy = 0; iy < spec.height; ++iy) {
    for (int ix = 0; ix < spec.width; ++ix) {
      const Vec2 c = grid.cell_center(ix, iy);
      bool solid = c.x <= 0.0 || c.x >= config.room_width || c.y <= 0.0 ||
                   c.y >= config.room_length;
      for (const PlantRow& row : config.rows) {
        if (solid) break;
        solid = row.rect().contains(c);
      }
      if (solid) grid.set(ix, iy, CellState::kOccupied);
    }
  }
  return grid;
}

VoronoiGraph build_voronoi(const OccupancyGrid& grid, const std::vector<RowFace>& faces,
                           double d_park) {
  const int w = grid.spec.width, h = grid.spec.height;
  bool any_free = false, any_occ = false;
  for (const CellState c : grid.values) {
    any_free |= c == CellState::kFree;
    any_occ |= c == CellState::kOccupied;
  }
  if (!any_free) throw NoFreeSpaceError("grid has no free cells");
  if (!any_occ) throw std::invalid_argument("grid has no occupied cells");

  const Edt edt = distance_transform(grid);

  // Ridge: free cells whose generator jumps by more than two cells across an
  // 8-neighbor boundary, i.e. the two nearest obstacles are mutually distant.
  std::vector<std::uint8_t> ridge(static_cast<std::size_t>(w) * h, 0);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const std::size_t at = static_cast<std::size_t>(iy) * w + ix;
      if (grid.at(ix, iy) != CellState::kFree) continue;
      const auto [gx, gy] = edt.gen[at];
      bool on_ridge = false;
      for (int dy = -1; dy <= 1 && !on_ridge; ++dy) {
        for (int dx = -1; dx <= 1 && !on_ridge; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = ix + dx, ny = iy + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          if (grid.at(nx, ny) != CellState::kFree) continue;
          const auto [ox, oy] = edt.gen[static_cast<std::size_t>(ny) * w + nx];
          const double jump = std::hypot(double(gx - ox), double(gy - oy));
          if (jump > 2.0) on_ridge = true;
        }
      }
      if (on_ridge) ridge[at] = 1;
    }
  }
  thin_mask(ridge, w, h);

  VoronoiGraph graph;
  std::vector<int> node_of(static_cast<std::size_t>(w) * h, -1);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const std::size_t at = static_cast<std::size_t>(iy) * w + ix;
      if (!ridge[at]) continue;
      node_of[at] = static_cast<int>(graph.nodes.size());
      graph.nodes.push_back(grid.cell_center(ix, iy));
    }
  }
  graph.adjacency.resize(graph.nodes.size());
  const double res = grid.spec.resolution;
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const int a = node_of[static_cast<std::size_t>(iy) * w + ix];
      if (a < 0) continue;
      // forward neighbors only, so each edge is created once
      constexpr int dx[4] = {1, -1, 0, 1};
      constexpr int dy[4] = {0, 1, 1, 1};
      const auto ridge_at = [&](int x, int y) {
        return x >= 0 && x < w && y >= 0 && y < h &&
               node_of[static_cast<std::size_t>(y) * w + x] >= 0;
      };
      for (int k = 0; k < 4; ++k) {
        const int nx = ix + dx[k], ny = iy + dy[k];
        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
        const int b = node_of[static_cast<std::size_t>(ny) * w + nx];
        if (b < 0) continue;
        const bool diagonal = k == 1 || k == 3;
        // A diagonal next to an elbow cell is redundant: the path already
        // exists through the elbow.
        if (diagonal && (ridge_at(ix + dx[k], iy) || ridge_at(ix, iy + dy[k]))) continue;
        const double len = diagonal ? res * std::sqrt(2.0) : res;
        const int eid = static_cast<int>(graph.edges.size());
        graph.edges.push_back({a, b, len});
        graph.adjacency[a].emplace_back(b, eid);
        graph.adjacency[b].emplace_back(a, eid);
      }
    }
  }

  // Tag edges flanking each row side.
  const double band = 1.5 * d_park;
  for (const RowFace& face : faces) {
    auto& list = graph.required[face.key];
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
      const Vec2 mid = (graph.nodes[graph.edges[e].a] + graph.nodes[graph.edges[e].b]) * 0.5;
      if ((mid - face.face.a).dot(face.outward) <= 0.0) continue;  // behind the row
      if (distance_to_segment(mid, face.face) > band) continue;
      const double along = (mid - face.face.a).dot(face.axis);
      if (along < 0.0 || along > face.length) continue;
      list.push_back(static_cast<int>(e));
    }
  }
  return graph;
}

namespace {

/// Dijkstra over the roadmap from source; stops early once `stop` returns
/// true for a settled node. Returns that node or -1.
int graph_dijkstra(const VoronoiGraph& graph, int source, std::vector<double>& dist,
                   std::vector<int>& parent, const std::function<bool(int)>& stop) {
  dist.assign(graph.nodes.size(), kInf);
  parent.assign(graph.nodes.size(), -1);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  dist[source] = 0.0;
  pq.emplace(0.0, source);
  std::vector<std::uint8_t> settled(graph.nodes.size(), 0);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (settled[u]) continue;
    settled[u] = 1;
    if (stop(u)) return u;
    for (const auto& [v, eid] : graph.adjacency[u]) {
      const double nd = d + graph.edges[eid].length;
      if (nd < dist[v]) {
        dist[v] = nd;
        parent[v] = u;
        pq.emplace(nd, v);
      }
    }
  }
  return -1;
}

}  // namespace

InspectionRoute plan_inspection(const VoronoiGraph& graph, int start_node) {
  InspectionRoute route;
  route.node_path.push_back(start_node);

  std::set<int> uncovered;
  for (const auto& [key, list] : graph.required) uncovered.insert(list.begin(), list.end());

  const auto edge_between = [&graph](int u, int v) -> int {
    for (const auto& [n, eid] : graph.adjacency[u])
      if (n == v) return eid;
    return -1;
  };

  int cur = start_node;
  std::vector<double> dist;
  std::vector<int> parent;
  while (!uncovered.empty()) {
    const auto incident_uncovered = [&](int node) {
      for (const auto& [n, eid] : graph.adjacency[node])
        if (uncovered.count(eid)) return true;
      return false;
    };
    const int target = graph_dijkstra(graph, cur, dist, parent, incident_uncovered);
    if (target < 0)
      throw RouteUnreachableError("a required edge is unreachable from the start node");

    // Walk to the target, covering any required edges the walk happens to use.
    std::vector<int> leg;
    for (int n = target; n != cur; n = parent[n]) leg.push_back(n);
    std::reverse(leg.begin(), leg.end());
    int prev = cur;
    for (int n : leg) {
      const int eid = edge_between(prev, n);
      uncovered.erase(eid);
      route.length += graph.edges[eid].length;
      route.node_path.push_back(n);
      prev = n;
    }

    // Traverse the lowest-id uncovered required edge at the target.
    int chosen = -1, far_end = -1;
    for (const auto& [n, eid] : graph.adjacency[target]) {
      if (uncovered.count(eid) && (chosen < 0 || eid < chosen)) {
        chosen = eid;
        far_end = n;
      }
    }
    if (chosen < 0) continue;  // covered by the walk itself
    uncovered.erase(chosen);
    route.length += graph.edges[chosen].length;
    route.node_path.push_back(far_end);
    cur = far_end;
  }
  return route;
}

CandidateCell next_pollination_cell(const Pose2& robot,
                                    const std::vector<CandidateCell>& candidates,
                                    const CostParams& params) {
  const CandidateCell* best = nullptr;
  double best_cost = kInf;
  for (const CandidateCell& c : candidates) {
    if (c.n_f <= 0) continue;  // the cost is undefined at zero flowers
    const double d = (c.parking.position() - robot.position()).norm();
    const double cost = params.c_d * d + params.c_f / c.n_f;
    if (cost < best_cost || (cost == best_cost && best && c.cell < best->cell)) {
      best_cost = cost;
      best = &c;
    }
  }
  if (!best) throw NoCandidatesError("no candidate cell has observed flowers");
  return *best;
}

bool line_free(const OccupancyGrid& grid, const Vec2& a, const Vec2& b) {
  const double len = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / (grid.spec.resolution * 0.5))));
  for (int i = 0; i <= steps; ++i) {
    const Vec2 p = a + (b - a) * (static_cast<double>(i) / steps);
    if (grid.occupied_at(p)) return false;
  }
  return true;
}

std::vector<GridCell> dijkstra_path(const OccupancyGrid& grid, const GridCell& start,
                                    const GridCell& goal) {
  const int w = grid.spec.width, h = grid.spec.height;
  const auto free = [&](int ix, int iy) {
    return grid.in_bounds(ix, iy) && grid.at(ix, iy) == CellState::kFree;
  };
  if (!free(start.ix, start.iy) || !free(goal.ix, goal.iy))
    throw BlockedEndpointError("start or goal cell is not free");

  const auto idx = [w](int ix, int iy) { return static_cast<std::size_t>(iy) * w + ix; };
  std::vector<double> dist(static_cast<std::size_t>(w) * h, kInf);
  std::vector<int> parent(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::uint8_t> settled(static_cast<std::size_t>(w) * h, 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  dist[idx(start.ix, start.iy)] = 0.0;
  pq.emplace(0.0, idx(start.ix, start.iy));
  const std::size_t goal_idx = idx(goal.ix, goal.iy);

  constexpr int dx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  constexpr int dy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  const double sqrt2 = std::sqrt(2.0);

  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (settled[u]) continue;
    settled[u] = 1;
    if (u == goal_idx) break;
    const int ux = static_cast<int>(u % w), uy = static_cast<int>(u / w);
    for (int k = 0; k < 8; ++k) {
      const int nx = ux + dx[k], ny = uy + dy[k];
      if (!free(nx, ny)) continue;
      if (k >= 4 && (!free(ux + dx[k], uy) || !free(ux, uy + dy[k])))
        continue;  // no cutting occupied corners
      const double nd = d + (k < 4 ? 1.0 : sqrt2);
      const std::size_t v = idx(nx, ny);
      if (nd < dist[v]) {
        dist[v] = nd;
        parent[v] = static_cast<int>(u);
        pq.emplace(nd, v);
      }
    }
  }
  if (dist[goal_idx] == kInf) throw NoPathError("goal cell is unreachable");

  std::vector<GridCell> path;
  for (std::size_t u = goal_idx;;) {
    path.push_back({static_cast<int>(u % w), static_cast<int>(u / w)});
    if (parent[u] < 0) break;
    u = static_cast<std::size_t>(parent[u]);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

double path_cost(const std::vector<GridCell>& path) {
  double cost = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const int dx = std::abs(path[i].ix - path[i - 1].ix);
    const int dy = std::abs(path[i].iy - path[i - 1].iy);
    cost += (dx + dy == 2) ? std::sqrt(2.0) : 1.0;
  }
  return cost;
}

DistanceField::DistanceField(const OccupancyGrid& grid) : grid_(grid) {
  const Edt edt = distance_transform(grid);
  dist_.resize(edt.dist.size());
  for (std::size_t i = 0; i < dist_.size(); ++i)
    dist_[i] = edt.dist[i] == kInf ? 1e9 : edt.dist[i] * grid.spec.resolution;
}

double DistanceField::distance(const Vec2& world_point) const {
  int ix, iy;
  if (!grid_.world_to_cell(world_point, ix, iy)) return 0.0;
  return dist_[static_cast<std::size_t>(iy) * grid_.spec.width + ix];
}

namespace {

struct Rollout {
  Pose2 end;
  double min_clearance{kInf};
  bool collided{false};
};

Rollout simulate_arc(const OccupancyGrid& grid, const DistanceField& field, Pose2 pose,
                     double v, double omega, double duration, double dt) {
  Rollout r;
  const int steps = std::max(1, static_cast<int>(std::ceil(duration / dt)));
  for (int k = 0; k < steps; ++k) {
    if (std::abs(omega) > 1e-9) {
      const double rad = v / omega;
      pose.x += rad * (std::sin(pose.theta + omega * dt) - std::sin(pose.theta));
      pose.y += rad * (-std::cos(pose.theta + omega * dt) + std::cos(pose.theta));
      pose.theta = wrap_angle(pose.theta + omega * dt);
    } else {
      pose.x += v * dt * std::cos(pose.theta);
      pose.y += v * dt * std::sin(pose.theta);
    }
    if (grid.occupied_at(pose.position())) {
      r.collided = true;
      break;
    }
    r.min_clearance = std::min(r.min_clearance, field.distance(pose.position()));
  }
  r.end = pose;
  return r;
}

}  // namespace

VelocityCommand dwa_step(const RobotState& state, const Vec2& local_goal,
                         const DistanceField& field, const DWAParams& params) {
  const OccupancyGrid& grid = field.grid();
  const double v_lo = std::max(params.v_min, state.v - params.accel_v * params.dt);
  const double v_hi = std::min(params.v_max, state.v + params.accel_v * params.dt);
  const double w_lo = std::max(params.omega_min, state.omega - params.accel_omega * params.dt);
  const double w_hi = std::min(params.omega_max, state.omega + params.accel_omega * params.dt);

  const auto heading_error = [&](const Pose2& p) {
    const Vec2 d = local_goal - p.position();
    return std::abs(wrap_angle(std::atan2(d.y, d.x) - p.theta));
  };

  VelocityCommand best;
  double best_score = -kInf;
  bool any = false;
  for (int i = 0; i < params.v_samples; ++i) {
    const double v = params.v_samples > 1
                         ? v_lo + (v_hi - v_lo) * i / (params.v_samples - 1)
                         : v_lo;
    for (int j = 0; j < params.omega_samples; ++j) {
      const double omega = params.omega_samples > 1
                               ? w_lo + (w_hi - w_lo) * j / (params.omega_samples - 1)
                               : w_lo;
      const Rollout roll =
          simulate_arc(grid, field, state.pose, v, omega, params.horizon, params.dt);
      if (roll.collided) continue;

      // Must be able to stop from the end of the horizon.
      if (std::abs(v) > 1e-9) {
        Pose2 pose = roll.end;
        double bv = v;
        bool stopped_safely = true;
        while (std::abs(bv) > 1e-9) {
          bv = bv > 0 ? std::max(0.0, bv - params.accel_v * params.dt)
                      : std::min(0.0, bv + params.accel_v * params.dt);
          const Rollout brake = simulate_arc(grid, field, pose, bv, omega, params.dt, params.dt);
          if (brake.collided) {
            stopped_safely = false;
            break;
          }
          pose = brake.end;
        }
        if (!stopped_safely) continue;
      }

      const double heading = 1.0 - heading_error(roll.end) / kPi;
      const double clearance =
          std::clamp(roll.min_clearance / params.clearance_cap, 0.0, 1.0);
      const double velocity = params.v_max > 0.0 ? std::clamp(v / params.v_max, 0.0, 1.0) : 0.0;
      const double score = params.w_heading * heading + params.w_clearance * clearance +
                           params.w_velocity * velocity;
      if (score > best_score) {
        best_score = score;
        best = {v, omega};
        any = true;
      }
    }
  }
  if (any) return best;

  // Nothing admissible: stop and rotate toward the goal.
  const Vec2 d = local_goal - state.pose.position();
  const double err = wrap_angle(std::atan2(d.y, d.x) - state.pose.theta);
  return {0.0, err >= 0.0 ? w_hi : w_lo};
}

}  // namespace pollisim
