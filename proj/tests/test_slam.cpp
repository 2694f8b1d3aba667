#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "pollisim/rng.hpp"
#include "pollisim/slam.hpp"

using namespace pollisim;

namespace {

Eigen::Matrix3d random_spd(Rng& rng) {
  Eigen::Matrix3d l = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < i; ++j) l(i, j) = rng.uniform(-0.3, 0.3);
    l(i, i) = rng.uniform(0.5, 2.0);
  }
  return l * l.transpose();
}

FactorGraph random_graph(Rng& rng, int nodes, std::vector<Pose2>& estimate) {
  FactorGraph graph;
  estimate.clear();
  for (int i = 0; i < nodes; ++i) {
    graph.add_node();
    estimate.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3)});
  }
  for (int i = 0; i + 1 < nodes; ++i) {
    graph.odometry.push_back({i, i + 1,
                              {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-2, 2)},
                              random_spd(rng)});
  }
  if (nodes > 2)
    graph.odometry.push_back(
        {0, nodes - 1, {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-2, 2)},
         random_spd(rng)});
  graph.anchors.push_back({0, {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-2, 2)},
                           random_spd(rng)});
  return graph;
}

PointCloud2 random_cloud(Rng& rng, int n, double extent) {
  PointCloud2 cloud;
  for (int i = 0; i < n; ++i)
    cloud.push_back({rng.uniform(0.0, extent), rng.uniform(0.0, extent)});
  return cloud;
}

PointCloud2 apply(const Pose2& t, const PointCloud2& cloud) {
  PointCloud2 out;
  out.reserve(cloud.size());
  for (const Vec2& p : cloud) out.push_back(transform_point(t, p));
  return out;
}

PointCloud2 rectangle_walls(double w, double l, double spacing) {
  PointCloud2 cloud;
  for (double x = 0.0; x <= w; x += spacing) {
    cloud.push_back({x, 0.0});
    cloud.push_back({x, l});
  }
  for (double y = spacing; y < l; y += spacing) {
    cloud.push_back({0.0, y});
    cloud.push_back({w, y});
  }
  return cloud;
}

}  // namespace

TEST_SUITE_BEGIN("slam");

TEST_CASE("icp self-match is the identity") {
  Rng rng(11);
  const PointCloud2 cloud = random_cloud(rng, 200, 4.0);
  const IcpResult res = icp_match(cloud, cloud, Pose2{}, {30, 0.5, 1e-9});
  CHECK(std::abs(res.transform.x) < 1e-9);
  CHECK(std::abs(res.transform.y) < 1e-9);
  CHECK(std::abs(res.transform.theta) < 1e-9);
  CHECK(res.match_fraction == doctest::Approx(1.0));
  CHECK(res.rms_error < 1e-9);
}

TEST_CASE("icp recovers a 10 degree / (0.1, 0.2) transform") {
  Rng rng(12);
  const PointCloud2 source = random_cloud(rng, 400, 4.0);
  const Pose2 gen{0.1, 0.2, deg2rad(10.0)};
  const PointCloud2 target = apply(gen, source);
  const IcpResult res = icp_match(source, target, Pose2{0.05, 0.15, deg2rad(7.0)},
                                  {60, 0.5, 1e-12});
  CHECK(std::abs(res.transform.x - gen.x) < 1e-3);
  CHECK(std::abs(res.transform.y - gen.y) < 1e-3);
  CHECK(std::abs(res.transform.theta - gen.theta) < 1e-3);
}

TEST_CASE("icp recovery property over seeded transforms") {
  int good = 0;
  const int trials = 30;
  for (int seed = 0; seed < trials; ++seed) {
    Rng rng(1000 + seed);
    const PointCloud2 source = random_cloud(rng, 500, 4.0);
    const Pose2 gen{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                    deg2rad(rng.uniform(-15.0, 15.0))};
    const PointCloud2 target = apply(gen, source);
    const IcpResult res = icp_match(source, target, Pose2{}, {80, 0.5, 1e-12});
    const bool ok = std::abs(res.transform.x - gen.x) < 1e-3 &&
                    std::abs(res.transform.y - gen.y) < 1e-3 &&
                    std::abs(res.transform.theta - gen.theta) < 1e-3;
    good += ok ? 1 : 0;
  }
  CHECK(good >= trials * 95 / 100);
}

TEST_CASE("icp with disjoint clouds is degenerate") {
  Rng rng(13);
  const PointCloud2 a = random_cloud(rng, 50, 1.0);
  PointCloud2 b = a;
  for (Vec2& p : b) p.x += 100.0;
  CHECK_THROWS_AS(icp_match(a, b, Pose2{}, {10, 0.5, 1e-9}), IcpDegenerateError);
}

TEST_CASE("loop closure gate is a closed inequality") {
  IcpResult res;
  res.match_fraction = 0.9;
  CHECK(loop_closure_check(res, 0.8));
  res.match_fraction = 0.79;
  CHECK(!loop_closure_check(res, 0.8));
  res.match_fraction = 0.8;
  CHECK(loop_closure_check(res, 0.8));
}

TEST_CASE("consistent graph has zero residual") {
  FactorGraph graph;
  graph.num_nodes = 3;
  const std::vector<Pose2> truth{{0, 0, 0}, {1, 0, 0}, {2, 0, kPi / 2}};
  graph.odometry.push_back(
      {0, 1, compose(inverse(truth[0]), truth[1]), Eigen::Matrix3d::Identity()});
  graph.odometry.push_back(
      {1, 2, compose(inverse(truth[1]), truth[2]), Eigen::Matrix3d::Identity()});
  graph.anchors.push_back({0, truth[0], Eigen::Matrix3d::Identity()});
  const Linearization lin = graph_residual(graph, truth);
  CHECK(lin.residual.norm() < 1e-12);
}

TEST_CASE("single anchor offset reads through as the residual") {
  FactorGraph graph;
  graph.num_nodes = 1;
  graph.anchors.push_back({0, {0, 0, 0}, Eigen::Matrix3d::Identity()});
  const Linearization lin = graph_residual(graph, {{0.1, 0.0, 0.0}});
  CHECK(lin.residual(0) == doctest::Approx(0.1));
  CHECK(std::abs(lin.residual(1)) < 1e-12);
  CHECK(std::abs(lin.residual(2)) < 1e-12);
}

TEST_CASE("analytic jacobian matches central finite differences") {
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(500 + seed);
    std::vector<Pose2> estimate;
    const int nodes = 3 + seed % 8;  // up to 10
    const FactorGraph graph = random_graph(rng, nodes, estimate);
    const Linearization lin = graph_residual(graph, estimate);
    const Eigen::MatrixXd analytic = Eigen::MatrixXd(lin.jacobian);

    const double h = 1e-6;
    Eigen::MatrixXd fd(analytic.rows(), analytic.cols());
    for (int v = 0; v < 3 * nodes; ++v) {
      std::vector<Pose2> plus = estimate, minus = estimate;
      const int n = v / 3, c = v % 3;
      auto& pv = c == 0 ? plus[n].x : c == 1 ? plus[n].y : plus[n].theta;
      auto& mv = c == 0 ? minus[n].x : c == 1 ? minus[n].y : minus[n].theta;
      pv += h;
      mv -= h;
      fd.col(v) = (graph_residual(graph, plus).residual -
                   graph_residual(graph, minus).residual) /
                  (2.0 * h);
    }
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    CHECK((analytic - fd).cwiseAbs().maxCoeff() / scale < 1e-5);
  }
}

TEST_CASE("prior-only optimization converges to the anchor") {
  FactorGraph graph;
  graph.num_nodes = 1;
  graph.anchors.push_back({0, {1.0, 2.0, 0.3}, Eigen::Matrix3d::Identity()});
  const LmResult res = optimize_lm(graph, {{0, 0, 0}});
  CHECK(res.estimate[0].x == doctest::Approx(1.0));
  CHECK(res.estimate[0].y == doctest::Approx(2.0));
  CHECK(res.estimate[0].theta == doctest::Approx(0.3));
}

TEST_CASE("anchored odometry chain composes") {
  FactorGraph graph;
  graph.num_nodes = 3;
  graph.anchors.push_back({0, {0, 0, 0}, Eigen::Matrix3d::Identity()});
  graph.odometry.push_back({0, 1, {1, 0, 0}, Eigen::Matrix3d::Identity()});
  graph.odometry.push_back({1, 2, {1, 0, kPi / 2}, Eigen::Matrix3d::Identity()});
  const LmResult res = optimize_lm(graph, {{0, 0, 0}, {0.5, 0.5, 0.5}, {0, 0, 0}});
  CHECK(res.estimate[2].x == doctest::Approx(2.0));
  CHECK(std::abs(res.estimate[2].y) < 1e-6);
  CHECK(res.estimate[2].theta == doctest::Approx(kPi / 2));
}

TEST_CASE("noisy loop: accepted costs are monotone and beat dead reckoning") {
  Rng rng(21);
  // Square loop of 20 nodes, 1 m legs, noisy odometry, anchored at both ends.
  std::vector<Pose2> truth{{0, 0, 0}};
  std::vector<Pose2> rels;
  for (int leg = 0; leg < 4; ++leg) {
    for (int i = 0; i < 5; ++i) {
      const Pose2 rel{1.0, 0.0, i == 4 ? kPi / 2 : 0.0};
      rels.push_back(rel);
      truth.push_back(compose(truth.back(), rel));
    }
  }
  FactorGraph graph;
  graph.num_nodes = static_cast<int>(truth.size());
  const Eigen::Matrix3d info = Eigen::Vector3d(100, 100, 400).asDiagonal();
  std::vector<Pose2> dead{{0, 0, 0}};
  for (std::size_t i = 0; i < rels.size(); ++i) {
    const Pose2 noisy{rels[i].x + rng.gauss(0.03), rels[i].y + rng.gauss(0.03),
                      wrap_angle(rels[i].theta + rng.gauss(0.015))};
    graph.odometry.push_back({static_cast<int>(i), static_cast<int>(i + 1), noisy, info});
    dead.push_back(compose(dead.back(), noisy));
  }
  graph.anchors.push_back({0, truth.front(), Eigen::Matrix3d::Identity() * 1e4});
  graph.anchors.push_back(
      {graph.num_nodes - 1, truth.back(), Eigen::Matrix3d::Identity() * 1e4});

  const LmResult res = optimize_lm(graph, dead, {1e-4, 100, 1e-12});
  for (std::size_t i = 1; i < res.cost_history.size(); ++i)
    CHECK(res.cost_history[i] <= res.cost_history[i - 1]);
  CHECK(res.cost_history.back() <= res.cost_history.front());

  const double err_opt =
      (res.estimate.back().position() - truth.back().position()).norm();
  const double err_dead = (dead.back().position() - truth.back().position()).norm();
  CHECK(err_opt < err_dead);
  for (const Pose2& p : res.estimate) {
    CHECK(p.theta > -kPi);
    CHECK(p.theta <= kPi);
  }
}

TEST_CASE("graph validation rejects bad input") {
  FactorGraph graph;
  graph.num_nodes = 2;
  graph.odometry.push_back({0, 1, {1, 0, 0}, Eigen::Matrix3d::Identity()});
  CHECK_THROWS_AS(optimize_lm(graph, {{0, 0, 0}, {1, 0, 0}}), std::invalid_argument);
  graph.anchors.push_back({0, {0, 0, 0}, Eigen::Matrix3d::Identity() * -1.0});
  CHECK_THROWS_AS(optimize_lm(graph, {{0, 0, 0}, {1, 0, 0}}), std::invalid_argument);
}

TEST_CASE("initial offset of an aligned cloud is the identity") {
  const PointCloud2 prior = rectangle_walls(8.0, 6.0, 0.05);
  const Pose2 offset = estimate_initial_offset(prior, prior, {12, 3, 0.8, {40, 0.5, 1e-9}});
  CHECK(std::abs(offset.x) < 1e-3);
  CHECK(std::abs(offset.y) < 1e-3);
  CHECK(std::abs(offset.theta) < 1e-3);
}

TEST_CASE("initial offset recovers a large displacement from a partial view") {
  // Walls plus one off-center row outline; the row breaks the rectangle's
  // 180-degree symmetry the way real furniture does. Dense sampling keeps
  // point-to-point lattice minima below the checked tolerance.
  PointCloud2 prior = rectangle_walls(8.0, 6.0, 0.01);
  const OrientedRect row{{2.0, 3.0}, {5.44, 3.0}, 0.25};
  for (const Segment& e : row.edges()) {
    const double len = (e.b - e.a).norm();
    for (double s = 0.0; s < len; s += 0.01) prior.push_back(e.a + (e.b - e.a) * (s / len));
  }
  const Pose2 gen{1.0, -0.5, deg2rad(120.0)};
  PointCloud2 local;
  const Pose2 inv = inverse(gen);
  for (const Vec2& p : prior)
    if (p.x < 6.5) local.push_back(transform_point(inv, p));
  const Pose2 est = estimate_initial_offset(local, prior, {12, 3, 0.8, {60, 0.5, 1e-12}});
  CHECK(std::abs(est.x - gen.x) < 1e-2);
  CHECK(std::abs(est.y - gen.y) < 1e-2);
  CHECK(std::abs(wrap_angle(est.theta - gen.theta)) < 1e-2);
}

TEST_CASE("initial offset fails on an unrelated cloud") {
  const PointCloud2 prior = rectangle_walls(8.0, 6.0, 0.05);
  PointCloud2 local;
  for (int i = 0; i < 360; ++i) {
    const double a = 2.0 * kPi * i / 360;
    local.push_back({10.0 * std::cos(a), 10.0 * std::sin(a)});
  }
  CHECK_THROWS_AS(estimate_initial_offset(local, prior, {8, 2, 0.8, {20, 0.3, 1e-9}}),
                  NoAlignmentError);
}

TEST_CASE("rasterize cells") {
  const GridSpec spec{{0, 0, 0}, 0.1, 10, 10};

  SUBCASE("empty cloud is all free") {
    const OccupancyGrid g = rasterize({}, spec);
    for (const CellState c : g.values) CHECK(c == CellState::kFree);
  }
  SUBCASE("single point occupies exactly its cell") {
    const OccupancyGrid g = rasterize({{0.05, 0.05}}, spec);
    int occupied = 0;
    for (const CellState c : g.values) occupied += c == CellState::kOccupied;
    CHECK(occupied == 1);
    CHECK(g.at(0, 0) == CellState::kOccupied);
  }
  SUBCASE("points along a segment occupy the cells underneath") {
    PointCloud2 cloud;
    for (int i = 0; i < 100; ++i) cloud.push_back({i / 100.0, 0.0});
    const OccupancyGrid g = rasterize(cloud, spec);
    std::set<int> expect;  // per-point floor division oracle
    for (const Vec2& p : cloud) expect.insert(static_cast<int>(std::floor(p.x / 0.1)));
    CHECK(expect.size() == 10);
    for (int ix = 0; ix < 10; ++ix)
      CHECK(g.at(ix, 0) == (expect.count(ix) ? CellState::kOccupied : CellState::kFree));
  }
}

TEST_CASE("inflate grows occupied cells by a euclidean disc") {
  const GridSpec spec{{0, 0, 0}, 0.1, 9, 9};
  OccupancyGrid g = rasterize({{0.45, 0.45}}, spec);  // center cell (4,4)

  SUBCASE("radius zero is the identity") {
    const OccupancyGrid out = inflate(g, 0.0);
    CHECK(out.values == g.values);
  }
  SUBCASE("one-cell radius gives a 3x3 block") {
    const OccupancyGrid out = inflate(g, 0.1);
    int occupied = 0;
    for (const CellState c : out.values) occupied += c == CellState::kOccupied;
    CHECK(occupied == 9);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) CHECK(out.at(4 + dx, 4 + dy) == CellState::kOccupied);
  }
  SUBCASE("fully occupied grid is a fixed point") {
    OccupancyGrid full = g;
    for (CellState& c : full.values) c = CellState::kOccupied;
    const OccupancyGrid out = inflate(full, 0.3);
    CHECK(out.values == full.values);
  }
  SUBCASE("matches the brute-force point-to-cell distance rule") {
    const double radius = 0.23;
    const OccupancyGrid out = inflate(g, radius);
    for (int iy = 0; iy < 9; ++iy) {
      for (int ix = 0; ix < 9; ++ix) {
        const double ex = std::max(0.0, (std::abs(ix - 4) - 0.5) * 0.1);
        const double ey = std::max(0.0, (std::abs(iy - 4) - 0.5) * 0.1);
        const bool within = std::hypot(ex, ey) <= radius;
        CHECK((out.at(ix, iy) == CellState::kOccupied) == within);
      }
    }
  }
}

TEST_SUITE_END();
