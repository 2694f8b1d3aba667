#include "pollisim/arm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace pollisim {

double joint_distance(const JointConfig& a, const JointConfig& b) {
  const double d1 = a.q1 - b.q1, d2 = a.q2 - b.q2, d3 = a.q3 - b.q3;
  return std::sqrt(d1 * d1 + d2 * d2 + d3 * d3);
}

TipPose fk(const ArmSpec& arm, const JointConfig& q) {
  TipPose tip;
  double angle = 0.0;
  for (int i = 0; i < 3; ++i) {
    angle += q[i];
    tip.position += Vec2{std::cos(angle), std::sin(angle)} * arm.links[i];
  }
  tip.orientation = wrap_angle(angle);
  return tip;
}

JointConfig ik(const ArmSpec& arm, const IkTarget& target, const JointConfig& seed,
               const IkParams& params) {
  if (target.position.norm() > arm.reach() + 1e-9)
    throw TargetUnreachableError("target beyond arm reach");

  JointConfig q = seed;
  const bool with_angle = target.orientation.has_value();
  const int rows = with_angle ? 3 : 2;

  for (int iter = 0; iter < params.max_iters; ++iter) {
    const TipPose tip = fk(arm, q);
    const Vec2 pe = target.position - tip.position;
    const double ae = with_angle ? wrap_angle(*target.orientation - tip.orientation) : 0.0;
    if (pe.norm() < params.pos_tol && std::abs(ae) < params.angle_tol) return q;

    // Planar chain jacobian: column i is the tip velocity from joint i.
    Eigen::MatrixXd jac(rows, 3);
    double angle = 0.0;
    std::array<Vec2, 4> joints{};  // joint positions, joints[3] = tip
    for (int i = 0; i < 3; ++i) {
      angle += q[i];
      joints[i + 1] = joints[i] + Vec2{std::cos(angle), std::sin(angle)} * arm.links[i];
    }
    for (int i = 0; i < 3; ++i) {
      const Vec2 r = joints[3] - joints[i];
      jac(0, i) = -r.y;
      jac(1, i) = r.x;
      if (with_angle) jac(2, i) = 1.0;
    }

    Eigen::VectorXd err(rows);
    err(0) = pe.x;
    err(1) = pe.y;
    if (with_angle) err(2) = ae;

    const Eigen::MatrixXd jjt = jac * jac.transpose() +
                                params.damping * params.damping *
                                    Eigen::MatrixXd::Identity(rows, rows);
    const Eigen::VectorXd dq = jac.transpose() * jjt.ldlt().solve(err);
    for (int i = 0; i < 3; ++i) {
      q[i] = std::clamp(q[i] + dq(i), arm.joint_limits[i][0], arm.joint_limits[i][1]);
    }
  }
  throw IkNoConvergenceError("inverse kinematics did not converge");
}

JointConfig ik_multistart(const ArmSpec& arm, const IkTarget& target,
                          const JointConfig& seed, const IkParams& params) {
  const Vec2 p = target.position;
  const double r = p.norm();
  const double aim = std::atan2(p.y, p.x);

  std::vector<JointConfig> seeds;
  // Analytic elbow solutions of the reduced two-link chain (third link along).
  const double l1 = arm.links[0], l2e = arm.links[1] + arm.links[2];
  const double c2 = std::clamp((r * r - l1 * l1 - l2e * l2e) / (2.0 * l1 * l2e), -1.0, 1.0);
  for (const double sign : {1.0, -1.0}) {
    const double q2 = sign * std::acos(c2);
    const double q1 = aim - std::atan2(l2e * std::sin(q2), l1 + l2e * std::cos(q2));
    seeds.push_back({wrap_angle(q1), q2, 0.0});
  }
  seeds.push_back({aim, 0.3, -0.3});
  seeds.push_back(seed);
  seeds.push_back({aim, 2.2, -2.2});
  seeds.push_back({aim, -2.2, 2.2});

  for (JointConfig& s : seeds)
    for (int i = 0; i < 3; ++i)
      s[i] = std::clamp(s[i], arm.joint_limits[i][0], arm.joint_limits[i][1]);

  for (std::size_t i = 0; i < seeds.size(); ++i) {
    try {
      return ik(arm, target, seeds[i], params);
    } catch (const IkNoConvergenceError&) {
      if (i + 1 == seeds.size()) throw;
    }
  }
  throw IkNoConvergenceError("inverse kinematics did not converge");
}

Vec3 arm_base_position(const ArmSpec& arm, const Pose2& robot_pose) {
  const Vec2 base = transform_point(robot_pose, {arm.mount_forward, 0.0});
  return {base.x, base.y, arm.mount_height};
}

Vec2 to_arm_plane(const Vec3& base, const Vec3& point) {
  const Vec2 flat = point.xy() - base.xy();
  return {flat.norm(), point.z - base.z};
}

std::vector<FlowerTarget> survey_workspace(const World& world, const GridCellRef& cell,
                                           const ArmSpec& arm, double sigma_far, Rng& rng) {
  const Pose2 park = world.parking_pose(cell);
  const Vec3 base = arm_base_position(arm, park);
  std::vector<FlowerTarget> targets;
  for (int fi : world.flowers_in_cell(cell)) {
    const Flower& f = world.flowers[fi];
    if (f.state != FlowerState::kReady) continue;
    if ((f.position - base).norm() > arm.reach()) continue;
    FlowerTarget t;
    t.flower_id = f.id;
    t.position = {f.position.x + rng.gauss(sigma_far), f.position.y + rng.gauss(sigma_far),
                  f.position.z + rng.gauss(sigma_far)};
    t.sigma = sigma_far;
    targets.push_back(t);
  }
  return targets;
}

namespace {

std::vector<JointConfig> solve_targets(const std::vector<PlanarTarget>& targets,
                                       const ArmSpec& arm, const JointConfig& q_start) {
  std::vector<JointConfig> configs;
  configs.reserve(targets.size());
  for (const PlanarTarget& t : targets)
    configs.push_back(ik_multistart(arm, {t.position, std::nullopt}, q_start));
  return configs;
}

double sequence_cost(const std::vector<int>& order, const std::vector<JointConfig>& configs,
                     const JointConfig& q_start) {
  double cost = 0.0;
  JointConfig cur = q_start;
  for (int i : order) {
    cost += joint_distance(cur, configs[i]);
    cur = configs[i];
  }
  return cost;
}

}  // namespace

SequencePlan plan_sequence_exact(const std::vector<PlanarTarget>& targets,
                                 const ArmSpec& arm, const JointConfig& q_start) {
  const int n = static_cast<int>(targets.size());
  if (n < 1) throw std::invalid_argument("plan_sequence_exact needs at least one target");
  if (n > 9) throw TooManyTargetsError("brute-force sequencing is capped at 9 targets");

  SequencePlan plan;
  plan.configs = solve_targets(targets, arm, q_start);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> best = order;
  double best_cost = sequence_cost(order, plan.configs, q_start);
  while (std::next_permutation(order.begin(), order.end())) {
    const double cost = sequence_cost(order, plan.configs, q_start);
    if (cost < best_cost) {  // strict: keeps the lexicographically first optimum
      best_cost = cost;
      best = order;
    }
  }
  plan.order = best;
  plan.total_cost = best_cost;
  return plan;
}

SequencePlan plan_sequence_nn(const std::vector<PlanarTarget>& targets, const ArmSpec& arm,
                              const JointConfig& q_start) {
  const int n = static_cast<int>(targets.size());
  if (n < 1) throw std::invalid_argument("plan_sequence_nn needs at least one target");

  SequencePlan plan;
  plan.configs = solve_targets(targets, arm, q_start);

  std::vector<bool> visited(n, false);
  JointConfig cur = q_start;
  for (int step = 0; step < n; ++step) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (visited[i]) continue;
      const double d = joint_distance(cur, plan.configs[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    visited[best] = true;
    plan.order.push_back(best);
    plan.total_cost += best_d;
    cur = plan.configs[best];
  }
  return plan;
}

ServoState servo_step(const ServoState& state, const Vec2& true_flower,
                      const ServoParams& params, Rng& rng) {
  ServoState next = state;
  const double d_true = (true_flower - state.tip).norm();
  const double sigma = state.regime == ServoRegime::kDepthCamera
                           ? params.sigma0 * d_true
                           : params.sigma_endo;
  next.estimate = {true_flower.x + rng.gauss(sigma), true_flower.y + rng.gauss(sigma)};
  next.tip = next.tip + (next.estimate - next.tip) * params.alpha;

  next.regime = (next.estimate - next.tip).norm() < params.blind_range
                    ? ServoRegime::kEndoscope
                    : ServoRegime::kDepthCamera;
  next.converged = (true_flower - next.tip).norm() <= params.tol;
  return next;
}

void pollinate(EndEffectorState& effector, Flower& flower, int strokes,
               const PollinateParams& params, double time) {
  if (flower.state != FlowerState::kReady)
    throw NotReadyError(std::string("flower ") + std::to_string(flower.id) + " is " +
                        to_string(flower.state) + ", not ready");
  double& cov = effector.coverage[flower.id];
  cov = std::max(cov, flower.pistil_coverage);
  for (int s = 0; s < strokes; ++s) {
    // full extend-retract cycle of all three actuators
    effector.extensions = {1.0, 1.0, 1.0};
    effector.extensions = {0.0, 0.0, 0.0};
    cov = std::min(1.0, cov + params.delta);
  }
  flower.pistil_coverage = cov;
  if (cov >= params.threshold) {
    flower.state = FlowerState::kPollinated;
    flower.pollinated_time = time;
  }
}

}  // namespace pollisim
