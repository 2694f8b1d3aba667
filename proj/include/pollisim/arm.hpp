#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pollisim/geometry.hpp"
#include "pollisim/rng.hpp"
#include "pollisim/world.hpp"

namespace pollisim {

struct TargetUnreachableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IkNoConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TooManyTargetsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotReadyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Planar 3R arm. The chain operates in the vertical plane through the
/// parking approach axis; plane coordinates are (outward, up) from the base.
struct ArmSpec {
  std::array<double, 3> links{0.28, 0.28, 0.15};
  std::array<std::array<double, 2>, 3> joint_limits{
      {{-kPi, kPi}, {-2.9, 2.9}, {-2.9, 2.9}}};
  double mount_forward{0.20};  // base offset along the robot heading
  double mount_height{0.50};   // base height above the floor

  double reach() const { return links[0] + links[1] + links[2]; }
};

struct JointConfig {
  double q1{0.0};
  double q2{0.0};
  double q3{0.0};

  double operator[](int i) const { return i == 0 ? q1 : i == 1 ? q2 : q3; }
  double& operator[](int i) { return i == 0 ? q1 : i == 1 ? q2 : q3; }
};

double joint_distance(const JointConfig& a, const JointConfig& b);

struct TipPose {
  Vec2 position;        // plane coordinates
  double orientation{0.0};
};

TipPose fk(const ArmSpec& arm, const JointConfig& q);

struct IkTarget {
  Vec2 position;
  std::optional<double> orientation;  // unconstrained when absent
};

struct IkParams {
  double damping{0.05};
  double pos_tol{1e-4};
  double angle_tol{1e-3};
  int max_iters{200};
};

/// Damped-least-squares inverse kinematics. Joint-limit violations are
/// projected back and iteration continues. Throws TargetUnreachableError when
/// the position is outside the reach disc, IkNoConvergenceError at the
/// iteration cap.
JointConfig ik(const ArmSpec& arm, const IkTarget& target, const JointConfig& seed,
               const IkParams& params = {});

/// ik retried over analytic elbow seeds plus the caller's; first success wins.
JointConfig ik_multistart(const ArmSpec& arm, const IkTarget& target,
                          const JointConfig& seed, const IkParams& params = {});

struct FlowerTarget {
  int flower_id{0};
  Vec3 position;  // estimated, world frame
  double sigma{0.0};
};

/// Arm base point in the world for a robot at the given pose.
Vec3 arm_base_position(const ArmSpec& arm, const Pose2& robot_pose);

/// Project a world-frame point into the arm plane: (horizontal distance from
/// the base, height above the base).
Vec2 to_arm_plane(const Vec3& base, const Vec3& point);

/// All Ready flowers of the cell within arm reach of the base at the cell's
/// parking pose, with positions perturbed by sigma_far.
std::vector<FlowerTarget> survey_workspace(const World& world, const GridCellRef& cell,
                                           const ArmSpec& arm, double sigma_far, Rng& rng);

struct PlanarTarget {
  int flower_id{0};
  Vec2 position;  // arm plane
};

struct SequencePlan {
  std::vector<int> order;            // indices into the target list
  std::vector<JointConfig> configs;  // per target, aligned with the input list
  double total_cost{0.0};            // joint-space path length from q_start
};

/// Brute-force optimal visiting order by total joint-space distance.
/// Accepts 1..9 targets; ties go to the lexicographically first ordering.
SequencePlan plan_sequence_exact(const std::vector<PlanarTarget>& targets,
                                 const ArmSpec& arm, const JointConfig& q_start);

/// Nearest-neighbor ordering in joint space; handles any target count.
SequencePlan plan_sequence_nn(const std::vector<PlanarTarget>& targets, const ArmSpec& arm,
                              const JointConfig& q_start);

enum class ServoRegime { kDepthCamera, kEndoscope };

struct ServoState {
  Vec2 tip;
  Vec2 estimate;
  ServoRegime regime{ServoRegime::kDepthCamera};
  bool converged{false};
};

struct ServoParams {
  double alpha{0.8};       // step fraction toward the current estimate
  double sigma0{0.02};     // depth-camera noise per meter of distance
  double sigma_endo{5e-4}; // endoscope noise, constant
  double tol{0.005};       // convergence distance
  double blind_range{0.18};
};

/// One visual-servo update: re-estimate the target with regime-dependent
/// noise, step the tip, switch regimes at the blind-drive range.
ServoState servo_step(const ServoState& state, const Vec2& true_flower,
                      const ServoParams& params, Rng& rng);

struct EndEffectorState {
  std::array<double, 3> extensions{0.0, 0.0, 0.0};
  std::map<int, double> coverage;  // per flower id
};

struct PollinateParams {
  double delta{0.3};      // coverage added per stroke
  double threshold{0.8};  // coverage required for pollination
};

/// Apply brush strokes to a Ready flower; coverage accumulates and the flower
/// transitions to Pollinated at the threshold. Throws NotReadyError otherwise.
void pollinate(EndEffectorState& effector, Flower& flower, int strokes,
               const PollinateParams& params, double time);

}  // namespace pollisim
