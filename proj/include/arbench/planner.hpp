#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "arbench/error.hpp"
#include "arbench/kinematics.hpp"
#include "arbench/transform.hpp"

namespace arbench {

enum class GripperAction { none, grasp, release };

inline constexpr double kDefaultOrientationPrecision = 1e3;

/// Via-point with a Gaussian tolerance on the tool position.
///
/// The position covariance comes from the keypoint's ellipsoid (one standard
/// deviation per semi-axis); the planner weights position error by its
/// inverse. Orientation error is weighted by a scalar precision, and a zero
/// precision leaves orientation free.
struct GaussianKeypoint {
  std::string id;
  RigidTransform pose;
  Eigen::Matrix3d position_covariance = Eigen::Matrix3d::Identity() * 1e-4;
  double orientation_precision = kDefaultOrientationPrecision;  // rad^-2
  GripperAction gripper_action = GripperAction::none;

  /// Throws InvalidArgument unless the covariance is SPD with eigenvalues in
  /// [1e-8, 1e2] and the orientation precision is finite and non-negative.
  void validate() const;
};

/// Sigma = R diag(s^2) R^T, with s the ellipsoid semi-axes read as standard deviations.
Eigen::Matrix3d covariance_from_ellipsoid(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& semi_axes);

/// Sigma^-1 through a Cholesky factorization; throws InvalidArgument for non-SPD input.
Eigen::Matrix3d precision_from_covariance(const Eigen::Matrix3d& covariance);

/// Re-expresses a world-frame keypoint in another frame (mean and covariance).
GaussianKeypoint transform_keypoint(const RigidTransform& frame_from_world, const GaussianKeypoint& keypoint);

struct PlannerParams {
  int horizon = 100;
  double dt = 0.02;
  double control_cost = 1e-4;
  int max_iterations = 100;
  double cost_tolerance = 1e-8;
  double line_search_shrink = 0.5;

  void validate(std::size_t keypoints) const;
};

/// Uniformly sampled joint trajectory, T + 1 samples for a horizon of T steps.
struct JointTrajectory {
  double dt = 0.0;
  std::vector<double> timestamps;
  std::vector<Eigen::VectorXd> configs;
  std::map<std::string, int> keypoint_indices;

  std::size_t steps() const { return configs.empty() ? 0 : configs.size() - 1; }
  /// Finite-difference velocities (q[t+1] - q[t]) / dt, one per step.
  std::vector<Eigen::VectorXd> controls() const;
  void validate(const KinematicChain& chain) const;

  static JointTrajectory stationary(const Eigen::VectorXd& q, int horizon, double dt);
};

struct PlanResult {
  JointTrajectory trajectory;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Cost of the initial roll-out followed by the cost after every accepted iteration.
  std::vector<double> cost_history;
};

class PlanDivergence : public Error {
 public:
  explicit PlanDivergence(PlanResult last_finite);
  const PlanResult& last_finite() const { return last_; }

 private:
  PlanResult last_;
};

/// Keypoint k (1-based) of K goes to step round(k * T / K).
std::vector<int> allocate_keypoint_times(std::size_t keypoints, int horizon);

/// Task cost of one configuration against one keypoint:
/// e_p^T Lambda e_p + w_o |e_o|^2.
double keypoint_cost(const KinematicChain& chain, const Eigen::VectorXd& q, const GaussianKeypoint& keypoint);

/// Full objective of a trajectory, keypoints placed by allocate_keypoint_times.
double trajectory_cost(const KinematicChain& chain, const JointTrajectory& trajectory,
                       const std::vector<GaussianKeypoint>& keypoints, const PlannerParams& params);

/// Euclidean tool-position error at each keypoint's allotted step.
std::vector<double> keypoint_position_errors(const KinematicChain& chain, const JointTrajectory& trajectory,
                                             const std::vector<GaussianKeypoint>& keypoints);

PlanResult plan_ilqr(const KinematicChain& chain, const Eigen::VectorXd& q0,
                     const std::vector<GaussianKeypoint>& keypoints, const PlannerParams& params = {});

/// Same contract as plan_ilqr, initialized from the controls of `warm_start`
/// (truncated or zero-padded to the horizon). A null warm start is a cold start.
PlanResult replan_incremental(const KinematicChain& chain, const Eigen::VectorXd& q0,
                              const std::vector<GaussianKeypoint>& keypoints, const PlannerParams& params,
                              const JointTrajectory* warm_start);

std::vector<RigidTransform> task_path(const KinematicChain& chain, const JointTrajectory& trajectory);

/// Header `t,q1,...,qn`, one row per sample, 17 significant digits.
std::string trajectory_to_csv(const JointTrajectory& trajectory);

}  // namespace arbench
