#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <variant>

#include "arbench/error.hpp"
#include "arbench/kinematics.hpp"
#include "arbench/transform.hpp"

namespace arbench {

using Twist = Eigen::Matrix<double, 6, 1>;

inline constexpr double kDefaultIkDamping = 0.05;
inline constexpr double kDefaultIkMaxStep = 0.1;

/// Joint weighting and damping for the damped weighted least-squares IK step.
struct IkWeights {
  /// dof x dof SPD matrix; an empty matrix means identity.
  Eigen::MatrixXd joint_weights;
  double damping = kDefaultIkDamping;
  /// Per-joint bound on a single step (rad or m).
  double max_step = kDefaultIkMaxStep;
  /// solve_ik restarts once the residual has not dropped by 1% over this many
  /// iterations; 0 disables restarts.
  int stall_window = 8;
  /// Random in-limit configurations scored per restart; the best one seeds it.
  int restart_samples = 200;
};

struct ImpedanceGains {
  Eigen::VectorXd stiffness;  // 1/s^2
  Eigen::VectorXd damping;    // 1/s

  static ImpedanceGains uniform(std::size_t dof, double stiffness, double damping);
  void validate(std::size_t dof) const;
};

/// Rows of the 6-D task that the IK solver tries to zero.
enum class TaskMask { full_pose, position_only };

/// Twist that moves `current` onto `target`: linear part is the translation
/// difference, angular part the rotation vector of target * current^-1 with
/// angle in [0, pi]. A rotation of exactly pi uses the axis whose first
/// nonzero component is positive.
Twist pose_error(const RigidTransform& current, const RigidTransform& target);

/// Damped weighted least squares: W^-1 J^T (J W^-1 J^T + damping^2 I)^-1 e.
/// Works for any task dimension; no step clamping.
Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& task_jacobian, const Eigen::VectorXd& error,
                                       const Eigen::MatrixXd& joint_weights, double damping);

/// One IK step toward `target`, scaled down uniformly when any joint would
/// move more than weights.max_step.
/// Throws InvalidArgument when the joint weights are not SPD.
Eigen::VectorXd weighted_ik_step(const KinematicChain& chain, const Eigen::VectorXd& q,
                                 const RigidTransform& target, const IkWeights& weights = {},
                                 TaskMask mask = TaskMask::full_pose);

struct IkSolution {
  Eigen::VectorXd q;
  int iterations = 0;
  double residual = 0.0;
};

class IkNotConverged : public Error {
 public:
  IkNotConverged(double best_residual, Eigen::VectorXd best_q, int iterations);
  double best_residual() const { return best_residual_; }
  const Eigen::VectorXd& best_q() const { return best_q_; }
  int iterations() const { return iterations_; }

 private:
  double best_residual_;
  Eigen::VectorXd best_q_;
  int iterations_;
};

double task_residual(const KinematicChain& chain, const Eigen::VectorXd& q, const RigidTransform& target,
                     TaskMask mask = TaskMask::full_pose);

/// Iterates weighted_ik_step with joint-limit clamping until the residual
/// drops below `tol`; throws IkNotConverged after `max_iter` steps.
IkSolution solve_ik(const KinematicChain& chain, const Eigen::VectorXd& q0, const RigidTransform& target,
                    const IkWeights& weights, double tol, int max_iter, TaskMask mask = TaskMask::full_pose);

/// (I - n n^T) dx
Eigen::Vector3d project_to_plane(const Eigen::Vector3d& displacement, const Eigen::Vector3d& normal);

/// I - J^+ J with J^+ = J^T (J J^T + damping^2 I)^-1.
Eigen::MatrixXd nullspace_projector(const Eigen::MatrixXd& task_jacobian, double damping);

/// Joint jog of `delta` on `joint`. With `nullspace` set the jog is projected
/// so that the tool pose is preserved to first order. The returned step keeps
/// q + step inside the joint limits.
Eigen::VectorXd nullspace_jog(const KinematicChain& chain, const Eigen::VectorXd& q, std::size_t joint,
                              double delta, bool nullspace, double damping = kDefaultIkDamping);

enum class Axis { x = 0, y = 1, z = 2 };

struct TranslateAxis {
  Axis axis;
  double distance;  // m
};
struct RotateRing {
  Axis axis;
  double angle;  // rad, about the base-frame axis through the tool point
};
struct PlaneMotion {
  Eigen::Vector3d normal;
  Eigen::Vector3d displacement;  // projected onto the plane before use
};
struct JointJog {
  std::size_t joint;
  double delta;
  bool nullspace;
};

using ControlMode = std::variant<TranslateAxis, RotateRing, PlaneMotion, JointJog>;

/// Validates plane normals and joint indices.
void validate(const ControlMode& mode, std::size_t dof);

/// New joint target after applying an interactive control input at `q`.
/// Cartesian modes run a short IK solve and fall back to the best iterate.
Eigen::VectorXd apply_control(const KinematicChain& chain, const Eigen::VectorXd& q, const ControlMode& mode,
                              const IkWeights& weights = {});

struct JointState {
  Eigen::VectorXd q;
  Eigen::VectorXd dq;
};

/// Unit-mass joint impedance, semi-implicit Euler. Positions are clamped to
/// the chain limits; a clamped joint has its velocity zeroed.
JointState impedance_step(const KinematicChain& chain, const JointState& state, const Eigen::VectorXd& q_target,
                          const ImpedanceGains& gains, double dt);

}  // namespace arbench
