#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "arbench/transform.hpp"

namespace arbench {

enum class JointKind { revolute, prismatic, fixed };

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::revolute;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  /// Pose of the joint frame in the parent link frame.
  RigidTransform origin;
  double lower = 0.0;
  double upper = 0.0;
  double velocity_limit = 0.0;
};

/// Mesh file referenced by a link's visual or collision element. Never loaded.
struct MeshReference {
  std::string link;
  std::string uri;
};

using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// Serial chain of movable joints from base link to tip link.
///
/// Fixed joints are folded into the origin of the next movable joint (or into
/// the tool offset when they follow the last one), so every joint in the chain
/// contributes one column to the Jacobian.
class KinematicChain {
 public:
  KinematicChain() = default;
  KinematicChain(std::string name, std::vector<JointSpec> joints, std::vector<std::string> link_names,
                 RigidTransform tool_offset, std::vector<MeshReference> meshes = {});

  const std::string& name() const { return name_; }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const std::vector<std::string>& link_names() const { return link_names_; }
  const std::vector<MeshReference>& meshes() const { return meshes_; }
  const RigidTransform& tool_offset() const { return tool_offset_; }
  std::size_t dof() const { return joints_.size(); }

  KinematicChain with_tool_offset(const RigidTransform& tool_offset) const;

  const Eigen::VectorXd& lower_limits() const { return lower_; }
  const Eigen::VectorXd& upper_limits() const { return upper_; }
  Eigen::VectorXd velocity_limits() const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& q) const;
  bool within_limits(const Eigen::VectorXd& q, double tol = 0.0) const;
  /// Midpoint of the limits; zero for unbounded joints.
  Eigen::VectorXd neutral_configuration() const;

  void check_dimension(const Eigen::VectorXd& q) const;

 private:
  std::string name_;
  std::vector<JointSpec> joints_;
  std::vector<std::string> link_names_;
  RigidTransform tool_offset_;
  std::vector<MeshReference> meshes_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

struct UrdfOptions {
  /// Empty: the unique root link of the joint tree.
  std::string base_link;
  /// Empty: the unique leaf reachable from the base.
  std::string tip_link;
};

KinematicChain parse_urdf(std::string_view document, const UrdfOptions& options = {});
KinematicChain load_urdf_file(const std::string& path, const UrdfOptions& options = {});

/// Writes a URDF that parses back into an equivalent chain.
std::string to_urdf(const KinematicChain& chain);

bool structurally_equal(const KinematicChain& a, const KinematicChain& b, double tol);

RigidTransform forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q);

/// Base-frame pose of every joint frame (after its origin, before its motion)
/// followed by the tool frame; size dof + 1.
std::vector<RigidTransform> joint_frames(const KinematicChain& chain, const Eigen::VectorXd& q);

/// Geometric Jacobian at the tool point, expressed in the base frame.
/// Rows 0-2 are linear velocity, rows 3-5 angular velocity.
Jacobian jacobian(const KinematicChain& chain, const Eigen::VectorXd& q);

}  // namespace arbench
