#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "arbench/error.hpp"
#include "arbench/kinematics.hpp"
#include "arbench/planner.hpp"
#include "arbench/transform.hpp"

namespace arbench {

inline constexpr int kWorkspaceVersion = 1;
inline constexpr double kDefaultLinkRadius = 0.05;
inline constexpr double kGraspDistance = 0.02;

/// Shapes are centered on their pose; cylinders are aligned with local z.
struct Cuboid {
  Eigen::Vector3d extents;  // full edge lengths, m
};
struct Sphere {
  double radius;
};
struct Cylinder {
  double radius;
  double height;
};
using ShapePrimitive = std::variant<Cuboid, Sphere, Cylinder>;

void validate(const ShapePrimitive& shape);

/// Signed distance from a world point to the surface of a posed primitive;
/// negative inside.
double signed_distance(const ShapePrimitive& shape, const RigidTransform& pose, const Eigen::Vector3d& point);

enum class ObjectRole { object, obstacle };

struct SceneObject {
  std::string id;
  ShapePrimitive shape;
  RigidTransform pose;  // world frame
  ObjectRole role = ObjectRole::object;
  bool attached_to_gripper = false;
};

struct RobotPlacement {
  std::string urdf;  // path, relative to the workspace file
  RigidTransform placement;  // world <- base
  RigidTransform tool_offset;  // tip link <- tool point
};

struct Marker {
  RigidTransform marker_to_base;  // T_marker_base
};

struct Workspace {
  int version = kWorkspaceVersion;
  RobotPlacement robot;
  std::vector<SceneObject> objects;
  std::vector<GaussianKeypoint> keypoints;  // world frame
  std::map<std::string, JointTrajectory> trajectories;
  std::optional<Marker> marker;

  const SceneObject* find_object(std::string_view id) const;
};

/// Thrown by load_workspace and validate_workspace.
class WorkspaceError : public Error {
 public:
  using Error::Error;
};

Workspace place_robot_manual(Workspace ws, const Eigen::Vector3d& ground_point, double yaw);

/// T_world_base = T_world_marker * T_marker_base
RigidTransform calibrate_from_marker(const RigidTransform& world_to_marker, const RigidTransform& marker_to_base);

Workspace upsert_object(Workspace ws, SceneObject object);
/// Throws WorkspaceError("no such object") for an unknown id.
Workspace remove_object(Workspace ws, std::string_view id);

std::string save_workspace(const Workspace& ws);
Workspace load_workspace(std::string_view document);

Workspace load_workspace_file(const std::string& path);
/// Write-temp-then-rename so readers never observe a partial file.
void save_workspace_file(const Workspace& ws, const std::string& path);

/// A single trajectory as a JSON object, the same schema used inside workspace files.
std::string save_trajectory(const JointTrajectory& trajectory);
JointTrajectory load_trajectory(std::string_view document);

/// Every schema and invariant violation found, each naming the offending field.
std::vector<std::string> validate_workspace_document(std::string_view document);

bool structurally_equal(const Workspace& a, const Workspace& b, double tol);

/// The URDF chain with the workspace's tool offset appended to its tip.
KinematicChain workspace_chain(const Workspace& ws, const KinematicChain& urdf_chain);

/// Keypoints re-expressed in the robot base frame.
std::vector<GaussianKeypoint> keypoints_in_base_frame(const Workspace& ws);

struct CollisionEntry {
  std::size_t step;
  std::size_t link;  // joint frame index, dof for the tool point
  std::string obstacle_id;
  double penetration;  // m, > 0
};

struct CollisionReport {
  std::vector<CollisionEntry> entries;
  bool empty() const { return entries.empty(); }
};

/// Link proxies are spheres of `link_radius` at every joint frame and at the
/// tool point; only role=obstacle entries are tested.
CollisionReport check_collisions(const KinematicChain& chain, const JointTrajectory& trajectory, const Workspace& ws,
                                 double link_radius = kDefaultLinkRadius);

struct GripperOutcome {
  Workspace workspace;
  /// Id of the grasped or released object; empty for a no-op.
  std::string object_id;
  bool changed() const { return !object_id.empty(); }
};

/// grasp attaches the nearest role=object whose surface is within 2 cm of the
/// tool point; release detaches it at the current tool pose.
GripperOutcome apply_gripper_action(const Workspace& ws, const KinematicChain& chain, const Eigen::VectorXd& q,
                                    GripperAction action);

/// Moves attached objects onto the tool frame for configuration q.
Workspace update_attached_objects(Workspace ws, const KinematicChain& chain, const Eigen::VectorXd& q);

std::string to_string(GripperAction action);
GripperAction gripper_action_from_string(std::string_view text);

}  // namespace arbench
