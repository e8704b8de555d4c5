#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace arbench {

/// Rigid-body transform stored as translation plus unit quaternion (w, x, y, z).
///
/// The quaternion is renormalized on construction, so every value produced by
/// compose() or invert() satisfies |q| = 1 to machine precision.
class RigidTransform {
 public:
  RigidTransform();
  RigidTransform(const Eigen::Vector3d& translation, const Eigen::Quaterniond& rotation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(double x, double y, double z);
  static RigidTransform from_rotation(const Eigen::Quaterniond& rotation);
  static RigidTransform from_axis_angle(const Eigen::Vector3d& axis, double angle);
  /// URDF convention: fixed-axis roll about x, then pitch about y, then yaw about z.
  static RigidTransform from_xyz_rpy(const Eigen::Vector3d& xyz, const Eigen::Vector3d& rpy);

  const Eigen::Vector3d& translation() const { return translation_; }
  const Eigen::Quaterniond& rotation() const { return rotation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }
  Eigen::Matrix4d matrix() const;

  /// Maps a point expressed in the child frame into the parent frame.
  Eigen::Vector3d apply(const Eigen::Vector3d& point) const;

 private:
  Eigen::Vector3d translation_;
  Eigen::Quaterniond rotation_;
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& a);

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return compose(a, b);
}

/// 1 - |<qa, qb>|; zero iff the two quaternions describe the same rotation.
double quaternion_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

bool approx_equal(const RigidTransform& a, const RigidTransform& b, double tol);

Eigen::Quaterniond quaternion_from_rpy(const Eigen::Vector3d& rpy);
Eigen::Vector3d rpy_from_quaternion(const Eigen::Quaterniond& q);

}  // namespace arbench
