#include "arbench/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arbench/error.hpp"

namespace arbench {

namespace {

Eigen::Quaterniond normalized(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || n < 1e-12) {
    throw InvalidArgument("rotation quaternion has zero or non-finite norm");
  }
  // Leave already-unit quaternions bit-identical so that save/load cycles are stable.
  if (std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return q;
  return Eigen::Quaterniond(q.coeffs() / n);
}

}  // namespace

RigidTransform::RigidTransform()
    : translation_(Eigen::Vector3d::Zero()), rotation_(Eigen::Quaterniond::Identity()) {}

RigidTransform::RigidTransform(const Eigen::Vector3d& translation, const Eigen::Quaterniond& rotation)
    : translation_(translation), rotation_(normalized(rotation)) {}

RigidTransform RigidTransform::from_translation(double x, double y, double z) {
  return {Eigen::Vector3d(x, y, z), Eigen::Quaterniond::Identity()};
}

RigidTransform RigidTransform::from_rotation(const Eigen::Quaterniond& rotation) {
  return {Eigen::Vector3d::Zero(), rotation};
}

RigidTransform RigidTransform::from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  return from_rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
}

RigidTransform RigidTransform::from_xyz_rpy(const Eigen::Vector3d& xyz, const Eigen::Vector3d& rpy) {
  return {xyz, quaternion_from_rpy(rpy)};
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Eigen::Vector3d RigidTransform::apply(const Eigen::Vector3d& point) const {
  return rotation_ * point + translation_;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.apply(b.translation()), a.rotation() * b.rotation()};
}

RigidTransform invert(const RigidTransform& a) {
  const Eigen::Quaterniond inv = a.rotation().conjugate();
  return {-(inv * a.translation()), inv};
}

double quaternion_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  return 1.0 - std::abs(a.coeffs().dot(b.coeffs()));
}

bool approx_equal(const RigidTransform& a, const RigidTransform& b, double tol) {
  return (a.translation() - b.translation()).norm() <= tol &&
         quaternion_distance(a.rotation(), b.rotation()) <= tol;
}

Eigen::Quaterniond quaternion_from_rpy(const Eigen::Vector3d& rpy) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
                            Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                            Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()));
}

Eigen::Vector3d rpy_from_quaternion(const Eigen::Quaterniond& q) {
  const Eigen::Matrix3d r = q.normalized().toRotationMatrix();
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double roll = 0.0;
  double yaw = 0.0;
  if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    // Gimbal lock: only roll - yaw (or roll + yaw) is observable; put it all in yaw.
    yaw = std::atan2(-r(0, 1), r(1, 1));
  }
  return {roll, pitch, yaw};
}

}  // namespace arbench
