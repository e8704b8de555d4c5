#include "scenes.hpp"

#include "oracles.hpp"

namespace arbench::testing {

Eigen::Quaterniond Rng::rotation() {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(engine_), n(engine_), n(engine_), n(engine_));
  q.normalize();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  return q;
}

RigidTransform Rng::transform(double translation_scale) {
  return RigidTransform(vector(-translation_scale, translation_scale), rotation());
}

KinematicChain fixture_chain(const std::string& name) { return load_urdf_file(fixture_path(name)); }

Eigen::VectorXd random_configuration(const KinematicChain& chain, Rng& rng, double margin) {
  Eigen::VectorXd q(chain.dof());
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    double lo = chain.lower_limits()[i];
    double hi = chain.upper_limits()[i];
    if (!std::isfinite(lo)) lo = -M_PI;
    if (!std::isfinite(hi)) hi = M_PI;
    q[i] = rng.uniform(lo + margin, hi - margin);
  }
  return q;
}

Eigen::Matrix3d random_spd(Rng& rng, double min_eig, double max_eig) {
  const Eigen::Matrix3d R = rng.rotation().toRotationMatrix();
  const Eigen::Vector3d eig(rng.uniform(min_eig, max_eig), rng.uniform(min_eig, max_eig),
                            rng.uniform(min_eig, max_eig));
  Eigen::Matrix3d S = R * eig.asDiagonal() * R.transpose();
  return (S + S.transpose()) / 2.0;
}

namespace {

ShapePrimitive random_shape(Rng& rng) {
  switch (rng.integer(0, 2)) {
    case 0:
      return Cuboid{rng.vector(0.01, 1.0)};
    case 1:
      return Sphere{rng.uniform(0.005, 0.5)};
    default:
      return Cylinder{rng.uniform(0.005, 0.3), rng.uniform(0.01, 1.0)};
  }
}

}  // namespace

Workspace random_workspace(Rng& rng) {
  Workspace ws;
  ws.robot.urdf = rng.coin() ? "arm7.urdf" : "robots/other arm.urdf";
  ws.robot.placement = rng.transform(2.0);
  ws.robot.tool_offset = rng.coin() ? RigidTransform::identity() : rng.transform(0.2);
  if (rng.coin()) ws.marker = Marker{rng.transform(1.0)};

  const int objects = rng.integer(0, 5);
  bool holding = false;
  for (int i = 0; i < objects; ++i) {
    SceneObject o;
    o.id = "object_" + std::to_string(i);
    o.shape = random_shape(rng);
    o.pose = rng.transform(3.0);
    o.role = rng.coin() ? ObjectRole::object : ObjectRole::obstacle;
    if (o.role == ObjectRole::object && !holding && rng.integer(0, 3) == 0) {
      o.attached_to_gripper = true;
      holding = true;
    }
    ws.objects.push_back(std::move(o));
  }

  const int keypoints = rng.integer(0, 4);
  for (int i = 0; i < keypoints; ++i) {
    GaussianKeypoint k;
    k.id = "kp" + std::to_string(i);
    k.pose = rng.transform(1.0);
    k.position_covariance = random_spd(rng, 1e-6, 1.0);
    k.orientation_precision = rng.coin() ? 0.0 : rng.uniform(0.0, 1e4);
    k.gripper_action = static_cast<GripperAction>(rng.integer(0, 2));
    ws.keypoints.push_back(std::move(k));
  }

  const int trajectories = rng.integer(0, 2);
  for (int i = 0; i < trajectories; ++i) {
    JointTrajectory t;
    t.dt = rng.uniform(0.001, 0.1);
    const int steps = rng.integer(1, 20);
    const int dof = rng.integer(1, 7);
    for (int s = 0; s <= steps; ++s) {
      t.timestamps.push_back(s * t.dt);
      Eigen::VectorXd q(dof);
      for (int j = 0; j < dof; ++j) q[j] = rng.uniform(-3.0, 3.0);
      t.configs.push_back(q);
    }
    for (const auto& k : ws.keypoints) {
      if (rng.coin()) t.keypoint_indices[k.id] = rng.integer(0, steps);
    }
    ws.trajectories["trajectory " + std::to_string(i)] = std::move(t);
  }
  return ws;
}

PlannerScene random_arm7_scene(const KinematicChain& chain, Rng& rng, int keypoint_count, double min_axis,
                               double max_axis, double orientation_precision) {
  PlannerScene scene;
  scene.q0 = random_configuration(chain, rng, 0.3);
  Eigen::VectorXd q = scene.q0;
  for (int k = 0; k < keypoint_count; ++k) {
    for (std::size_t j = 0; j < chain.dof(); ++j) q[j] += rng.uniform(-0.4, 0.4);
    q = chain.clamp(q);
    GaussianKeypoint kp;
    kp.id = "k" + std::to_string(k);
    kp.pose = forward_kinematics(chain, q);
    // Offset the mean a little so the keypoint is not met exactly.
    kp.pose = RigidTransform(kp.pose.translation() + rng.vector(-0.03, 0.03), kp.pose.rotation());
    kp.position_covariance = covariance_from_ellipsoid(
        rng.rotation(), {rng.uniform(min_axis, max_axis), rng.uniform(min_axis, max_axis), rng.uniform(min_axis, max_axis)});
    kp.orientation_precision = orientation_precision;
    scene.keypoints.push_back(kp);
  }
  return scene;
}

Eigen::Quaterniond tool_down() { return Eigen::Quaterniond(0.0, 1.0, 0.0, 0.0); }

namespace nist {

Workspace unplanned_workspace(const std::string& urdf) {
  Workspace ws;
  ws.robot.urdf = urdf;
  ws = place_robot_manual(ws, {0.05, 0.02, 0.0}, 0.2);

  SceneObject board{kBoard, Cuboid{{0.30, 0.30, 0.02}}, RigidTransform::from_translation(0.50, 0.0, 0.09),
                    ObjectRole::obstacle, false};
  SceneObject peg{kPeg, Cylinder{0.012, 0.08}, RigidTransform::from_translation(0.50, 0.0, 0.12), ObjectRole::object,
                  false};
  SceneObject box{kBox, Cuboid{kBoxExtents}, RigidTransform(kBoxCentre, Eigen::Quaterniond::Identity()),
                  ObjectRole::obstacle, false};
  ws = upsert_object(ws, board);
  ws = upsert_object(ws, peg);
  ws = upsert_object(ws, box);

  const Eigen::Quaterniond down = Eigen::Quaterniond(Eigen::AngleAxisd(0.2, Eigen::Vector3d::UnitZ())) * tool_down();
  const Eigen::Matrix3d tight = covariance_from_ellipsoid(Eigen::Quaterniond::Identity(), {0.005, 0.005, 0.005});
  const Eigen::Matrix3d loose = covariance_from_ellipsoid(Eigen::Quaterniond::Identity(), {0.02, 0.02, 0.01});
  auto keypoint = [&](std::string id, Eigen::Vector3d p, const Eigen::Matrix3d& cov, GripperAction action) {
    GaussianKeypoint k;
    k.id = std::move(id);
    k.pose = RigidTransform(p, down);
    k.position_covariance = cov;
    k.gripper_action = action;
    return k;
  };
  ws.keypoints = {
      keypoint("approach", {0.50, 0.0, 0.25}, loose, GripperAction::none),
      keypoint("grasp", {0.50, 0.0, 0.13}, tight, GripperAction::grasp),
      keypoint("lift", {0.50, 0.0, 0.30}, loose, GripperAction::none),
      keypoint("release", {kBoxCentre.x(), kBoxCentre.y(), 0.25}, tight, GripperAction::release),
  };
  return ws;
}

}  // namespace nist

}  // namespace arbench::testing
