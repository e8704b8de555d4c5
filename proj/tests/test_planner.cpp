#include <gtest/gtest.h>

#include "arbench/motion_control.hpp"
#include "arbench/planner.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

using namespace arbench;
using namespace arbench::testing;

namespace {

GaussianKeypoint position_keypoint(std::string id, const Eigen::Vector3d& p, double precision) {
  GaussianKeypoint k;
  k.id = std::move(id);
  k.pose = RigidTransform(p, Eigen::Quaterniond::Identity());
  k.position_covariance = Eigen::Matrix3d::Identity() / precision;
  k.orientation_precision = 0.0;
  return k;
}

// Affine task map of the skewed gantry read from the URDF text.
void linear3_map(Eigen::Matrix3d& A, Eigen::Vector3d& b) {
  const auto joints = scan_urdf_joints(read_text(fixture_path("linear3.urdf")));
  b.setZero();
  int col = 0;
  for (const auto& j : joints) {
    b += j.xyz;
    if (j.type == "prismatic") A.col(col++) = j.axis;
  }
}

}  // namespace

TEST(Covariance, FromEllipsoid) {
  EXPECT_LT((covariance_from_ellipsoid(Eigen::Quaterniond::Identity(), {1, 1, 1}) - Eigen::Matrix3d::Identity()).norm(),
            1e-15);
  const Eigen::Matrix3d d = covariance_from_ellipsoid(Eigen::Quaterniond::Identity(), {0.1, 0.2, 0.3});
  EXPECT_LT((d - Eigen::Vector3d(0.01, 0.04, 0.09).asDiagonal().toDenseMatrix()).norm(), 1e-15);
  const Eigen::Quaterniond r(Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()));
  const Eigen::Matrix3d rotated = covariance_from_ellipsoid(r, {0.1, 0.2, 0.3});
  const Eigen::Matrix3d oracle = rot_z(M_PI / 2) * Eigen::Vector3d(0.01, 0.04, 0.09).asDiagonal() * rot_z(M_PI / 2).transpose();
  EXPECT_LT((rotated - oracle).norm(), 1e-15);
  EXPECT_LT((rotated - Eigen::Vector3d(0.04, 0.01, 0.09).asDiagonal().toDenseMatrix()).norm(), 1e-15);
  EXPECT_THROW(covariance_from_ellipsoid(Eigen::Quaterniond::Identity(), {0.1, 0, 0.1}), InvalidArgument);
}

TEST(Precision, InverseOfCovariance) {
  EXPECT_LT((precision_from_covariance(Eigen::Matrix3d::Identity()) - Eigen::Matrix3d::Identity()).norm(), 1e-15);
  const Eigen::Matrix3d L = precision_from_covariance(Eigen::Vector3d(0.01, 0.04, 0.09).asDiagonal());
  EXPECT_LT((L - Eigen::Vector3d(100, 25, 100.0 / 9).asDiagonal().toDenseMatrix()).norm(), 1e-10);
  Eigen::Matrix3d bad;
  bad << 1, 0, 0, 0, -1, 0, 0, 0, 1;
  EXPECT_THROW(precision_from_covariance(bad), InvalidArgument);
}

TEST(Precision, ProductWithCovarianceIsIdentity) {
  Rng rng(31);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Matrix3d S = random_spd(rng, 1e-6, 1.0);
    EXPECT_LT((precision_from_covariance(S) * S - Eigen::Matrix3d::Identity()).norm(), 1e-8);
  }
}

TEST(Precision, AxisScalingLaw) {
  Rng rng(32);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Quaterniond r = rng.rotation();
    const Eigen::Vector3d axes = rng.vector(0.01, 0.5);
    const double s = rng.uniform(0.2, 3.0);
    const Eigen::Vector3d base = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(precision_from_covariance(
                                                                                   covariance_from_ellipsoid(r, axes)))
                                     .eigenvalues();
    const Eigen::Vector3d scaled = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(precision_from_covariance(
                                                                                     covariance_from_ellipsoid(r, s * axes)))
                                       .eigenvalues();
    EXPECT_LT(((scaled - base / (s * s)).array() / base.array()).abs().maxCoeff(), 1e-8);
  }
}

TEST(Keypoint, ValidateBounds) {
  GaussianKeypoint k;
  EXPECT_NO_THROW(k.validate());
  k.position_covariance = Eigen::Matrix3d::Identity() * 1e-9;
  EXPECT_THROW(k.validate(), InvalidArgument);
  k.position_covariance = Eigen::Matrix3d::Identity() * 1e3;
  EXPECT_THROW(k.validate(), InvalidArgument);
  k.position_covariance = Eigen::Matrix3d::Identity();
  k.orientation_precision = -1;
  EXPECT_THROW(k.validate(), InvalidArgument);
}

TEST(AllocateTimes, Examples) {
  EXPECT_EQ(allocate_keypoint_times(1, 50), std::vector<int>({50}));
  EXPECT_EQ(allocate_keypoint_times(2, 100), std::vector<int>({50, 100}));
  EXPECT_EQ(allocate_keypoint_times(3, 100), std::vector<int>({33, 67, 100}));
  EXPECT_THROW(allocate_keypoint_times(20, 10), InvalidArgument);
  EXPECT_THROW(allocate_keypoint_times(0, 10), InvalidArgument);
}

TEST(AllocateTimes, StrictlyIncreasingEndingAtHorizon) {
  for (int T = 1; T <= 60; ++T) {
    for (int K = 1; K <= T; ++K) {
      const auto steps = allocate_keypoint_times(K, T);
      ASSERT_EQ(steps.size(), static_cast<std::size_t>(K));
      EXPECT_EQ(steps.back(), T);
      for (int k = 0; k < K; ++k) {
        EXPECT_EQ(steps[k], static_cast<int>(std::lround(static_cast<double>((k + 1) * T) / K)));
        if (k > 0) {
          EXPECT_GT(steps[k], steps[k - 1]);
        }
      }
    }
  }
}

TEST(PlanIlqr, SingleViaPointMatchesClosedFormLqr) {
  const auto chain = fixture_chain("slider_x.urdf");
  const Eigen::VectorXd q0 = Eigen::VectorXd::Zero(1);
  const Eigen::Vector3d p0 = forward_kinematics(chain, q0).translation();
  const double lambda = 1e6;
  PlannerParams params;
  params.horizon = 50;
  params.control_cost = 1e-3;
  const auto result = plan_ilqr(chain, q0, {position_keypoint("goal", p0 + Eigen::Vector3d(1, 0, 0), lambda)}, params);

  const int T = params.horizon;
  const double dt = params.dt;
  const double scaling = T * lambda / (T * lambda + params.control_cost / (dt * dt));
  const auto oracle = scalar_lqr(0.0, 1.0, lambda, params.control_cost, T, dt);
  const auto& q = result.trajectory.configs;
  ASSERT_EQ(q.size(), static_cast<std::size_t>(T + 1));
  EXPECT_NEAR(q.back()[0], scaling, 1e-4);
  EXPECT_NEAR(oracle.back(), scaling, 1e-9);
  for (int t = 0; t <= T; ++t) EXPECT_NEAR(q[t][0], oracle[t], 1e-6) << "step " << t;
  const double increment = q[1][0] - q[0][0];
  for (int t = 0; t < T; ++t) EXPECT_NEAR(q[t + 1][0] - q[t][0], increment, 1e-6);
}

TEST(PlanIlqr, SatisfiedKeypointGivesStationaryTrajectory) {
  const auto chain = fixture_chain("arm7.urdf");
  const Eigen::VectorXd q0 = chain.neutral_configuration();
  GaussianKeypoint k;
  k.id = "here";
  k.pose = forward_kinematics(chain, q0);
  const auto result = plan_ilqr(chain, q0, {k});
  EXPECT_NEAR(result.cost, 0.0, 1e-20);
  for (const auto& u : result.trajectory.controls()) EXPECT_EQ(u.norm(), 0.0);
}

TEST(PlanIlqr, Planar2rPassesThroughKeypoints) {
  const auto chain = fixture_chain("planar_2r.urdf");
  const std::vector<GaussianKeypoint> keypoints = {position_keypoint("a", {1.2, 0.8, 0}, 1e6),
                                                   position_keypoint("b", {0.2, 1.5, 0}, 1e6)};
  const auto result = plan_ilqr(chain, Eigen::Vector2d(0.1, 0.3), keypoints);
  const auto steps = allocate_keypoint_times(2, 100);
  for (std::size_t k = 0; k < 2; ++k) {
    const Eigen::VectorXd& q = result.trajectory.configs[steps[k]];
    EXPECT_LT((planar_2r_position(q[0], q[1]) - keypoints[k].pose.translation()).norm(), 1e-3);
    EXPECT_EQ(result.trajectory.keypoint_indices.at(keypoints[k].id), steps[k]);
  }
  const auto errors = keypoint_position_errors(chain, result.trajectory, keypoints);
  for (double e : errors) EXPECT_LT(e, 1e-3);
}

TEST(PlanIlqr, LinearTaskMatchesBatchLeastSquares) {
  const auto chain = fixture_chain("linear3.urdf");
  Eigen::Matrix3d A;
  Eigen::Vector3d b;
  linear3_map(A, b);
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd q0 = rng.vector(-1, 1);
    const int K = rng.integer(1, 4);
    PlannerParams params;
    params.horizon = rng.integer(K, 40);
    params.control_cost = rng.uniform(1e-4, 1e-1);
    std::vector<GaussianKeypoint> keypoints;
    std::vector<LinearKeypoint> oracle_keypoints;
    const auto steps = allocate_keypoint_times(K, params.horizon);
    for (int k = 0; k < K; ++k) {
      GaussianKeypoint kp;
      kp.id = "k" + std::to_string(k);
      kp.pose = RigidTransform(rng.vector(-2, 2), rng.rotation());
      kp.position_covariance = random_spd(rng, 1e-4, 1e-1);
      kp.orientation_precision = rng.uniform(0, 1e3);  // constant orientation: no effect on the optimum
      keypoints.push_back(kp);
      oracle_keypoints.push_back({steps[k], kp.pose.translation(), kp.position_covariance.inverse()});
    }
    const auto result = plan_ilqr(chain, q0, keypoints, params);
    const auto oracle = batch_least_squares_plan(A, b, q0, oracle_keypoints, params.control_cost, params.horizon,
                                                 params.dt);
    for (int t = 0; t <= params.horizon; ++t) {
      EXPECT_LT((result.trajectory.configs[t] - oracle[t]).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    }
  }
}

TEST(PlanIlqr, CostNonIncreasingAndWithinLimits) {
  const auto chain = fixture_chain("arm7.urdf");
  Rng rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    const auto scene = random_arm7_scene(chain, rng, rng.integer(1, 4), 0.005, 0.05, 1e3);
    const auto result = plan_ilqr(chain, scene.q0, scene.keypoints);
    ASSERT_GE(result.cost_history.size(), 1u);
    for (std::size_t i = 1; i < result.cost_history.size(); ++i) {
      EXPECT_LE(result.cost_history[i], result.cost_history[i - 1]);
    }
    EXPECT_DOUBLE_EQ(result.cost, result.cost_history.back());
    EXPECT_NO_THROW(result.trajectory.validate(chain));
    EXPECT_NEAR(trajectory_cost(chain, result.trajectory, scene.keypoints, {}), result.cost, 1e-9 * (1 + result.cost));
  }
}

TEST(PlanIlqr, KeypointBeyondLimitEndsOnTheLimit) {
  const auto chain = fixture_chain("slider_x.urdf");
  const Eigen::VectorXd q0 = Eigen::VectorXd::Constant(1, 4.0);
  const Eigen::Vector3d p0 = forward_kinematics(chain, q0).translation();
  const auto result = plan_ilqr(chain, q0, {position_keypoint("far", p0 + Eigen::Vector3d(3, 0, 0), 1e4)});
  EXPECT_TRUE(result.converged);
  EXPECT_NO_THROW(result.trajectory.validate(chain));
  EXPECT_NEAR(result.trajectory.configs.back()[0], 5.0, 1e-9);
  // The target is 2 m past the limit.
  EXPECT_NEAR(keypoint_position_errors(chain, result.trajectory, {position_keypoint("far", p0 + Eigen::Vector3d(3, 0, 0), 1e4)})[0],
              2.0, 1e-9);
}

TEST(PlanIlqr, RejectsBadInput) {
  const auto chain = fixture_chain("planar_2r.urdf");
  const Eigen::VectorXd q0 = Eigen::Vector2d(0, 0);
  PlannerParams params;
  params.horizon = 1;
  const std::vector<GaussianKeypoint> two = {position_keypoint("a", {1, 1, 0}, 1), position_keypoint("b", {1, 0, 0}, 1)};
  EXPECT_THROW(plan_ilqr(chain, q0, two, params), InvalidArgument);
  PlannerParams negative;
  negative.control_cost = 0.0;
  EXPECT_THROW(plan_ilqr(chain, q0, two, negative), InvalidArgument);
  EXPECT_THROW(plan_ilqr(chain, Eigen::Vector2d(10, 0), two), InvalidArgument);
}

TEST(Trajectory, TaskPathOfLinearRamp) {
  const auto chain = fixture_chain("planar_2r.urdf");
  JointTrajectory traj;
  traj.dt = 0.1;
  for (int t = 0; t <= 20; ++t) {
    traj.timestamps.push_back(t * traj.dt);
    traj.configs.push_back(Eigen::Vector2d(0.05 * t, -0.03 * t));
  }
  const auto path = task_path(chain, traj);
  ASSERT_EQ(path.size(), traj.configs.size());
  for (int t = 0; t <= 20; ++t) {
    EXPECT_LT((path[t].translation() - planar_2r_position(0.05 * t, -0.03 * t)).norm(), 1e-9);
  }
  const auto still = task_path(chain, JointTrajectory::stationary(Eigen::Vector2d(0.3, 0.4), 10, 0.02));
  ASSERT_EQ(still.size(), 11u);
  for (const auto& p : still) {
    EXPECT_EQ(p.translation(), still.front().translation());
    EXPECT_EQ(p.rotation().coeffs(), still.front().rotation().coeffs());
  }
}

TEST(Trajectory, ValidateCatchesBadTiming) {
  const auto chain = fixture_chain("planar_2r.urdf");
  auto traj = JointTrajectory::stationary(Eigen::Vector2d(0, 0), 5, 0.1);
  EXPECT_NO_THROW(traj.validate(chain));
  traj.timestamps[3] = traj.timestamps[2];
  EXPECT_THROW(traj.validate(chain), Error);
  traj = JointTrajectory::stationary(Eigen::Vector2d(0, 0), 5, 0.1);
  traj.configs[2][0] = 10.0;
  EXPECT_THROW(traj.validate(chain), Error);
}

TEST(Trajectory, CsvExport) {
  JointTrajectory traj = JointTrajectory::stationary(Eigen::Vector2d(0.1, 1.0 / 3.0), 2, 0.5);
  const std::string csv = trajectory_to_csv(traj);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,q1,q2");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    double t, a, b;
    char c1, c2;
    std::istringstream row(line);
    row >> t >> c1 >> a >> c2 >> b;
    EXPECT_EQ(a, 0.1);
    EXPECT_EQ(b, 1.0 / 3.0);
  }
  EXPECT_EQ(rows, 3);
}

TEST(Replan, RemovingOnlyKeypointGivesStationary) {
  const auto chain = fixture_chain("arm7.urdf");
  Rng rng(35);
  const auto scene = random_arm7_scene(chain, rng, 1, 0.01, 0.02, 1e3);
  const auto first = plan_ilqr(chain, scene.q0, scene.keypoints);
  const auto replanned = replan_incremental(chain, scene.q0, {}, {}, &first.trajectory);
  for (const auto& u : replanned.trajectory.controls()) EXPECT_EQ(u.norm(), 0.0);
  EXPECT_EQ(replanned.cost, 0.0);
}

TEST(Replan, NoopEditKeepsCost) {
  const auto chain = fixture_chain("arm7.urdf");
  Rng rng(36);
  const auto scene = random_arm7_scene(chain, rng, 2, 0.01, 0.02, 1e3);
  PlannerParams params;
  const auto first = plan_ilqr(chain, scene.q0, scene.keypoints, params);
  const auto again = replan_incremental(chain, scene.q0, scene.keypoints, params, &first.trajectory);
  EXPECT_LE(again.cost, first.cost + params.cost_tolerance);
  EXPECT_NEAR(again.cost, first.cost, params.cost_tolerance + 1e-9 * first.cost);
}

TEST(Replan, SmallEditConvergesFasterThanColdStart) {
  const auto chain = fixture_chain("arm7.urdf");
  Rng rng(37);
  int warm_total = 0, cold_total = 0;
  for (int trial = 0; trial < 5; ++trial) {
    auto scene = random_arm7_scene(chain, rng, 2, 0.01, 0.02, 1e3);
    const auto first = plan_ilqr(chain, scene.q0, scene.keypoints);
    auto& moved = scene.keypoints[0];
    moved.pose = RigidTransform(moved.pose.translation() + Eigen::Vector3d(0.01, 0, 0), moved.pose.rotation());
    const auto cold = plan_ilqr(chain, scene.q0, scene.keypoints);
    const auto warm = replan_incremental(chain, scene.q0, scene.keypoints, {}, &first.trajectory);
    EXPECT_LE(warm.cost, cold.cost + PlannerParams{}.cost_tolerance + 1e-6 * cold.cost);
    warm_total += warm.iterations;
    cold_total += cold.iterations;
  }
  EXPECT_LT(warm_total, cold_total);
}

TEST(Replan, WarmStartOfDifferentLengthIsAdapted) {
  const auto chain = fixture_chain("planar_2r.urdf");
  const std::vector<GaussianKeypoint> keypoints = {position_keypoint("a", {1.2, 0.8, 0}, 1e4)};
  PlannerParams short_params;
  short_params.horizon = 30;
  const auto first = plan_ilqr(chain, Eigen::Vector2d(0.1, 0.3), keypoints, short_params);
  const auto longer = replan_incremental(chain, Eigen::Vector2d(0.1, 0.3), keypoints, {}, &first.trajectory);
  EXPECT_EQ(longer.trajectory.steps(), 100u);
  EXPECT_THROW(replan_incremental(chain, Eigen::VectorXd::Zero(3), keypoints, {}, &first.trajectory), Error);
}
