#include <gtest/gtest.h>

#include "arbench/kinematics.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

using namespace arbench;
using namespace arbench::testing;

namespace {

Eigen::Matrix<double, 6, Eigen::Dynamic> finite_difference_jacobian(const KinematicChain& chain,
                                                                     const Eigen::VectorXd& q, double eps) {
  Eigen::Matrix<double, 6, Eigen::Dynamic> J(6, q.size());
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    Eigen::VectorXd qp = q, qm = q;
    qp[j] += eps;
    qm[j] -= eps;
    const Eigen::Matrix4d Tp = forward_kinematics(chain, qp).matrix();
    const Eigen::Matrix4d Tm = forward_kinematics(chain, qm).matrix();
    J.block<3, 1>(0, j) = (Tp.topRightCorner<3, 1>() - Tm.topRightCorner<3, 1>()) / (2 * eps);
    const Eigen::Matrix3d dR = Tp.topLeftCorner<3, 3>() * Tm.topLeftCorner<3, 3>().transpose();
    J.block<3, 1>(3, j) = rotation_log(dR) / (2 * eps);
  }
  return J;
}

const char* kSingleRevolute = R"(<robot name="one">
  <link name="a"/><link name="b"/>
  <joint name="j" type="revolute"><parent link="a"/><child link="b"/>
    <axis xyz="0 0 1"/><limit lower="-3.14159" upper="3.14159"/></joint>
</robot>)";

}  // namespace

TEST(UrdfParse, SingleRevoluteJoint) {
  const auto chain = parse_urdf(kSingleRevolute);
  EXPECT_EQ(chain.dof(), 1u);
  EXPECT_EQ(chain.name(), "one");
  EXPECT_EQ(chain.joints()[0].kind, JointKind::revolute);
  EXPECT_DOUBLE_EQ(chain.upper_limits()[0], 3.14159);
}

TEST(UrdfParse, SevenJointFixtureInDocumentOrder) {
  const auto chain = fixture_chain("arm7.urdf");
  ASSERT_EQ(chain.dof(), 7u);
  for (int i = 0; i < 7; ++i) EXPECT_EQ(chain.joints()[i].name, "arm7_joint" + std::to_string(i + 1));
  EXPECT_DOUBLE_EQ(chain.lower_limits()[3], -3.0718);
  EXPECT_DOUBLE_EQ(chain.upper_limits()[5], 3.7525);
  EXPECT_DOUBLE_EQ(chain.joints()[6].velocity_limit, 2.61);
  EXPECT_FALSE(chain.meshes().empty());
  EXPECT_EQ(chain.link_names().front(), "arm7_link0");
}

TEST(UrdfParse, InvalidLimitsRejected) {
  try {
    load_urdf_file(fixture_path("invalid_limits.urdf"));
    FAIL() << "expected UrdfError";
  } catch (const UrdfError& e) {
    EXPECT_NE(std::string(e.what()).find("invalid limits"), std::string::npos) << e.what();
  }
}

TEST(UrdfParse, BranchingRejected) {
  try {
    load_urdf_file(fixture_path("branching.urdf"));
    FAIL() << "expected UrdfError";
  } catch (const UrdfError& e) {
    EXPECT_NE(std::string(e.what()).find("branching"), std::string::npos) << e.what();
  }
}

TEST(UrdfParse, BranchingAcceptedWithExplicitTip) {
  const std::string doc = read_text(fixture_path("branching.urdf"));
  const auto links = scan_urdf_joints(doc);
  ASSERT_FALSE(links.empty());
  // A declared tip picks one branch out of the tree.
  UrdfOptions options;
  options.tip_link = "left";
  EXPECT_NO_THROW(parse_urdf(doc, options));
}

TEST(UrdfParse, MalformedAndMissingAxis) {
  EXPECT_THROW(parse_urdf("<robot name='x'><link name='a'></robot>"), UrdfError);
  EXPECT_THROW(parse_urdf("not xml at all"), UrdfError);
  const char* no_axis = R"(<robot name="x"><link name="a"/><link name="b"/>
    <joint name="j" type="revolute"><parent link="a"/><child link="b"/><limit lower="-1" upper="1"/></joint></robot>)";
  try {
    parse_urdf(no_axis);
    FAIL();
  } catch (const UrdfError& e) {
    EXPECT_NE(std::string(e.what()).find("axis"), std::string::npos) << e.what();
  }
}

TEST(UrdfParse, ContinuousJointHasNoLimits) {
  const char* doc = R"(<robot name="x"><link name="a"/><link name="b"/>
    <joint name="j" type="continuous"><parent link="a"/><child link="b"/><axis xyz="0 0 1"/></joint></robot>)";
  const auto chain = parse_urdf(doc);
  EXPECT_TRUE(std::isinf(chain.upper_limits()[0]));
  EXPECT_TRUE(chain.within_limits(Eigen::VectorXd::Constant(1, 100.0)));
}

TEST(UrdfParse, ParseSerializeParseIsStable) {
  for (const char* name : {"planar_2r.urdf", "single_revolute.urdf", "slider_x.urdf", "cartesian6.urdf",
                           "linear3.urdf", "arm7.urdf"}) {
    const auto first = fixture_chain(name);
    const auto second = parse_urdf(to_urdf(first));
    EXPECT_TRUE(structurally_equal(first, second, 1e-12)) << name;
    const auto third = parse_urdf(to_urdf(second));
    EXPECT_EQ(to_urdf(second), to_urdf(third)) << name;
  }
}

TEST(ForwardKinematics, Planar2rStraightArm) {
  const auto chain = fixture_chain("planar_2r.urdf");
  const auto T = forward_kinematics(chain, Eigen::Vector2d(0, 0));
  EXPECT_TRUE(approx_equal(T, RigidTransform::from_translation(2, 0, 0), 1e-15));
}

TEST(ForwardKinematics, Planar2rQuarterTurn) {
  const auto chain = fixture_chain("planar_2r.urdf");
  const auto T = forward_kinematics(chain, Eigen::Vector2d(M_PI / 2, 0));
  const auto expected =
      RigidTransform(Eigen::Vector3d(0, 2, 0), Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ())));
  EXPECT_TRUE(approx_equal(T, expected, 1e-12));
}

TEST(ForwardKinematics, Planar2rMatchesAnalytic) {
  const auto chain = fixture_chain("planar_2r.urdf");
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd q = random_configuration(chain, rng);
    const auto T = forward_kinematics(chain, q);
    EXPECT_LT((T.translation() - planar_2r_position(q[0], q[1])).norm(), 1e-9);
    const Eigen::Matrix3d R = rot_z(planar_2r_yaw(q[0], q[1]));
    EXPECT_LT((T.rotation_matrix() - R).norm(), 1e-9);
  }
}

TEST(ForwardKinematics, Arm7MatchesDhTable) {
  const auto chain = fixture_chain("arm7.urdf");
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const Eigen::VectorXd q = random_configuration(chain, rng);
    const Eigen::Matrix4d expected = arm7_dh_fk(q);
    EXPECT_LT((forward_kinematics(chain, q).matrix() - expected).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ForwardKinematics, FixturesMatchMatrixProductOracle) {
  Rng rng(13);
  for (const char* name : {"planar_2r.urdf", "slider_x.urdf", "cartesian6.urdf", "linear3.urdf", "arm7.urdf"}) {
    const auto chain = fixture_chain(name);
    const auto joints = scan_urdf_joints(read_text(fixture_path(name)));
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd q = random_configuration(chain, rng);
      EXPECT_LT((forward_kinematics(chain, q).matrix() - matrix_product_fk(joints, q)).cwiseAbs().maxCoeff(), 1e-9)
          << name;
    }
  }
}

TEST(ForwardKinematics, DimensionMismatchThrows) {
  const auto chain = fixture_chain("arm7.urdf");
  EXPECT_THROW(forward_kinematics(chain, Eigen::VectorXd::Zero(6)), DimensionError);
  EXPECT_THROW(jacobian(chain, Eigen::VectorXd::Zero(8)), DimensionError);
}

TEST(ForwardKinematics, JointFramesEndAtTool) {
  const auto chain = fixture_chain("arm7.urdf");
  Rng rng(14);
  const Eigen::VectorXd q = random_configuration(chain, rng);
  const auto frames = joint_frames(chain, q);
  ASSERT_EQ(frames.size(), chain.dof() + 1);
  EXPECT_TRUE(approx_equal(frames.back(), forward_kinematics(chain, q), 1e-12));
}

TEST(Jacobian, Planar2rStraightArm) {
  const auto chain = fixture_chain("planar_2r.urdf");
  const Jacobian J = jacobian(chain, Eigen::Vector2d(0, 0));
  Eigen::Matrix<double, 6, 2> expected;
  expected << 0, 0, 2, 1, 0, 0, 0, 0, 0, 0, 1, 1;
  EXPECT_LT((J - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Jacobian, PrismaticBetweenFixedJoints) {
  const auto chain = fixture_chain("slider_x.urdf");
  ASSERT_EQ(chain.dof(), 1u);
  Eigen::Matrix<double, 6, 1> expected;
  expected << 1, 0, 0, 0, 0, 0;
  EXPECT_LT((jacobian(chain, Eigen::VectorXd::Constant(1, 0.3)) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Jacobian, CartesianFixtureIsIdentityAtZero) {
  const auto chain = fixture_chain("cartesian6.urdf");
  EXPECT_LT((jacobian(chain, Eigen::VectorXd::Zero(6)) - Eigen::Matrix<double, 6, 6>::Identity()).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(Jacobian, MatchesFiniteDifferences) {
  Rng rng(15);
  for (const char* name : {"planar_2r.urdf", "arm7.urdf", "cartesian6.urdf", "linear3.urdf"}) {
    const auto chain = fixture_chain(name);
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd q = random_configuration(chain, rng);
      const auto J = jacobian(chain, q);
      const auto Jfd = finite_difference_jacobian(chain, q, 1e-6);
      for (Eigen::Index c = 0; c < J.cols(); ++c) EXPECT_LT((J.col(c) - Jfd.col(c)).norm(), 1e-5) << name;
    }
  }
}

TEST(KinematicChain, ClampAndLimits) {
  const auto chain = fixture_chain("arm7.urdf");
  Eigen::VectorXd q = Eigen::VectorXd::Constant(7, 10.0);
  const Eigen::VectorXd c = chain.clamp(q);
  EXPECT_TRUE(chain.within_limits(c));
  EXPECT_FALSE(chain.within_limits(q));
  EXPECT_TRUE(chain.within_limits(chain.neutral_configuration()));
}

TEST(KinematicChain, ToolOffsetAppendsToTip) {
  const auto chain = fixture_chain("planar_2r.urdf");
  const auto extended = chain.with_tool_offset(compose(chain.tool_offset(), RigidTransform::from_translation(0.5, 0, 0)));
  EXPECT_NEAR(forward_kinematics(extended, Eigen::Vector2d(0, 0)).translation().x(), 2.5, 1e-15);
}
