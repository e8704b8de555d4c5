#include <gtest/gtest.h>

#include "arbench/transform.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

using namespace arbench;
using namespace arbench::testing;

TEST(Transform, ComposeWithIdentityIsNoop) {
  Rng rng(1);
  const RigidTransform T = rng.transform(1.0);
  EXPECT_TRUE(approx_equal(compose(RigidTransform::identity(), T), T, 1e-15));
  EXPECT_TRUE(approx_equal(compose(T, RigidTransform::identity()), T, 1e-15));
}

TEST(Transform, TranslationsCommute) {
  const auto T = compose(RigidTransform::from_translation(1, 0, 0), RigidTransform::from_translation(0, 2, 0));
  EXPECT_TRUE(approx_equal(T, RigidTransform::from_translation(1, 2, 0), 0.0));
}

TEST(Transform, GroupLawsOnRandomSamples) {
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const auto a = rng.transform(5.0);
    const auto b = rng.transform(5.0);
    const auto c = rng.transform(5.0);
    EXPECT_TRUE(approx_equal(compose(a, invert(a)), RigidTransform::identity(), 1e-9));
    EXPECT_TRUE(approx_equal(compose(invert(a), a), RigidTransform::identity(), 1e-9));
    EXPECT_TRUE(approx_equal(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-9));
  }
}

TEST(Transform, ComposeMatchesHomogeneousMatrices) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto a = rng.transform(2.0);
    const auto b = rng.transform(2.0);
    const Eigen::Matrix4d expected = a.matrix() * b.matrix();
    EXPECT_LT((compose(a, b).matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((invert(a).matrix() - a.matrix().inverse()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Transform, QuaternionStaysUnitAfterLongProducts) {
  Rng rng(4);
  RigidTransform T;
  for (int i = 0; i < 10000; ++i) T = compose(T, rng.transform(0.1));
  EXPECT_NEAR(T.rotation().norm(), 1.0, 1e-15 * 10);
}

TEST(Transform, RpyMatchesElementaryRotations) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d rpy = rng.vector(-3.0, 3.0);
    const Eigen::Matrix3d expected = rot_z(rpy.z()) * rot_y(rpy.y()) * rot_x(rpy.x());
    EXPECT_LT((quaternion_from_rpy(rpy).toRotationMatrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::Vector3d back = rpy_from_quaternion(quaternion_from_rpy(rpy));
    EXPECT_LT((quaternion_from_rpy(back).toRotationMatrix() - expected).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Transform, ApplyRotatesThenTranslates) {
  const auto T = RigidTransform(Eigen::Vector3d(1, 0, 0), Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ())));
  const Eigen::Vector3d p = T.apply(Eigen::Vector3d(1, 0, 0));
  EXPECT_NEAR(p.x(), 1.0, 1e-15);
  EXPECT_NEAR(p.y(), 1.0, 1e-15);
}

TEST(Transform, QuaternionDistanceIgnoresSign) {
  Rng rng(6);
  const auto q = rng.rotation();
  Eigen::Quaterniond neg(-q.w(), -q.x(), -q.y(), -q.z());
  EXPECT_NEAR(quaternion_distance(q, neg), 0.0, 1e-15);
}

TEST(Transform, RejectsZeroQuaternion) {
  EXPECT_THROW(RigidTransform(Eigen::Vector3d::Zero(), Eigen::Quaterniond(0, 0, 0, 0)), InvalidArgument);
  EXPECT_THROW(RigidTransform(Eigen::Vector3d::Zero(), Eigen::Quaterniond(NAN, 0, 0, 0)), InvalidArgument);
}

TEST(Transform, NormalizesNearlyUnitInput) {
  const RigidTransform T(Eigen::Vector3d::Zero(), Eigen::Quaterniond(2, 0, 0, 0));
  EXPECT_DOUBLE_EQ(T.rotation().w(), 1.0);
}
