#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "aerocoop/geometry.h"
#include "aerocoop/scenesim.h"

using namespace aerocoop;

namespace {

CameraModel pinhole(double f, double cx, double cy, int w = 200, int h = 100) {
  Eigen::Matrix3d k;
  k << f, 0, cx, 0, f, cy, 0, 0, 1;
  return camera_from_parts(k, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), w, h,
                           90.0);
}

// Raw matrix form of the pinhole model, kept separate from the library.
Eigen::Vector3d homogeneous(const Eigen::Vector3d& p, const CameraModel& c) {
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = c.rotation;
  rt.col(3) = c.translation;
  return c.intrinsics * rt * p.homogeneous();
}

}  // namespace

TEST(MakeCamera, FocalFromFov) {
  const auto c = make_camera(70.0, 1600, 900, Eigen::Vector3d::Zero(), 0, 0, 0);
  // 800 / tan(35 deg) = 800 / 0.7002075382 = 1142.5184
  EXPECT_NEAR(c.fx(), 1142.5184, 1e-3);
  EXPECT_NEAR(c.fy(), c.fx(), 1e-12);
  EXPECT_DOUBLE_EQ(c.cx(), 800.0);
  EXPECT_DOUBLE_EQ(c.cy(), 450.0);
}

TEST(MakeCamera, NinetyDegreesUnitFocal) {
  const auto c = make_camera(90.0, 2, 2, Eigen::Vector3d::Zero(), 0, 0, 0);
  EXPECT_NEAR(c.fx(), 1.0, 1e-15);
}

TEST(MakeCamera, RejectsBadFov) {
  EXPECT_THROW(make_camera(0.0, 10, 10, Eigen::Vector3d::Zero(), 0, 0, 0),
               std::invalid_argument);
  EXPECT_THROW(make_camera(180.0, 10, 10, Eigen::Vector3d::Zero(), 0, 0, 0),
               std::invalid_argument);
  EXPECT_THROW(make_camera(60.0, 0, 10, Eigen::Vector3d::Zero(), 0, 0, 0),
               std::invalid_argument);
}

TEST(MakeCamera, LooksForwardAtZeroAngles) {
  const auto c = make_camera(70.0, 704, 256, Eigen::Vector3d(0, 0, -2), 0, 0, 0);
  EXPECT_NEAR((c.forward() - Eigen::Vector3d::UnitX()).norm(), 0.0, 1e-12);
  // A point ahead and to the right lands right of center.
  const auto px = project_world_to_pixel({10, 1, -2}, c);
  ASSERT_TRUE(px);
  EXPECT_GT(px->u, c.cx());
  EXPECT_NEAR(px->v, c.cy(), 1e-9);
  EXPECT_NEAR(px->depth, 10.0, 1e-12);
}

TEST(MakeCamera, RotationsStayOrthonormal) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-180, 180);
  for (int i = 0; i < 200; ++i) {
    const auto c = make_camera(60, 100, 80, Eigen::Vector3d(1, 2, 3), ang(rng), ang(rng),
                               ang(rng));
    EXPECT_NEAR((c.rotation * c.rotation.transpose() - Eigen::Matrix3d::Identity()).norm(),
                0.0, 1e-9);
    EXPECT_NEAR(c.rotation.determinant(), 1.0, 1e-9);
  }
}

TEST(CameraFromParts, ChecksInvariants) {
  Eigen::Matrix3d k;
  k << 100, 0, 50, 0, 100, 40, 0, 0, 1;
  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(0, 0) = -1;  // det -1
  EXPECT_THROW(camera_from_parts(k, bad, Eigen::Vector3d::Zero(), 100, 80, 60),
               std::invalid_argument);
  Eigen::Matrix3d off = k;
  off(0, 2) = 150;  // principal point outside
  EXPECT_THROW(camera_from_parts(off, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(),
                                 100, 80, 60),
               std::invalid_argument);
}

TEST(Project, OpticalAxis) {
  const auto c = pinhole(100, 100, 50);
  const auto px = project_world_to_pixel({0, 0, 10}, c);
  ASSERT_TRUE(px);
  EXPECT_DOUBLE_EQ(px->u, 100);
  EXPECT_DOUBLE_EQ(px->v, 50);
  EXPECT_DOUBLE_EQ(px->depth, 10);
}

TEST(Project, HandEvaluated) {
  Eigen::Matrix3d k;
  k << 100, 0, 0, 0, 100, 0, 0, 0, 1;
  CameraModel c;
  c.intrinsics = k;
  const auto px = project_world_to_pixel({1, 2, 10}, c);
  ASSERT_TRUE(px);
  EXPECT_NEAR(px->u, 10, 1e-12);
  EXPECT_NEAR(px->v, 20, 1e-12);
  EXPECT_NEAR(px->depth, 10, 1e-12);
  const auto back = unproject_pixel_to_world(10, 20, 10, c);
  EXPECT_NEAR((back - Eigen::Vector3d(1, 2, 10)).norm(), 0.0, 1e-12);
}

TEST(Project, BehindCamera) {
  const auto c = pinhole(100, 100, 50);
  EXPECT_FALSE(project_world_to_pixel({0, 0, -1}, c));
  EXPECT_FALSE(project_world_to_pixel({0, 0, 0}, c));
}

TEST(Project, MatchesHomogeneousForm) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50, 50);
  const auto c = make_camera(70, 704, 256, Eigen::Vector3d(3, -2, -20), -40, 25, 5);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d p(u(rng), u(rng), u(rng));
    const auto px = project_world_to_pixel(p, c);
    const Eigen::Vector3d h = homogeneous(p, c);
    if (h.z() <= 0) {
      EXPECT_FALSE(px);
      continue;
    }
    ASSERT_TRUE(px);
    EXPECT_NEAR(px->u * h.z(), h.x(), 1e-9 * std::max(1.0, std::abs(h.x())));
    EXPECT_NEAR(px->v * h.z(), h.y(), 1e-9 * std::max(1.0, std::abs(h.y())));
    EXPECT_NEAR(px->depth, h.z(), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(Unproject, OpticalAxis) {
  const auto c = pinhole(100, 100, 50);
  const auto p = unproject_pixel_to_world(100, 50, 5, c);
  EXPECT_NEAR(p.norm() - 5.0, 0.0, 1e-12);
  EXPECT_NEAR(p.z(), 5.0, 1e-12);
}

TEST(Unproject, RejectsNonPositiveDepth) {
  const auto c = pinhole(100, 100, 50);
  EXPECT_THROW(unproject_pixel_to_world(1, 1, 0.0, c), std::invalid_argument);
  EXPECT_THROW(unproject_pixel_to_world(1, 1, -2.0, c), std::invalid_argument);
}

TEST(Unproject, RoundTripOnRigCameras) {
  const auto rig = RigConfig::standard();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uu(0, 704), vv(0, 256), dd(0.1, 500);
  for (const auto& e : rig.agents) {
    const auto c = camera_for(e, 704, 256);
    double worst = 0;
    for (int i = 0; i < 3000; ++i) {
      const double u = uu(rng), v = vv(rng), d = dd(rng);
      const auto p = unproject_pixel_to_world(u, v, d, c);
      const auto px = project_world_to_pixel(p, c);
      ASSERT_TRUE(px);
      const auto q = unproject_pixel_to_world(px->u, px->v, px->depth, c);
      worst = std::max(worst, (q - p).norm());
    }
    EXPECT_LT(worst, 1e-6) << e.name;
  }
}

TEST(PixelRay, DepthIsRayParameter) {
  const auto c = make_camera(70, 704, 256, Eigen::Vector3d(0, 0, -80), -90, -60, 0);
  const auto ray = pixel_ray(100.5, 30.5, c);
  const Eigen::Vector3d p = c.center() + 42.0 * ray;
  EXPECT_NEAR(camera_depth(p, c), 42.0, 1e-9);
  EXPECT_NEAR((p - unproject_pixel_to_world(100.5, 30.5, 42.0, c)).norm(), 0.0, 1e-9);
}

TEST(BevGrid, DefaultExtent) {
  const BevGrid g;
  EXPECT_EQ(g.n_x, 320);
  EXPECT_EQ(g.n_y, 220);
  const auto m = BevGrid::make(0, 160, -55, 55, 0.5);
  EXPECT_EQ(m, g);
  EXPECT_THROW(BevGrid::make(0, 0, -1, 1, 0.5), std::invalid_argument);
  EXPECT_THROW(BevGrid::make(0, 1, -1, 1, 0.0), std::invalid_argument);
}

TEST(BevCellOf, CornerAndOutside) {
  const BevGrid g;
  const auto c = bev_cell_of({g.x_min, g.y_min, 0}, g);
  ASSERT_TRUE(c);
  EXPECT_EQ(*c, (BevCell{0, 0}));
  EXPECT_FALSE(bev_cell_of({g.x_max + 1, 0, 0}, g));
  EXPECT_FALSE(bev_cell_of({g.x_max, 0, 0}, g));
  EXPECT_FALSE(bev_cell_of({10, g.y_min - 0.01, 0}, g));
  const auto mid = bev_cell_of({10.74, -0.26, 3}, g);
  ASSERT_TRUE(mid);
  EXPECT_EQ(mid->ix, 21);
  EXPECT_EQ(mid->iy, 109);
}

TEST(BevCellOf, TotalOnOddInputs) {
  const BevGrid g;
  const double inf = std::numeric_limits<double>::infinity();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(bev_cell_of({nan, 0, 0}, g));
  EXPECT_FALSE(bev_cell_of({inf, 0, 0}, g));
  EXPECT_FALSE(bev_cell_of({0, -inf, 0}, g));
  EXPECT_FALSE(bev_cell_of({1e300, 1e300, 0}, g));
}

TEST(Angles, Wrap) {
  EXPECT_NEAR(wrap_angle(-std::numbers::pi), std::numbers::pi, 1e-15);
  EXPECT_NEAR(wrap_angle(3 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-12);
  EXPECT_NEAR(deg_to_rad(180), std::numbers::pi, 1e-15);
}
