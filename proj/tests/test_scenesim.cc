#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "aerocoop/depthcrf.h"
#include "aerocoop/scene_io.h"
#include "aerocoop/scenesim.h"

using namespace aerocoop;

namespace {

constexpr NoiseConfig kNoNoise{0.0, 0.0, 0.0};

Scene rig_scene(std::vector<SceneObject> objects, int w = 704, int h = 256) {
  SceneConfig cfg;
  cfg.num_objects = 0;
  cfg.rig.image_width = w;
  cfg.rig.image_height = h;
  Scene s = generate_scene(cfg, 1);
  for (size_t i = 0; i < objects.size(); ++i) objects[i].id = static_cast<int>(i);
  s.objects = std::move(objects);
  return s;
}

SceneObject make_object(ObjectClass c, Eigen::Vector3d center, double yaw = 0.0) {
  SceneObject o;
  o.label = c;
  o.size = class_size_prior(c);
  o.center = center;
  o.center.z() = -o.size.z() / 2.0;
  o.yaw = yaw;
  return o;
}

std::vector<double> centers(double lo, double hi, int k) {
  return make_depth_bins(lo, hi, k).centers;
}

int count_pixels(const AgentFrame& f, int object) {
  int n = 0;
  for (int v : f.object_index.values()) n += v == object;
  return n;
}

// Pixel centers inside the convex hull of the projected corners.
int hull_pixel_count(const SceneObject& o, const CameraModel& cam) {
  std::vector<Eigen::Vector2d> pts;
  for (const auto& c : box_corners(o)) {
    const auto px = project_world_to_pixel(c, cam);
    pts.emplace_back(px->u, px->v);
  }
  std::sort(pts.begin(), pts.end(), [](auto& a, auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  int n = 0;
  for (int v = 0; v < cam.image_height; ++v) {
    for (int u = 0; u < cam.image_width; ++u) {
      bool inside = true;
      for (size_t i = 0; i < hull.size() && inside; ++i) {
        inside = cross(hull[i], hull[(i + 1) % hull.size()], Eigen::Vector2d(u, v)) >= 0;
      }
      n += inside;
    }
  }
  return n;
}

}  // namespace

TEST(GenerateScene, EmptyScene) {
  SceneConfig cfg;
  cfg.num_objects = 0;
  const Scene s = generate_scene(cfg, 9);
  EXPECT_TRUE(s.objects.empty());
  EXPECT_EQ(s.cameras.size(), 3u);
}

TEST(GenerateScene, Deterministic) {
  SceneConfig cfg;
  cfg.occlusion_rate = 0.5;
  const Scene a = generate_scene(cfg, 77);
  const Scene b = generate_scene(cfg, 77);
  EXPECT_EQ(scene_to_json(a), scene_to_json(b));
  const Scene c = generate_scene(cfg, 78);
  EXPECT_NE(scene_to_json(a), scene_to_json(c));
}

TEST(GenerateScene, PlacementInvariants) {
  SceneConfig cfg;
  cfg.occlusion_rate = 0.5;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = generate_scene(cfg, seed);
    EXPECT_GE(s.objects.size(), 16u);
    for (size_t i = 0; i < s.objects.size(); ++i) {
      const auto& o = s.objects[i];
      EXPECT_GT(o.size.minCoeff(), 0.0);
      for (const auto& c : box_corners(o)) {
        EXPECT_GE(c.x(), cfg.extent.x_min);
        EXPECT_LE(c.x(), cfg.extent.x_max);
        EXPECT_GE(c.y(), cfg.extent.y_min);
        EXPECT_LE(c.y(), cfg.extent.y_max);
      }
      for (size_t j = i + 1; j < s.objects.size(); ++j) {
        EXPECT_FALSE(footprints_overlap(o, s.objects[j], 0.0)) << seed << " " << i << " " << j;
      }
    }
  }
}

TEST(GenerateScene, CapacityError) {
  SceneConfig cfg;
  cfg.num_objects = 5000;
  cfg.max_retries = 50;
  EXPECT_THROW(generate_scene(cfg, 1), CapacityError);
}

TEST(Rig, StandardPoses) {
  const auto rig = RigConfig::standard();
  ASSERT_EQ(rig.agents.size(), 3u);
  const auto veh = camera_for(rig.agents[0], 1600, 900);
  EXPECT_NEAR(veh.center().z(), -2.0, 1e-12);
  EXPECT_NEAR((veh.forward() - Eigen::Vector3d::UnitX()).norm(), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(veh.fov_deg, 70.0);
  const auto ur = camera_for(rig.agents[1], 704, 256);
  const auto ul = camera_for(rig.agents[2], 704, 256);
  EXPECT_NEAR(ur.center().z(), -80.0, 1e-9);
  EXPECT_NEAR(ul.center().z(), -70.0, 1e-9);
  // Both UAVs look 30 degrees below the horizon.
  EXPECT_NEAR(ur.forward().z(), 0.5, 1e-9);
  EXPECT_NEAR(ul.forward().z(), 0.5, 1e-9);
  EXPECT_EQ(rig.agents[1].domain, Domain::kAerial);
}

TEST(Render, UnknownAgent) {
  const Scene s = rig_scene({});
  EXPECT_THROW(render_agent_frame(s, "satellite", centers(1, 101, 100), kNoNoise, 0),
               std::out_of_range);
}

TEST(Render, NoiselessUnaryPeaksAtTruth) {
  const Scene s = rig_scene({make_object(ObjectClass::kCar, {20.3, 0, 0})});
  const auto bins = make_depth_bins(1, 101, 100);
  for (double sigma : {0.0, 2.0}) {
    const NoiseConfig noise{sigma, 0.0, 0.0};
    const auto f = render_agent_frame(s, "vehicle", bins.centers, noise, 0);
    int checked = 0;
    for (int v = 0; v < f.height; ++v) {
      for (int u = 0; u < f.width; ++u) {
        if (!f.visible(v, u)) continue;
        const auto row = f.unary_logits.row(v, u);
        const int am = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        const double d = f.gt_depth(v, u);
        // Exact midpoints between centers may go either way.
        const double frac = (d - bins.d_min) / bins.spacing();
        if (std::abs(frac - std::round(frac)) < 1e-9) continue;
        EXPECT_EQ(am, bins.bin_of(d)) << "sigma " << sigma << " depth " << d;
        ++checked;
      }
    }
    EXPECT_GT(checked, 100);
  }
}

TEST(Render, InterpolatedUnaryKeepsExpectedDepth) {
  const Scene s = rig_scene({make_object(ObjectClass::kBus, {35.0, 2.0, 0}, 0.3)});
  const auto bins = make_depth_bins(1, 171, 170);
  const auto f = render_agent_frame(s, "vehicle", bins.centers, kNoNoise, 0);
  const SparseRows q = normalized_unary(f.unary_logits);
  double worst = 0.0;
  for (int v = 0; v < f.height; ++v) {
    for (int u = 0; u < f.width; ++u) {
      if (!f.visible(v, u)) continue;
      double e = 0.0;
      const auto row = q.row(v, u);
      for (int k = 0; k < bins.k; ++k) e += row[k] * bins.centers[k];
      worst = std::max(worst, std::abs(e - f.gt_depth(v, u)));
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Render, BackgroundIsEmpty) {
  const Scene s = rig_scene({make_object(ObjectClass::kTruck, {30, -3, 0})});
  const NoiseConfig noise;  // defaults, noisy
  const auto f = render_agent_frame(s, "vehicle", centers(1, 101, 100), noise, 5);
  int visible = 0;
  for (int v = 0; v < f.height; ++v) {
    for (int u = 0; u < f.width; ++u) {
      if (f.visible(v, u)) {
        ++visible;
        EXPECT_GT(f.gt_depth(v, u), 0.0);
        continue;
      }
      for (double x : f.features.row(v, u)) ASSERT_EQ(x, 0.0);
      EXPECT_FALSE(f.unary_logits.has_row(v, u));
      EXPECT_EQ(f.object_index(v, u), -1);
    }
  }
  EXPECT_GT(visible, 0);
}

TEST(Render, Deterministic) {
  SceneConfig cfg;
  cfg.rig.image_width = 176;
  cfg.rig.image_height = 64;
  const Scene s = generate_scene(cfg, 4);
  const NoiseConfig noise;
  const auto c = centers(100, 220, 120);
  const auto a = render_agent_frame(s, "uav_r", c, noise, 99);
  const auto b = render_agent_frame(s, "uav_r", c, noise, 99);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.visibility, b.visibility);
  EXPECT_EQ(a.unary_logits.to_dense(), b.unary_logits.to_dense());
}

TEST(Render, ZBufferPicksNearestSurface) {
  SceneConfig cfg;
  cfg.rig.image_width = 88;
  cfg.rig.image_height = 32;
  cfg.occlusion_rate = 0.5;
  const Scene s = generate_scene(cfg, 12);
  for (const auto& ac : s.cameras) {
    const auto f = render_agent_frame(s, ac.name, centers(1, 221, 220), kNoNoise, 0);
    const Eigen::Vector3d origin = ac.camera.center();
    for (int v = 0; v < f.height; ++v) {
      for (int u = 0; u < f.width; ++u) {
        const Eigen::Vector3d ray = pixel_ray(u, v, ac.camera);
        double nearest = std::numeric_limits<double>::infinity();
        int who = -1;
        for (size_t i = 0; i < s.objects.size(); ++i) {
          const double t = ray_box_entry(origin, ray, s.objects[i]);
          if (t > 0.0 && t < nearest) {
            nearest = t;
            who = static_cast<int>(i);
          }
        }
        ASSERT_EQ(f.object_index(v, u), who) << ac.name << " " << u << "," << v;
        if (who >= 0) EXPECT_NEAR(f.gt_depth(v, u), nearest, 1e-9);
      }
    }
  }
}

TEST(Render, PayloadRecoverable) {
  SceneObject o = make_object(ObjectClass::kBus, {40, 5, 0}, -2.1);
  o.velocity = {3.5, -1.25};
  const Scene s = rig_scene({o});
  for (const auto& ac : s.cameras) {
    const auto f = render_agent_frame(s, ac.name, centers(1, 221, 110), kNoNoise, 0);
    int n = 0;
    for (int v = 0; v < f.height; ++v) {
      for (int u = 0; u < f.width; ++u) {
        if (!f.visible(v, u)) continue;
        const auto x = f.features.row(v, u);
        EXPECT_EQ(x[static_cast<int>(ObjectClass::kBus)], 1.0);
        EXPECT_NEAR(std::exp(x[channel::kLogLength]), o.size.x(), 1e-12);
        EXPECT_NEAR(std::exp(x[channel::kLogWidth]), o.size.y(), 1e-12);
        EXPECT_NEAR(std::exp(x[channel::kLogHeight]), o.size.z(), 1e-12);
        EXPECT_NEAR(std::atan2(x[channel::kSinYaw], x[channel::kCosYaw]), o.yaw, 1e-12);
        EXPECT_EQ(x[channel::kVelX], o.velocity.x());
        EXPECT_EQ(x[channel::kVelY], o.velocity.y());
        // Surface point plus offset lands on the center.
        const Eigen::Vector3d hit =
            ac.camera.center() + f.gt_depth(v, u) * pixel_ray(u, v, ac.camera);
        EXPECT_NEAR(hit.x() + x[channel::kOffsetX], o.center.x(), 1e-9);
        EXPECT_NEAR(hit.y() + x[channel::kOffsetY], o.center.y(), 1e-9);
        ++n;
      }
    }
    EXPECT_GT(n, 0) << ac.name;
  }
}

TEST(Render, SmallTargetFromAltitude) {
  const Scene base = rig_scene({});
  const auto& cam0 = base.agent("uav_r").camera;
  const Eigen::Vector3d c = cam0.center();
  for (double along : {-0.9, 0.0, 0.9}) {
    // Ground points up and down the image center column.
    const Eigen::Vector3d ray = pixel_ray(cam0.cx(), cam0.cy() * (1.0 + along), cam0);
    const Eigen::Vector3d g = c + (-c.z() / ray.z()) * ray;
    const SceneObject ped = make_object(ObjectClass::kPedestrian, {g.x(), g.y(), 0});
    const Scene s = rig_scene({ped});
    const auto& cam = s.agent("uav_r").camera;
    const auto f = render_agent_frame(s, "uav_r", centers(1, 221, 220), kNoNoise, 0);
    const int rendered = count_pixels(f, 0);
    EXPECT_EQ(rendered, hull_pixel_count(ped, cam)) << along;
    // A few pixels only, 110 to 230 m out.
    EXPECT_GE(rendered, 1) << along;
    EXPECT_LE(rendered, 16) << along;
  }
}

TEST(Render, OccludedFromGroundSeenFromAir) {
  // Car hidden behind a truck on the vehicle's line of sight.
  const SceneObject truck = make_object(ObjectClass::kTruck, {60, 0, 0});
  const SceneObject car = make_object(ObjectClass::kCar, {75, 0, 0});
  const Scene s = rig_scene({truck, car});
  const auto c = centers(1, 221, 220);
  const auto veh = render_agent_frame(s, "vehicle", c, kNoNoise, 0);
  EXPECT_GT(count_pixels(veh, 0), 0);
  EXPECT_EQ(count_pixels(veh, 1), 0);
  int aerial = 0;
  for (const char* name : {"uav_r", "uav_l"}) {
    aerial += count_pixels(render_agent_frame(s, name, c, kNoNoise, 0), 1);
  }
  EXPECT_GT(aerial, 0);
}

TEST(RayBox, EntryAndMiss) {
  SceneObject b;
  b.center = {10, 0, 0};
  b.size = {2, 2, 2};
  EXPECT_NEAR(ray_box_entry({0, 0, 0}, {1, 0, 0}, b), 9.0, 1e-12);
  EXPECT_LT(ray_box_entry({0, 0, 0}, {-1, 0, 0}, b), 0.0);
  EXPECT_LT(ray_box_entry({0, 5, 0}, {1, 0, 0}, b), 0.0);
  EXPECT_LT(ray_box_entry({10, 0, 0}, {1, 0, 0}, b), 0.0);  // origin inside
}

TEST(Seeds, DeriveSeedMixes) {
  EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}
