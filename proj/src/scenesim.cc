#include "aerocoop/scenesim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Geometry>

namespace aerocoop {

std::string_view class_name(ObjectClass c) {
  switch (c) {
    case ObjectClass::kCar: return "car";
    case ObjectClass::kTruck: return "truck";
    case ObjectClass::kBus: return "bus";
    case ObjectClass::kPedestrian: return "pedestrian";
  }
  return "car";
}

std::optional<ObjectClass> parse_class(std::string_view name) {
  for (ObjectClass c : kAllClasses) {
    if (class_name(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view domain_name(Domain d) {
  return d == Domain::kGround ? "ground" : "aerial";
}

uint64_t derive_seed(uint64_t base, uint64_t stream) {
  uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::Vector3d class_size_prior(ObjectClass c) {
  switch (c) {
    case ObjectClass::kCar: return {4.5, 1.9, 1.6};
    case ObjectClass::kTruck: return {8.0, 2.5, 3.0};
    case ObjectClass::kBus: return {11.0, 2.9, 3.2};
    case ObjectClass::kPedestrian: return {0.5, 0.5, 1.8};
  }
  return {4.5, 1.9, 1.6};
}

RigConfig RigConfig::standard() {
  RigConfig rig;
  rig.agents = {
      {"vehicle", Domain::kGround, 70.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0},
      {"uav_r", Domain::kAerial, 70.0, 80.0, -90.0, -60.0, 0.0, 80.0, 140.0},
      {"uav_l", Domain::kAerial, 70.0, -70.0, 90.0, -60.0, 0.0, 80.0, 140.0},
  };
  return rig;
}

CameraModel camera_for(const RigEntry& e, int image_width, int image_height) {
  Eigen::Vector3d position(e.forward_m, e.lateral_m, -e.height_m);
  Eigen::Matrix3d attitude =
      attitude_from_euler(e.pitch_deg, e.yaw_deg, e.roll_deg);
  if (e.height_m < 0.0) {
    const Eigen::Matrix3d flip =
        Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX())
            .toRotationMatrix();
    position = flip * position;
    attitude = flip * attitude;
  }
  return make_camera_with_attitude(e.fov_deg, image_width, image_height,
                                   position, attitude);
}

const AgentCamera& Scene::agent(const std::string& name) const {
  for (const auto& a : cameras) {
    if (a.name == name) return a;
  }
  throw std::out_of_range("unknown agent '" + name + "'");
}

std::array<Eigen::Vector3d, 8> box_corners(const SceneObject& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = box.size.x() / 2.0;
  const double hw = box.size.y() / 2.0;
  const double hh = box.size.z() / 2.0;
  std::array<Eigen::Vector3d, 8> out;
  int n = 0;
  for (double dz : {hh, -hh}) {
    for (auto [dx, dy] : {std::pair{hl, hw}, std::pair{hl, -hw},
                          std::pair{-hl, -hw}, std::pair{-hl, hw}}) {
      out[n++] = box.center + Eigen::Vector3d(c * dx - s * dy, s * dx + c * dy, dz);
    }
  }
  return out;
}

double ray_box_entry(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                     const SceneObject& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const Eigen::Vector3d d0 = origin - box.center;
  // Rotate into the box frame (inverse yaw about z).
  const Eigen::Vector3d o(c * d0.x() + s * d0.y(), -s * d0.x() + c * d0.y(), d0.z());
  const Eigen::Vector3d r(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
  const Eigen::Vector3d half = box.size / 2.0;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(r[a]) < 1e-15) {
      if (o[a] < -half[a] || o[a] > half[a]) return -1.0;
      continue;
    }
    double t1 = (-half[a] - o[a]) / r[a];
    double t2 = (half[a] - o[a]) / r[a];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
    if (t_near > t_far) return -1.0;
  }
  if (t_near <= 0.0) return -1.0;
  return t_near;
}

bool footprints_overlap(const SceneObject& a, const SceneObject& b,
                        double gap) {
  struct Rect {
    Eigen::Vector2d center;
    Eigen::Vector2d axis[2];
    double half[2];
  };
  auto make = [gap](const SceneObject& o) {
    Rect r;
    r.center = o.center.head<2>();
    r.axis[0] = {std::cos(o.yaw), std::sin(o.yaw)};
    r.axis[1] = {-std::sin(o.yaw), std::cos(o.yaw)};
    r.half[0] = o.size.x() / 2.0 + gap / 2.0;
    r.half[1] = o.size.y() / 2.0 + gap / 2.0;
    return r;
  };
  const Rect ra = make(a);
  const Rect rb = make(b);
  const Eigen::Vector2d d = rb.center - ra.center;
  for (const Rect* owner : {&ra, &rb}) {
    for (const auto& axis : owner->axis) {
      const double ext_a = ra.half[0] * std::abs(ra.axis[0].dot(axis)) +
                           ra.half[1] * std::abs(ra.axis[1].dot(axis));
      const double ext_b = rb.half[0] * std::abs(rb.axis[0].dot(axis)) +
                           rb.half[1] * std::abs(rb.axis[1].dot(axis));
      if (std::abs(d.dot(axis)) > ext_a + ext_b) return false;
    }
  }
  return true;
}

namespace {

bool inside_extent(const SceneObject& o, const BevGrid& g, double margin) {
  for (const auto& p : box_corners(o)) {
    if (p.x() < g.x_min + margin || p.x() > g.x_max - margin ||
        p.y() < g.y_min + margin || p.y() > g.y_max - margin) {
      return false;
    }
  }
  return true;
}

bool collides(const SceneObject& o, const std::vector<SceneObject>& placed,
              double gap) {
  for (const auto& p : placed) {
    if (footprints_overlap(o, p, gap)) return true;
  }
  return false;
}

ObjectClass sample_class(const std::array<double, kNumClasses>& weights,
                         std::mt19937_64& rng) {
  std::discrete_distribution<int> dist(weights.begin(), weights.end());
  return static_cast<ObjectClass>(dist(rng));
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg, uint64_t seed) {
  if (cfg.num_objects < 0) {
    throw std::invalid_argument("num_objects must be >= 0");
  }
  Scene scene;
  scene.seed = seed;
  for (const auto& e : cfg.rig.agents) {
    scene.cameras.push_back(
        {e.name, e.domain,
         camera_for(e, cfg.rig.image_width, cfg.rig.image_height)});
  }

  std::mt19937_64 rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const BevGrid& g = cfg.extent;
  int next_id = 0;

  for (int n = 0; n < cfg.num_objects; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      SceneObject o;
      o.label = sample_class(cfg.class_weights, rng);
      o.size = class_size_prior(o.label);
      const double x = g.x_min + unit(rng) * (g.x_max - g.x_min);
      const double y = g.y_min + unit(rng) * (g.y_max - g.y_min);
      o.center = {x, y, -o.size.z() / 2.0};
      o.yaw = wrap_angle((2.0 * unit(rng) - 1.0) * std::numbers::pi);
      const double max_speed = o.label == ObjectClass::kPedestrian ? 1.5 : 12.0;
      const double speed = unit(rng) * max_speed;
      o.velocity = {speed * std::cos(o.yaw), speed * std::sin(o.yaw)};
      if (!inside_extent(o, g, cfg.edge_margin_m)) continue;
      if (collides(o, scene.objects, cfg.min_gap_m)) continue;
      o.id = next_id++;
      scene.objects.push_back(o);
      placed = true;
    }
    if (!placed) {
      std::ostringstream msg;
      msg << "could not place object " << n + 1 << " of " << cfg.num_objects
          << " after " << cfg.max_retries << " retries";
      throw CapacityError(msg.str());
    }
  }

  // Parked trucks between the ground camera and a subset of targets.
  const AgentCamera* ground = nullptr;
  for (const auto& a : scene.cameras) {
    if (a.domain == Domain::kGround) {
      ground = &a;
      break;
    }
  }
  if (cfg.occlusion_rate > 0.0 && ground != nullptr) {
    const Eigen::Vector2d eye = ground->camera.center().head<2>();
    const size_t num_targets = scene.objects.size();
    for (size_t t = 0; t < num_targets; ++t) {
      if (unit(rng) >= cfg.occlusion_rate) continue;
      const Eigen::Vector2d to = scene.objects[t].center.head<2>() - eye;
      const double range = to.norm();
      if (range < 20.0) continue;
      const Eigen::Vector2d dir = to / range;
      const double ray_yaw = std::atan2(dir.y(), dir.x());
      for (int attempt = 0; attempt < 10; ++attempt) {
        const double s_min = std::max(9.0, 0.25 * range);
        const double s = s_min + unit(rng) * (0.6 * range - s_min);
        SceneObject truck;
        truck.label = ObjectClass::kTruck;
        truck.size = class_size_prior(ObjectClass::kTruck);
        const Eigen::Vector2d c = eye + s * dir;
        truck.center = {c.x(), c.y(), -truck.size.z() / 2.0};
        truck.yaw = wrap_angle(ray_yaw + std::numbers::pi / 2.0);
        if (!inside_extent(truck, g, cfg.edge_margin_m)) continue;
        if (collides(truck, scene.objects, cfg.min_gap_m)) continue;
        truck.id = next_id++;
        scene.objects.push_back(truck);
        break;
      }
    }
  }
  return scene;
}

AgentFrame render_agent_frame(const Scene& scene, const std::string& agent,
                              const std::vector<double>& bin_centers,
                              const NoiseConfig& noise, uint64_t seed) {
  const AgentCamera& ac = scene.agent(agent);
  const CameraModel& cam = ac.camera;
  const int h = cam.image_height;
  const int w = cam.image_width;
  const int k = static_cast<int>(bin_centers.size());

  AgentFrame f;
  f.agent = agent;
  f.domain = ac.domain;
  f.height = h;
  f.width = w;
  f.features = Tensor3(h, w, channel::kCount);
  f.gt_depth = Array2<double>(h, w, 0.0);
  f.unary_logits = SparseRows(h, w, k);
  f.visibility = Array2<uint8_t>(h, w, 0);
  f.object_index = Array2<int>(h, w, -1);

  const Eigen::Vector3d origin = cam.center();
  Array2<double> zbuf(h, w, std::numeric_limits<double>::infinity());

  for (size_t oi = 0; oi < scene.objects.size(); ++oi) {
    const SceneObject& obj = scene.objects[oi];
    int u0 = 0, u1 = w - 1, v0 = 0, v1 = h - 1;
    bool all_front = true;
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const auto& p : box_corners(obj)) {
      const auto px = project_world_to_pixel(p, cam);
      if (!px || px->depth < 1e-3) {
        all_front = false;
        break;
      }
      umin = std::min(umin, px->u);
      umax = std::max(umax, px->u);
      vmin = std::min(vmin, px->v);
      vmax = std::max(vmax, px->v);
    }
    if (all_front) {
      if (umax < 0.0 || vmax < 0.0 || umin > w - 1 || vmin > h - 1) continue;
      u0 = std::max(0, static_cast<int>(std::floor(umin)));
      u1 = std::min(w - 1, static_cast<int>(std::ceil(umax)));
      v0 = std::max(0, static_cast<int>(std::floor(vmin)));
      v1 = std::min(h - 1, static_cast<int>(std::ceil(vmax)));
    }
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const double t = ray_box_entry(origin, pixel_ray(u, v, cam), obj);
        if (t > 0.0 && t < zbuf(v, u)) {
          zbuf(v, u) = t;
          f.object_index(v, u) = static_cast<int>(oi);
        }
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double inv_two_var =
      noise.depth_sigma > 0.0 ? 1.0 / (2.0 * noise.depth_sigma * noise.depth_sigma)
                              : 0.0;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int oi = f.object_index(v, u);
      if (oi < 0) continue;
      const SceneObject& obj = scene.objects[oi];
      const double depth = zbuf(v, u);
      f.visibility(v, u) = 1;
      f.gt_depth(v, u) = depth;
      const Eigen::Vector3d hit = origin + depth * pixel_ray(u, v, cam);

      auto feat = f.features.row(v, u);
      feat[channel::kClassBegin + static_cast<int>(obj.label)] = 1.0;
      feat[channel::kOffsetX] = obj.center.x() - hit.x();
      feat[channel::kOffsetY] = obj.center.y() - hit.y();
      feat[channel::kLogLength] = std::log(obj.size.x());
      feat[channel::kLogWidth] = std::log(obj.size.y());
      feat[channel::kLogHeight] = std::log(obj.size.z());
      feat[channel::kSinYaw] = std::sin(obj.yaw);
      feat[channel::kCosYaw] = std::cos(obj.yaw);
      feat[channel::kVelX] = obj.velocity.x();
      feat[channel::kVelY] = obj.velocity.y();

      auto logits = f.unary_logits.row(v, u);
      if (noise.depth_sigma > 0.0) {
        for (int b = 0; b < k; ++b) {
          const double diff = bin_centers[b] - depth;
          logits[b] = -diff * diff * inv_two_var;
        }
      } else {
        // Zero sharpness width: the two bins around the depth share the
        // mass so that the expected depth stays exact.
        for (int b = 0; b < k; ++b) logits[b] = -60.0;
        const auto hi = std::upper_bound(bin_centers.begin(), bin_centers.end(), depth);
        if (hi == bin_centers.begin() || hi == bin_centers.end()) {
          logits[hi == bin_centers.begin() ? 0 : k - 1] = 0.0;
        } else {
          const int b = static_cast<int>(hi - bin_centers.begin());
          const double t = (depth - bin_centers[b - 1]) / (bin_centers[b] - bin_centers[b - 1]);
          logits[b - 1] = std::max(std::log(1.0 - t), -60.0);
          logits[b] = std::max(std::log(t), -60.0);
        }
      }
      if (noise.logit_sigma > 0.0) {
        for (int b = 0; b < k; ++b) logits[b] += noise.logit_sigma * gauss(rng);
      }
      if (noise.feat_sigma > 0.0) {
        for (double& x : feat) x += noise.feat_sigma * gauss(rng);
      }
    }
  }
  return f;
}

}  // namespace aerocoop
