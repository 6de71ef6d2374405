#ifndef AEROCOOP_SCENESIM_H_
#define AEROCOOP_SCENESIM_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aerocoop/geometry.h"
#include "aerocoop/tensor.h"
#include "aerocoop/types.h"

namespace aerocoop {

struct SceneObject {
  ObjectClass label = ObjectClass::kCar;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // world, z down
  Eigen::Vector3d size = Eigen::Vector3d::Ones();    // length, width, height
  double yaw = 0.0;                                  // heading about +z
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  int id = 0;
};

// Default box dimensions per class (l, w, h in meters).
Eigen::Vector3d class_size_prior(ObjectClass c);

// One row of the camera rig table. Heights and angles are stored as listed
// in the dataset table; camera_for() turns a row into a pose.
struct RigEntry {
  std::string name;
  Domain domain = Domain::kGround;
  double fov_deg = 70.0;
  double height_m = 2.0;
  double pitch_deg = 0.0;
  double yaw_deg = 0.0;
  double roll_deg = 0.0;
  double forward_m = 0.0;  // x of the agent
  double lateral_m = 0.0;  // y of the agent
};

struct RigConfig {
  int image_width = 704;
  int image_height = 256;
  std::vector<RigEntry> agents;

  // vehicle / uav_r / uav_l with the listed FOV, heights and angles.
  static RigConfig standard();
};

// A row with negative height is read as the mirror image of its literal
// pose: the pose is rotated by 180 degrees about the forward (x) axis, which
// puts the agent |height| above the ground on the opposite side.
CameraModel camera_for(const RigEntry& entry, int image_width,
                       int image_height);

struct SceneConfig {
  int num_objects = 16;
  double occlusion_rate = 0.0;
  // Sampling weights for car, truck, bus, pedestrian.
  std::array<double, kNumClasses> class_weights = {0.45, 0.15, 0.15, 0.25};
  BevGrid extent;
  double min_gap_m = 2.0;       // clearance between BEV footprints
  double edge_margin_m = 2.0;   // clearance to the extent boundary
  int max_retries = 500;
  RigConfig rig = RigConfig::standard();
};

struct AgentCamera {
  std::string name;
  Domain domain = Domain::kGround;
  CameraModel camera;
};

struct Scene {
  std::vector<SceneObject> objects;
  std::vector<AgentCamera> cameras;
  uint64_t seed = 0;
  double timestamp = 0.0;

  // Throws std::out_of_range for an unknown agent.
  const AgentCamera& agent(const std::string& name) const;
};

// Deterministic for fixed (cfg, seed). Targets are placed by rejection
// sampling with non-overlapping inflated footprints; with occlusion_rate > 0
// parked trucks are inserted between the ground camera and targets.
// Throws CapacityError when the targets cannot be placed.
Scene generate_scene(const SceneConfig& cfg, uint64_t seed);

struct NoiseConfig {
  double depth_sigma = 2.0;  // unary sharpness (m)
  double logit_sigma = 1.0;  // additive N(0, s) per depth logit
  double feat_sigma = 0.1;   // additive N(0, s) per feature channel
};

struct AgentFrame {
  std::string agent;
  Domain domain = Domain::kGround;
  int height = 0;
  int width = 0;
  Tensor3 features;       // H x W x channel::kCount
  Array2<double> gt_depth;  // camera-frame depth of the visible surface
  SparseRows unary_logits;  // H x W x K, zeros off the objects
  Array2<uint8_t> visibility;
  Array2<int> object_index;  // index into Scene::objects, -1 for background

  bool visible(int row, int col) const { return visibility(row, col) != 0; }
};

// Z-buffered box rendering. Every pixel center (u = col, v = row) casts a
// ray; the nearest box surface along it wins. Logits use the supplied bin
// centers for this agent. Throws std::out_of_range for an unknown agent.
AgentFrame render_agent_frame(const Scene& scene, const std::string& agent,
                              const std::vector<double>& bin_centers,
                              const NoiseConfig& noise, uint64_t seed);

// Ray/oriented-box intersection. Returns the entry distance t (origin + t *
// dir) or a negative value on a miss or when the origin is inside the box.
double ray_box_entry(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                     const SceneObject& box);

// World-space corners of a box, bottom face first.
std::array<Eigen::Vector3d, 8> box_corners(const SceneObject& box);

// Footprint overlap test for two boxes inflated by `gap` / 2 each.
bool footprints_overlap(const SceneObject& a, const SceneObject& b, double gap);

// Mixes a base seed with a stream index (splitmix64).
uint64_t derive_seed(uint64_t base, uint64_t stream);

}  // namespace aerocoop

#endif  // AEROCOOP_SCENESIM_H_
