#ifndef AEROCOOP_DETECTOR_H_
#define AEROCOOP_DETECTOR_H_

#include <vector>

#include <Eigen/Core>

#include "aerocoop/bevlift.h"
#include "aerocoop/geometry.h"
#include "aerocoop/types.h"

namespace aerocoop {

struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();  // l, w, h
  double yaw = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  ObjectClass label = ObjectClass::kCar;
  double score = 1.0;
};

// Parameters of the voting head that turns a splatted feature map into
// per-class center heatmaps plus regression channels.
struct HeadConfig {
  double vote_sigma_cells = 1.5;  // Gaussian smoothing of the vote maps
  double score_scale = 0.2;       // heat = votes / (votes + score_scale)
  int window_radius = 2;          // cells pooled for the regression means
  double min_cell_mass = 0.05;    // cells lighter than this cast no vote

  void validate() const;
};

// Every cell votes its dominant class mass at cell_center + mean offset.
// The output uses the shared channel layout: class channels hold heatmaps in
// [0, 1]; the offset channels hold (voted center - cell center) and the
// remaining channels the vote-weighted means over a square window.
BevFeature center_head(const BevFeature& f, const HeadConfig& cfg = {});

// 3x3 local maxima of each class heatmap at or above threshold. Equal
// neighbours resolve to the lowest (ix, iy). Boxes sit on the ground
// (center z = -h / 2). Throws std::invalid_argument for a wrong channel
// count or a grid mismatch.
std::vector<Box3D> decode(const BevFeature& f_p, const BevGrid& grid,
                          double threshold = 0.3);

}  // namespace aerocoop

#endif  // AEROCOOP_DETECTOR_H_
