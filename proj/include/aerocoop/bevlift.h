#ifndef AEROCOOP_BEVLIFT_H_
#define AEROCOOP_BEVLIFT_H_

#include <string>

#include "aerocoop/depthcrf.h"
#include "aerocoop/geometry.h"
#include "aerocoop/scenesim.h"
#include "aerocoop/tensor.h"
#include "aerocoop/types.h"

namespace aerocoop {

struct BevFeature {
  BevGrid grid;
  Tensor3 data;  // n_x x n_y x C
  std::string agent;
  Domain domain = Domain::kGround;
};

// Sum-pools q_i(k) * features_i into the cell under unproject(u_i, v_i, D_k)
// for every visible pixel i and bin k. Points outside the grid are dropped.
// Throws std::invalid_argument when dist or cam disagree with the frame.
BevFeature lift_splat(const AgentFrame& frame, const DepthDistribution& dist,
                      const CameraModel& cam, const BevGrid& grid);

// Per-class target heatmaps (n_x x n_y x kNumClasses). Each object adds a
// unit-peak Gaussian centred on the cell holding its center; overlapping
// splats of one class combine by maximum. The radius follows the footprint:
// sigma = max(0.5, min(l, w) / 4) meters, truncated at 3 sigma.
Tensor3 bev_gt_heatmap(const Scene& scene, const BevGrid& grid);

}  // namespace aerocoop

#endif  // AEROCOOP_BEVLIFT_H_
