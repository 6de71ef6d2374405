#include "aerocoop/bevlift.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace aerocoop {

BevFeature lift_splat(const AgentFrame& frame, const DepthDistribution& dist,
                      const CameraModel& cam, const BevGrid& grid) {
  if (dist.q.dim0() != frame.height || dist.q.dim1() != frame.width ||
      dist.q.dim2() != dist.bins.k) {
    std::ostringstream msg;
    msg << "lift_splat: distribution " << dist.q.shape_string()
        << " does not match frame " << frame.height << "x" << frame.width;
    throw std::invalid_argument(msg.str());
  }
  if (cam.image_width != frame.width || cam.image_height != frame.height) {
    throw std::invalid_argument("lift_splat: camera size differs from frame");
  }
  if (frame.visibility.rows() != frame.height ||
      frame.visibility.cols() != frame.width) {
    throw std::invalid_argument("lift_splat: visibility mask missing");
  }
  const int channels = frame.features.dim2();
  BevFeature out{grid, Tensor3(grid.n_x, grid.n_y, channels), frame.agent,
                 frame.domain};
  const Eigen::Vector3d origin = cam.center();
  for (int r = 0; r < frame.height; ++r) {
    for (int c = 0; c < frame.width; ++c) {
      if (!frame.visible(r, c)) continue;
      const Eigen::Vector3d ray = pixel_ray(c, r, cam);
      const auto q = dist.q.row(r, c);
      const auto feat = frame.features.row(r, c);
      for (int k = 0; k < dist.bins.k; ++k) {
        if (q[k] == 0.0) continue;
        const auto cell = bev_cell_of(origin + dist.bins.centers[k] * ray, grid);
        if (!cell) continue;
        auto dst = out.data.row(cell->ix, cell->iy);
        for (int ch = 0; ch < channels; ++ch) dst[ch] += q[k] * feat[ch];
      }
    }
  }
  return out;
}

Tensor3 bev_gt_heatmap(const Scene& scene, const BevGrid& grid) {
  Tensor3 out(grid.n_x, grid.n_y, kNumClasses);
  for (const auto& obj : scene.objects) {
    const auto cell = bev_cell_of(obj.center, grid);
    if (!cell) continue;
    const double sigma =
        std::max(0.5, std::min(obj.size.x(), obj.size.y()) / 4.0) / grid.cell_size;
    const int rad = static_cast<int>(std::ceil(3.0 * sigma));
    const int cls = static_cast<int>(obj.label);
    for (int ix = std::max(0, cell->ix - rad);
         ix <= std::min(grid.n_x - 1, cell->ix + rad); ++ix) {
      for (int iy = std::max(0, cell->iy - rad);
           iy <= std::min(grid.n_y - 1, cell->iy + rad); ++iy) {
        const double dx = ix - cell->ix;
        const double dy = iy - cell->iy;
        const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        out(ix, iy, cls) = std::max(out(ix, iy, cls), g);
      }
    }
  }
  return out;
}

}  // namespace aerocoop
