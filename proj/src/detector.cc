#include "aerocoop/detector.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace aerocoop {
namespace {

// Accumulators gathered per vote target cell.
enum Acc {
  kWeight,
  kPosX,
  kPosY,
  kLogL,
  kLogW,
  kLogH,
  kSin,
  kCos,
  kVx,
  kVy,
  kAccCount
};

std::vector<double> gaussian_taps(double sigma) {
  const int rad = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * rad + 1);
  double sum = 0.0;
  for (int i = -rad; i <= rad; ++i) {
    taps[i + rad] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += taps[i + rad];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable filter with zero padding, applied to every channel of f.
Tensor3 separable(const Tensor3& f, const std::vector<double>& taps) {
  const int rad = static_cast<int>(taps.size() / 2);
  Tensor3 tmp(f.dim0(), f.dim1(), f.dim2());
  for (int i = 0; i < f.dim0(); ++i) {
    for (int j = 0; j < f.dim1(); ++j) {
      auto dst = tmp.row(i, j);
      for (int t = -rad; t <= rad; ++t) {
        const int ii = i + t;
        if (ii < 0 || ii >= f.dim0()) continue;
        const auto src = f.row(ii, j);
        for (int k = 0; k < f.dim2(); ++k) dst[k] += taps[t + rad] * src[k];
      }
    }
  }
  Tensor3 out(f.dim0(), f.dim1(), f.dim2());
  for (int i = 0; i < f.dim0(); ++i) {
    for (int j = 0; j < f.dim1(); ++j) {
      auto dst = out.row(i, j);
      for (int t = -rad; t <= rad; ++t) {
        const int jj = j + t;
        if (jj < 0 || jj >= f.dim1()) continue;
        const auto src = tmp.row(i, jj);
        for (int k = 0; k < f.dim2(); ++k) dst[k] += taps[t + rad] * src[k];
      }
    }
  }
  return out;
}

}  // namespace

void HeadConfig::validate() const {
  if (!(vote_sigma_cells > 0.0)) {
    throw std::invalid_argument("head.vote_sigma_cells must be > 0");
  }
  if (!(score_scale > 0.0)) throw std::invalid_argument("head.score_scale must be > 0");
  if (window_radius < 0) throw std::invalid_argument("head.window_radius must be >= 0");
  if (min_cell_mass < 0.0) throw std::invalid_argument("head.min_cell_mass must be >= 0");
}

BevFeature center_head(const BevFeature& f, const HeadConfig& cfg) {
  cfg.validate();
  if (f.data.dim2() != channel::kCount) {
    throw std::invalid_argument("center_head: expected " +
                                std::to_string(channel::kCount) + " channels");
  }
  const BevGrid& g = f.grid;
  const int nx = f.data.dim0();
  const int ny = f.data.dim1();
  Tensor3 votes(nx, ny, kNumClasses);
  Tensor3 acc(nx, ny, kAccCount);
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      const auto cell = f.data.row(ix, iy);
      double total = 0.0;
      int best = 0;
      for (int c = 0; c < kNumClasses; ++c) {
        total += cell[channel::kClassBegin + c];
        if (cell[channel::kClassBegin + c] > cell[channel::kClassBegin + best]) best = c;
      }
      const double mass = cell[channel::kClassBegin + best];
      if (total < cfg.min_cell_mass || mass < cfg.min_cell_mass) continue;
      const double px = g.cell_center_x(ix) + cell[channel::kOffsetX] / total;
      const double py = g.cell_center_y(iy) + cell[channel::kOffsetY] / total;
      const auto target = bev_cell_of(Eigen::Vector3d(px, py, 0.0), g);
      if (!target) continue;
      votes(target->ix, target->iy, best) += mass;
      auto a = acc.row(target->ix, target->iy);
      const double w = mass / total;
      a[kWeight] += mass;
      a[kPosX] += mass * px;
      a[kPosY] += mass * py;
      a[kLogL] += w * cell[channel::kLogLength];
      a[kLogW] += w * cell[channel::kLogWidth];
      a[kLogH] += w * cell[channel::kLogHeight];
      a[kSin] += w * cell[channel::kSinYaw];
      a[kCos] += w * cell[channel::kCosYaw];
      a[kVx] += w * cell[channel::kVelX];
      a[kVy] += w * cell[channel::kVelY];
    }
  }
  const Tensor3 heat = separable(votes, gaussian_taps(cfg.vote_sigma_cells));
  const std::vector<double> box(2 * cfg.window_radius + 1, 1.0);
  const Tensor3 win = separable(acc, box);

  BevFeature out{g, Tensor3(nx, ny, channel::kCount), f.agent, f.domain};
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      auto dst = out.data.row(ix, iy);
      for (int c = 0; c < kNumClasses; ++c) {
        const double v = std::max(0.0, heat(ix, iy, c));
        dst[channel::kClassBegin + c] = v / (v + cfg.score_scale);
      }
      const auto a = win.row(ix, iy);
      if (!(a[kWeight] > 0.0)) continue;
      const double inv = 1.0 / a[kWeight];
      dst[channel::kOffsetX] = a[kPosX] * inv - g.cell_center_x(ix);
      dst[channel::kOffsetY] = a[kPosY] * inv - g.cell_center_y(iy);
      dst[channel::kLogLength] = a[kLogL] * inv;
      dst[channel::kLogWidth] = a[kLogW] * inv;
      dst[channel::kLogHeight] = a[kLogH] * inv;
      dst[channel::kSinYaw] = a[kSin] * inv;
      dst[channel::kCosYaw] = a[kCos] * inv;
      dst[channel::kVelX] = a[kVx] * inv;
      dst[channel::kVelY] = a[kVy] * inv;
    }
  }
  return out;
}

std::vector<Box3D> decode(const BevFeature& f_p, const BevGrid& grid,
                          double threshold) {
  if (f_p.data.dim2() != channel::kCount) {
    std::ostringstream msg;
    msg << "decode: expected " << channel::kCount << " channels, got "
        << f_p.data.dim2();
    throw std::invalid_argument(msg.str());
  }
  if (f_p.data.dim0() != grid.n_x || f_p.data.dim1() != grid.n_y) {
    throw std::invalid_argument("decode: map " + f_p.data.shape_string() +
                                " does not match the grid");
  }
  std::vector<Box3D> boxes;
  const Tensor3& m = f_p.data;
  for (int c = 0; c < kNumClasses; ++c) {
    const int ch = channel::kClassBegin + c;
    for (int ix = 0; ix < grid.n_x; ++ix) {
      for (int iy = 0; iy < grid.n_y; ++iy) {
        const double v = m(ix, iy, ch);
        if (!(v >= threshold) || v <= 0.0) continue;
        bool peak = true;
        for (int dx = -1; dx <= 1 && peak; ++dx) {
          for (int dy = -1; dy <= 1; ++dy) {
            if (dx == 0 && dy == 0) continue;
            const int jx = ix + dx;
            const int jy = iy + dy;
            if (jx < 0 || jy < 0 || jx >= grid.n_x || jy >= grid.n_y) continue;
            const double n = m(jx, jy, ch);
            // A neighbour wins when higher, or equal and earlier in (ix, iy).
            if (n > v || (n == v && (jx < ix || (jx == ix && jy < iy)))) {
              peak = false;
              break;
            }
          }
        }
        if (!peak) continue;
        const auto cell = m.row(ix, iy);
        Box3D b;
        b.label = static_cast<ObjectClass>(c);
        b.size = Eigen::Vector3d(std::exp(cell[channel::kLogLength]),
                                 std::exp(cell[channel::kLogWidth]),
                                 std::exp(cell[channel::kLogHeight]));
        b.center = Eigen::Vector3d(grid.cell_center_x(ix) + cell[channel::kOffsetX],
                                   grid.cell_center_y(iy) + cell[channel::kOffsetY],
                                   -0.5 * b.size.z());
        b.yaw = wrap_angle(std::atan2(cell[channel::kSinYaw], cell[channel::kCosYaw]));
        b.velocity = Eigen::Vector2d(cell[channel::kVelX], cell[channel::kVelY]);
        b.score = std::clamp(v, 0.0, 1.0);
        boxes.push_back(b);
      }
    }
  }
  return boxes;
}

}  // namespace aerocoop
