#include "aerocoop/geometry.h"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Geometry>

namespace aerocoop {
namespace {

constexpr double kOrthoTol = 1e-9;

// Camera axes expressed in the body frame: camera x = body y (right),
// camera y = body z (down), camera z = body x (forward).
Eigen::Matrix3d CameraFromBody() {
  Eigen::Matrix3d m;
  m << 0, 1, 0,
       0, 0, 1,
       1, 0, 0;
  return m;
}

}  // namespace

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

CameraModel camera_from_parts(const Eigen::Matrix3d& intrinsics,
                              const Eigen::Matrix3d& rotation,
                              const Eigen::Vector3d& translation,
                              int image_width, int image_height,
                              double fov_deg) {
  const double ortho_err =
      (rotation * rotation.transpose() - Eigen::Matrix3d::Identity())
          .cwiseAbs()
          .maxCoeff();
  if (ortho_err > kOrthoTol) {
    throw std::invalid_argument("camera rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > kOrthoTol) {
    throw std::invalid_argument("camera rotation must have det +1");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw std::invalid_argument("camera image size must be positive");
  }
  const double fx = intrinsics(0, 0);
  const double fy = intrinsics(1, 1);
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
  const double cx = intrinsics(0, 2);
  const double cy = intrinsics(1, 2);
  if (!(cx > 0.0 && cx < image_width && cy > 0.0 && cy < image_height)) {
    throw std::invalid_argument("principal point outside the image");
  }
  if (!translation.allFinite()) {
    throw std::invalid_argument("camera translation is not finite");
  }
  CameraModel cam;
  cam.intrinsics = intrinsics;
  cam.rotation = rotation;
  cam.translation = translation;
  cam.image_width = image_width;
  cam.image_height = image_height;
  cam.fov_deg = fov_deg;
  return cam;
}

Eigen::Matrix3d attitude_from_euler(double pitch_deg, double yaw_deg,
                                    double roll_deg) {
  const Eigen::AngleAxisd pitch(deg_to_rad(pitch_deg), Eigen::Vector3d::UnitY());
  const Eigen::AngleAxisd yaw(deg_to_rad(yaw_deg), Eigen::Vector3d::UnitZ());
  const Eigen::AngleAxisd roll(deg_to_rad(roll_deg), Eigen::Vector3d::UnitX());
  // Intrinsic sequence: each rotation acts about the already-rotated axes.
  return (pitch * yaw * roll).toRotationMatrix();
}

CameraModel make_camera_with_attitude(double fov_deg, int width, int height,
                                      const Eigen::Vector3d& position,
                                      const Eigen::Matrix3d& attitude) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
    std::ostringstream msg;
    msg << "fov_deg must be in (0, 180), got " << fov_deg;
    throw std::invalid_argument(msg.str());
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("image width and height must be positive");
  }
  const double f = (width / 2.0) / std::tan(deg_to_rad(fov_deg) / 2.0);
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = f;
  k(1, 1) = f;
  k(0, 2) = width / 2.0;
  k(1, 2) = height / 2.0;
  const Eigen::Matrix3d r = CameraFromBody() * attitude.transpose();
  return camera_from_parts(k, r, -r * position, width, height, fov_deg);
}

CameraModel make_camera(double fov_deg, int width, int height,
                        const Eigen::Vector3d& position, double pitch_deg,
                        double yaw_deg, double roll_deg) {
  return make_camera_with_attitude(
      fov_deg, width, height, position,
      attitude_from_euler(pitch_deg, yaw_deg, roll_deg));
}

std::optional<PixelDepth> project_world_to_pixel(const Eigen::Vector3d& p,
                                                 const CameraModel& cam) {
  const Eigen::Vector3d pc = cam.rotation * p + cam.translation;
  if (!(pc.z() > 0.0)) return std::nullopt;
  const Eigen::Vector3d h = cam.intrinsics * pc;
  return PixelDepth{h.x() / pc.z(), h.y() / pc.z(), pc.z()};
}

Eigen::Vector3d unproject_pixel_to_world(double u, double v, double depth,
                                         const CameraModel& cam) {
  if (!(depth > 0.0)) {
    throw std::invalid_argument("unproject: depth must be positive");
  }
  const Eigen::Vector3d pc(
      (u - cam.cx()) / cam.fx() * depth,
      (v - cam.cy()) / cam.fy() * depth, depth);
  return cam.rotation.transpose() * (pc - cam.translation);
}

Eigen::Vector3d pixel_ray(double u, double v, const CameraModel& cam) {
  const Eigen::Vector3d dc((u - cam.cx()) / cam.fx(), (v - cam.cy()) / cam.fy(),
                           1.0);
  return cam.rotation.transpose() * dc;
}

double camera_depth(const Eigen::Vector3d& p, const CameraModel& cam) {
  return cam.rotation.row(2).dot(p) + cam.translation.z();
}

BevGrid BevGrid::make(double x_min, double x_max, double y_min, double y_max,
                      double cell_size) {
  if (!(cell_size > 0.0) || !(x_max > x_min) || !(y_max > y_min)) {
    throw std::invalid_argument("BevGrid: empty extent or non-positive cell");
  }
  BevGrid g;
  g.x_min = x_min;
  g.x_max = x_max;
  g.y_min = y_min;
  g.y_max = y_max;
  g.cell_size = cell_size;
  g.n_x = static_cast<int>(std::lround((x_max - x_min) / cell_size));
  g.n_y = static_cast<int>(std::lround((y_max - y_min) / cell_size));
  if (g.n_x <= 0 || g.n_y <= 0) {
    throw std::invalid_argument("BevGrid: extent smaller than one cell");
  }
  return g;
}

std::optional<BevCell> bev_cell_of(const Eigen::Vector3d& p,
                                   const BevGrid& grid) {
  if (!std::isfinite(p.x()) || !std::isfinite(p.y())) return std::nullopt;
  const double fx = std::floor((p.x() - grid.x_min) / grid.cell_size);
  const double fy = std::floor((p.y() - grid.y_min) / grid.cell_size);
  if (fx < 0.0 || fy < 0.0 || fx >= grid.n_x || fy >= grid.n_y) {
    return std::nullopt;
  }
  return BevCell{static_cast<int>(fx), static_cast<int>(fy)};
}

}  // namespace aerocoop
