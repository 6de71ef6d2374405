#ifndef AEROCOOP_GEOMETRY_H_
#define AEROCOOP_GEOMETRY_H_

#include <optional>

#include <Eigen/Core>

namespace aerocoop {

// World frame: x forward, y right, z down (ground plane at z = 0, altitude h
// is z = -h). Camera frame: x right, y down, z along the optical axis.
//
// The pinhole model is d * [u v 1]^T = K (R p + T): the 3x3 intrinsic matrix
// applied to the camera-frame point. This is the same map as K [I|0] times the
// homogeneous 4x4 extrinsic [R T; 0 1] acting on [p; 1].
struct CameraModel {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  int image_width = 0;
  int image_height = 0;
  double fov_deg = 0.0;

  double fx() const { return intrinsics(0, 0); }
  double fy() const { return intrinsics(1, 1); }
  double cx() const { return intrinsics(0, 2); }
  double cy() const { return intrinsics(1, 2); }

  // Camera center in world coordinates (-R^T T).
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
  // Optical axis direction in world coordinates.
  Eigen::Vector3d forward() const { return rotation.row(2).transpose(); }
};

// Builds a camera and checks the model invariants (orthonormal R with
// det +1, positive focal lengths, principal point inside the image).
// Throws std::invalid_argument on violation.
CameraModel camera_from_parts(const Eigen::Matrix3d& intrinsics,
                              const Eigen::Matrix3d& rotation,
                              const Eigen::Vector3d& translation,
                              int image_width, int image_height,
                              double fov_deg);

// Body attitude (body -> world) for intrinsic pitch, then yaw, then roll.
// Pitch is about the body y (right) axis, positive nose up; yaw about the
// body z (down) axis, positive turning right; roll about the body x axis.
Eigen::Matrix3d attitude_from_euler(double pitch_deg, double yaw_deg,
                                    double roll_deg);

// fx = fy = (width / 2) / tan(fov / 2), principal point at the image center,
// R = R_cam<-body * attitude^T, T = -R * position.
CameraModel make_camera(double fov_deg, int width, int height,
                        const Eigen::Vector3d& position, double pitch_deg,
                        double yaw_deg, double roll_deg);

// Camera with a given body attitude (body -> world).
CameraModel make_camera_with_attitude(double fov_deg, int width, int height,
                                      const Eigen::Vector3d& position,
                                      const Eigen::Matrix3d& attitude);

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

// Returns std::nullopt (behind the camera) when the camera-frame depth is
// not positive. Pixels may fall outside the image.
std::optional<PixelDepth> project_world_to_pixel(const Eigen::Vector3d& p,
                                                 const CameraModel& cam);

// Exact inverse of project_world_to_pixel. Throws std::invalid_argument when
// depth <= 0.
Eigen::Vector3d unproject_pixel_to_world(double u, double v, double depth,
                                         const CameraModel& cam);

// World point at unit camera depth along pixel (u, v); the world point at
// depth d is center + d * ray.
Eigen::Vector3d pixel_ray(double u, double v, const CameraModel& cam);

// Camera-frame depth (z) of a world point.
double camera_depth(const Eigen::Vector3d& p, const CameraModel& cam);

struct BevGrid {
  double x_min = 0.0;
  double x_max = 160.0;
  double y_min = -55.0;
  double y_max = 55.0;
  double cell_size = 0.5;
  int n_x = 320;
  int n_y = 220;

  // Throws std::invalid_argument for an empty extent or non-positive cell.
  static BevGrid make(double x_min, double x_max, double y_min, double y_max,
                      double cell_size);

  double cell_center_x(int ix) const { return x_min + (ix + 0.5) * cell_size; }
  double cell_center_y(int iy) const { return y_min + (iy + 0.5) * cell_size; }

  friend bool operator==(const BevGrid&, const BevGrid&) = default;
};

struct BevCell {
  int ix = 0;
  int iy = 0;
  friend bool operator==(const BevCell&, const BevCell&) = default;
};

// Cell containing p.xy, or std::nullopt when p lies outside the grid or is
// not finite.
std::optional<BevCell> bev_cell_of(const Eigen::Vector3d& p,
                                   const BevGrid& grid);

double wrap_angle(double radians);  // to (-pi, pi]
double deg_to_rad(double deg);

}  // namespace aerocoop

#endif  // AEROCOOP_GEOMETRY_H_
