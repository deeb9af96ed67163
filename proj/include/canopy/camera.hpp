#pragma once

#include <Eigen/Dense>
#include <vector>

#include "canopy/errors.hpp"

namespace canopy {

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d dir;  // unit length
};

struct Intrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
  double near = 0.1, far = 10.0;
};

// Right-handed camera: +x right, +y up, looking down -z. Pixel x grows right,
// pixel y grows down, so the pixel-y axis is flipped against camera y.
struct Camera {
  Intrinsics in;
  Eigen::Matrix4d cam_to_world = Eigen::Matrix4d::Identity();

  Eigen::Vector3d origin() const { return cam_to_world.block<3, 1>(0, 3); }
  Eigen::Matrix3d rotation() const { return cam_to_world.block<3, 3>(0, 0); }
  Eigen::Vector3d forward() const { return -rotation().col(2); }

  // px, py are continuous pixel coordinates (pixel (row i, col j) has center
  // px = j + 0.5, py = i + 0.5).
  Ray ray_for_pixel(double px, double py) const;
  Ray ray_for_index(int row, int col) const {
    return ray_for_pixel(static_cast<double>(col) + 0.5, static_cast<double>(row) + 0.5);
  }

  // World point -> continuous pixel coordinates. Throws ContractError for
  // points at or behind the camera plane.
  Eigen::Vector2d project(const Eigen::Vector3d& p_world) const;

  static Camera look_at(const Intrinsics& in, const Eigen::Vector3d& position,
                        const Eigen::Vector3d& target, const Eigen::Vector3d& up);
};

// Arc of cameras around a point: azimuth sweeps the full span symmetrically
// about zero with both endpoints included; elevation interpolates linearly
// along the same arc. View i sits at
//   pos = look_at + radius * (sin az cos el, sin el, cos az cos el)
// and looks back at look_at. reference_index() is the center view.
struct RigSpec {
  int n_views = 13;
  double azimuth_span_deg = 120.0;
  double elevation_start_deg = 0.0;
  double elevation_end_deg = 0.0;
  double radius = 4.0;
  Eigen::Vector3d look_at = Eigen::Vector3d::Zero();
  Eigen::Vector3d up = Eigen::Vector3d(0, 1, 0);
};

std::vector<Camera> build_rig(const RigSpec& spec, const Intrinsics& in);
inline int rig_reference_index(int n_views) { return n_views / 2; }

}  // namespace canopy
