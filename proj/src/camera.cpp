#include "canopy/camera.hpp"

#include <cmath>

namespace canopy {

Ray Camera::ray_for_pixel(double px, double py) const {
  Eigen::Vector3d d_cam((px - in.cx) / in.fx, -(py - in.cy) / in.fy, -1.0);
  Ray r;
  r.origin = origin();
  r.dir = (rotation() * d_cam).normalized();
  return r;
}

Eigen::Vector2d Camera::project(const Eigen::Vector3d& p_world) const {
  const Eigen::Vector3d p_cam = rotation().transpose() * (p_world - origin());
  if (p_cam.z() >= -1e-12)
    throw ContractError("project: point is not in front of the camera");
  const double inv = -1.0 / p_cam.z();
  return {in.cx + in.fx * p_cam.x() * inv, in.cy - in.fy * p_cam.y() * inv};
}

Camera Camera::look_at(const Intrinsics& in, const Eigen::Vector3d& position,
                       const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
  const Eigen::Vector3d f = (target - position).normalized();
  if (std::abs(f.dot(up.normalized())) > 1.0 - 1e-9)
    throw ContractError("look_at: view direction is parallel to up");
  const Eigen::Vector3d r = f.cross(up).normalized();
  const Eigen::Vector3d u = r.cross(f);
  Camera cam;
  cam.in = in;
  cam.cam_to_world.block<3, 1>(0, 0) = r;
  cam.cam_to_world.block<3, 1>(0, 1) = u;
  cam.cam_to_world.block<3, 1>(0, 2) = -f;
  cam.cam_to_world.block<3, 1>(0, 3) = position;
  return cam;
}

std::vector<Camera> build_rig(const RigSpec& spec, const Intrinsics& in) {
  if (spec.n_views < 1) throw ContractError("build_rig: need at least one view");
  const double deg = M_PI / 180.0;
  std::vector<Camera> cams;
  cams.reserve(spec.n_views);
  for (int i = 0; i < spec.n_views; ++i) {
    const double u = spec.n_views == 1 ? 0.5 : static_cast<double>(i) / (spec.n_views - 1);
    const double az = deg * spec.azimuth_span_deg * (u - 0.5);
    const double el =
        deg * (spec.elevation_start_deg + u * (spec.elevation_end_deg - spec.elevation_start_deg));
    const Eigen::Vector3d offset(std::sin(az) * std::cos(el), std::sin(el),
                                 std::cos(az) * std::cos(el));
    cams.push_back(Camera::look_at(in, spec.look_at + spec.radius * offset, spec.look_at, spec.up));
  }
  return cams;
}

}  // namespace canopy
