#pragma once

#include <optional>
#include <vector>

#include "canopy/camera.hpp"
#include "canopy/image.hpp"
#include "canopy/rng.hpp"

namespace canopy {

// Nearest positive intersection distance, if any.
std::optional<double> ray_sphere(const Ray& r, const Eigen::Vector3d& center, double radius);
std::optional<double> ray_ellipsoid(const Ray& r, const Eigen::Vector3d& center,
                                    const Eigen::Vector3d& semi);

struct FrameTruth {
  ImageRgb color;
  ImageGray depth;  // hit distance along the unit ray; 0 on background
  ImageGray mask;   // 1 foreground, 0 background
};

// Matte sphere under a fixed directional light on a constant background.
struct SphereScene {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
  Eigen::Vector3d albedo = Eigen::Vector3d(0.85, 0.35, 0.30);
  Eigen::Vector3d background = Eigen::Vector3d(1.0, 1.0, 1.0);
  Eigen::Vector3d light_dir = Eigen::Vector3d(0.4, 0.7, 0.6).normalized();
  double ambient = 0.35;

  double diameter() const { return 2.0 * radius; }
};

FrameTruth render_sphere_scene(const SphereScene& scene, const Camera& cam);

// Cartoon head: ellipsoid skull, two eye spheres, a mouth ellipsoid. Enough
// structure for landmarks and depth-driven synthesis while staying analytic.
struct BlobFaceScene {
  Eigen::Vector3d head_center = Eigen::Vector3d::Zero();
  Eigen::Vector3d head_semi = Eigen::Vector3d(0.9, 1.1, 0.85);
  double eye_radius = 0.16;
  Eigen::Vector3d eye_offset = Eigen::Vector3d(0.38, 0.25, 0.72);  // +/- x mirror
  Eigen::Vector3d mouth_center = Eigen::Vector3d(0.0, -0.45, 0.75);
  Eigen::Vector3d mouth_semi = Eigen::Vector3d(0.33, 0.13, 0.12);
  Eigen::Vector3d skin_albedo = Eigen::Vector3d(0.87, 0.68, 0.55);
  Eigen::Vector3d eye_albedo = Eigen::Vector3d(0.10, 0.10, 0.13);
  Eigen::Vector3d mouth_albedo = Eigen::Vector3d(0.62, 0.18, 0.20);
  Eigen::Vector3d background = Eigen::Vector3d(1.0, 1.0, 1.0);
  Eigen::Vector3d light_dir = Eigen::Vector3d(0.3, 0.5, 0.81).normalized();
  double ambient = 0.4;

  double diameter() const { return 2.0 * head_semi.maxCoeff(); }
};

FrameTruth render_blob_scene(const BlobFaceScene& scene, const Camera& cam);

struct Landmarks {
  Eigen::Vector3d left_eye, right_eye, mouth, head_center;
  static constexpr int count = 4;
  Eigen::Vector3d operator[](int i) const {
    switch (i) {
      case 0: return left_eye;
      case 1: return right_eye;
      case 2: return mouth;
      default: return head_center;
    }
  }
};

Landmarks blob_landmarks(const BlobFaceScene& scene);

struct ViewData {
  Camera cam;
  FrameTruth truth;
};

// Pinhole projection of the scene landmarks; points at or behind the camera
// plane come back invisible instead of throwing.
struct ProjectedKeypoint {
  Eigen::Vector2d px = Eigen::Vector2d::Zero();
  bool visible = false;
};
std::vector<ProjectedKeypoint> project_landmarks(const Landmarks& lm, const Camera& cam);

// Cameras on a golden-angle spiral over a latitude band looking at `target`.
std::vector<Camera> orbit_cameras(const Intrinsics& in, const Eigen::Vector3d& target,
                                  double radius, int n, double min_elev_deg, double max_elev_deg,
                                  std::uint64_t seed);

// Perturb a pose: rotate up to max_rot_deg about a random axis (drawn in
// [max/2, max] so "jittered" never means "unchanged"), translate by a vector
// of length in [max_trans/2, max_trans]. Zero maxima leave the camera alone.
Camera jitter_camera(const Camera& cam, double max_rot_deg, double max_trans, Rng& rng);

}  // namespace canopy
