#include "canopy/dataset.hpp"

#include <cmath>

namespace canopy {

std::optional<double> ray_sphere(const Ray& r, const Eigen::Vector3d& center, double radius) {
  const Eigen::Vector3d oc = r.origin - center;
  const double b = oc.dot(r.dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double t0 = -b - s, t1 = -b + s;
  if (t0 > 1e-9) return t0;
  if (t1 > 1e-9) return t1;
  return std::nullopt;
}

std::optional<double> ray_ellipsoid(const Ray& r, const Eigen::Vector3d& center,
                                    const Eigen::Vector3d& semi) {
  // scale space so the ellipsoid is the unit sphere; t is preserved only if
  // we renormalize, so solve the quadratic in the original parameter
  const Eigen::Vector3d o = (r.origin - center).cwiseQuotient(semi);
  const Eigen::Vector3d d = r.dir.cwiseQuotient(semi);
  const double a = d.squaredNorm();
  const double b = o.dot(d);
  const double c = o.squaredNorm() - 1.0;
  const double disc = b * b - a * c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double t0 = (-b - s) / a, t1 = (-b + s) / a;
  if (t0 > 1e-9) return t0;
  if (t1 > 1e-9) return t1;
  return std::nullopt;
}

namespace {

Eigen::Vector3d shade(const Eigen::Vector3d& albedo, const Eigen::Vector3d& normal,
                      const Eigen::Vector3d& light_dir, double ambient) {
  const double diff = std::max(0.0, normal.dot(light_dir));
  return (albedo * (ambient + (1.0 - ambient) * diff)).cwiseMin(1.0);
}

struct Hit {
  double t;
  Eigen::Vector3d normal;
  Eigen::Vector3d albedo;
};

}  // namespace

FrameTruth render_sphere_scene(const SphereScene& scene, const Camera& cam) {
  FrameTruth out;
  out.color = ImageRgb(cam.in.height, cam.in.width);
  out.depth = ImageGray(cam.in.height, cam.in.width);
  out.mask = ImageGray(cam.in.height, cam.in.width);
  for (int r = 0; r < cam.in.height; ++r) {
    for (int c = 0; c < cam.in.width; ++c) {
      const Ray ray = cam.ray_for_index(r, c);
      const auto t = ray_sphere(ray, scene.center, scene.radius);
      Eigen::Vector3d col = scene.background;
      if (t) {
        const Eigen::Vector3d p = ray.origin + *t * ray.dir;
        const Eigen::Vector3d n = (p - scene.center).normalized();
        col = shade(scene.albedo, n, scene.light_dir, scene.ambient);
        out.depth.at(r, c) = *t;
        out.mask.at(r, c) = 1.0;
      }
      for (int ch = 0; ch < 3; ++ch) out.color.at(r, c, ch) = col[ch];
    }
  }
  return out;
}

FrameTruth render_blob_scene(const BlobFaceScene& scene, const Camera& cam) {
  const Eigen::Vector3d eye_l = scene.head_center +
      Eigen::Vector3d(-scene.eye_offset.x(), scene.eye_offset.y(), scene.eye_offset.z());
  const Eigen::Vector3d eye_r = scene.head_center + scene.eye_offset;
  const Eigen::Vector3d mouth_c = scene.head_center + scene.mouth_center;

  FrameTruth out;
  out.color = ImageRgb(cam.in.height, cam.in.width);
  out.depth = ImageGray(cam.in.height, cam.in.width);
  out.mask = ImageGray(cam.in.height, cam.in.width);
  for (int r = 0; r < cam.in.height; ++r) {
    for (int c = 0; c < cam.in.width; ++c) {
      const Ray ray = cam.ray_for_index(r, c);
      std::optional<Hit> best;
      auto consider = [&](std::optional<double> t, const Eigen::Vector3d& normal,
                          const Eigen::Vector3d& albedo) {
        if (t && (!best || *t < best->t)) best = Hit{*t, normal, albedo};
      };
      if (auto t = ray_ellipsoid(ray, scene.head_center, scene.head_semi)) {
        const Eigen::Vector3d p = ray.origin + *t * ray.dir;
        Eigen::Vector3d n = (p - scene.head_center)
                                .cwiseQuotient(scene.head_semi.cwiseProduct(scene.head_semi))
                                .normalized();
        consider(t, n, scene.skin_albedo);
      }
      for (const Eigen::Vector3d& ec : {eye_l, eye_r}) {
        if (auto t = ray_sphere(ray, ec, scene.eye_radius)) {
          const Eigen::Vector3d p = ray.origin + *t * ray.dir;
          consider(t, (p - ec).normalized(), scene.eye_albedo);
        }
      }
      if (auto t = ray_ellipsoid(ray, mouth_c, scene.mouth_semi)) {
        const Eigen::Vector3d p = ray.origin + *t * ray.dir;
        Eigen::Vector3d n = (p - mouth_c)
                                .cwiseQuotient(scene.mouth_semi.cwiseProduct(scene.mouth_semi))
                                .normalized();
        consider(t, n, scene.mouth_albedo);
      }

      Eigen::Vector3d col = scene.background;
      if (best) {
        col = shade(best->albedo, best->normal, scene.light_dir, scene.ambient);
        out.depth.at(r, c) = best->t;
        out.mask.at(r, c) = 1.0;
      }
      for (int ch = 0; ch < 3; ++ch) out.color.at(r, c, ch) = col[ch];
    }
  }
  return out;
}

Landmarks blob_landmarks(const BlobFaceScene& scene) {
  Landmarks lm;
  lm.left_eye = scene.head_center +
      Eigen::Vector3d(-scene.eye_offset.x(), scene.eye_offset.y(), scene.eye_offset.z());
  lm.right_eye = scene.head_center + scene.eye_offset;
  lm.mouth = scene.head_center + scene.mouth_center;
  lm.head_center = scene.head_center;
  return lm;
}

std::vector<Camera> orbit_cameras(const Intrinsics& in, const Eigen::Vector3d& target,
                                  double radius, int n, double min_elev_deg, double max_elev_deg,
                                  std::uint64_t seed) {
  if (n < 1) throw ContractError("orbit_cameras: need n >= 1");
  const double deg = M_PI / 180.0;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  auto rng = Rng::substream(seed, "orbit-phase");
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<Camera> cams;
  cams.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double u = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
    const double el = deg * (min_elev_deg + u * (max_elev_deg - min_elev_deg));
    const double az = phase + golden * static_cast<double>(i);
    const Eigen::Vector3d offset(std::sin(az) * std::cos(el), std::sin(el),
                                 std::cos(az) * std::cos(el));
    cams.push_back(Camera::look_at(in, target + radius * offset, target, {0, 1, 0}));
  }
  return cams;
}

Camera jitter_camera(const Camera& cam, double max_rot_deg, double max_trans, Rng& rng) {
  Camera out = cam;
  if (max_rot_deg > 0.0) {
    Eigen::Vector3d axis;
    do {
      axis = {rng.normal(), rng.normal(), rng.normal()};
    } while (axis.norm() < 1e-6);
    axis.normalize();
    const double angle = rng.uniform(0.5, 1.0) * max_rot_deg * M_PI / 180.0;
    const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    out.cam_to_world.block<3, 3>(0, 0) = r * cam.rotation();
  }
  if (max_trans > 0.0) {
    Eigen::Vector3d dir;
    do {
      dir = {rng.normal(), rng.normal(), rng.normal()};
    } while (dir.norm() < 1e-6);
    dir.normalize();
    out.cam_to_world.block<3, 1>(0, 3) += rng.uniform(0.5, 1.0) * max_trans * dir;
  }
  return out;
}

std::vector<ProjectedKeypoint> project_landmarks(const Landmarks& lm, const Camera& cam) {
  std::vector<ProjectedKeypoint> out(Landmarks::count);
  for (int i = 0; i < Landmarks::count; ++i) {
    try {
      out[i].px = cam.project(lm[i]);
      out[i].visible = true;
    } catch (const ContractError&) {
      out[i].visible = false;
    }
  }
  return out;
}

}  // namespace canopy
