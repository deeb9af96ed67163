#pragma once

#include <optional>
#include <vector>

#include "canopy/camera.hpp"
#include "canopy/image.hpp"
#include "canopy/nn.hpp"
#include "canopy/rng.hpp"
#include "canopy/tensor.hpp"

namespace canopy {

// gamma(p) = [p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^{L-1} pi p),
// cos(2^{L-1} pi p)] applied per coordinate; x: [m,d] -> [m, d*(1+2L)]
// (d*2L without the passthrough).
Tensor positional_encode(const Tensor& x, int n_freqs, bool include_input = true);
inline Eigen::Index positional_encode_dim(Eigen::Index d, int n_freqs, bool include_input = true) {
  return d * ((include_input ? 1 : 0) + 2 * n_freqs);
}

struct FieldConfig {
  int pos_enc_levels = 6;
  int width = 64;
  int depth = 3;          // hidden layers in the trunk
  double sigma_scale = 1.0;  // pre-activation gain on the density head
};

// Positionally encoded MLP radiance field: sigma(x) >= 0 through softplus,
// rgb(x) in (0,1) through sigmoid. No view dependence; the synthetic scenes
// are matte.
class RadianceField {
 public:
  RadianceField() = default;
  RadianceField(const FieldConfig& cfg, Rng& rng);

  struct Output {
    Tensor sigma;  // [m]
    Tensor rgb;    // [m,3]
  };
  Output query(const Tensor& points /*[m,3]*/) const;

  std::vector<Tensor> params() const;
  const FieldConfig& config() const { return cfg_; }

  nn::Mlp trunk;
  nn::Linear sigma_head;
  nn::Linear color_head;

 private:
  FieldConfig cfg_;
};

// Stratified samples along pinhole rays: bin j of ray r draws
// t = near + (far-near)*(j+u)/J with u ~ U[0,1) (u = 0.5 deterministic when
// jitter is null). deltas are forward differences, the last one padding to
// far.
struct RaySamples {
  Eigen::ArrayXd ts;      // B*J
  Eigen::ArrayXd deltas;  // B*J
  Tensor points;          // [B*J, 3] leaf
  Eigen::Index n_rays = 0, n_samples = 0;
};

RaySamples sample_along_rays(const std::vector<Ray>& rays, double near, double far,
                             Eigen::Index n_samples, Rng* jitter);

struct RenderOut {
  Tensor color;   // [B,3]
  Tensor depth;   // [B]
  Tensor acc;     // [B]
  Tensor alphas;  // [B,J]
  Tensor sigma;   // [B*J]
};

// Optional point_map rewrites sample positions before the field query
// (deformation hook): takes [m,3] points, returns [m,3].
using PointMap = std::function<Tensor(const Tensor&)>;

RenderOut render_samples(const RadianceField& field, const RaySamples& s,
                         const Eigen::Vector3d& background, const PointMap& point_map = {});

// Full-frame inference render (no graph). Rays go through every pixel center.
struct FrameRender {
  ImageRgb color;
  ImageGray depth;
  ImageGray acc;
};
FrameRender render_frame(const RadianceField& field, const Camera& cam, Eigen::Index n_samples,
                         const Eigen::Vector3d& background, const PointMap& point_map = {},
                         Eigen::Index row_batch = 8);

}  // namespace canopy
