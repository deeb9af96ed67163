#include "canopy/field.hpp"

#include <cmath>

namespace canopy {

Tensor positional_encode(const Tensor& x, int n_freqs, bool include_input) {
  if (x.rank() != 2) throw ShapeError("positional_encode: expects [m,d], got " + shape_str(x.shape()));
  if (n_freqs < 0) throw ContractError("positional_encode: negative frequency count");
  std::vector<Tensor> parts;
  parts.reserve(1 + 2 * n_freqs);
  if (include_input) parts.push_back(x);
  double freq = M_PI;  // 2^l * pi
  for (int l = 0; l < n_freqs; ++l, freq *= 2.0) {
    Tensor sx = scale(x, freq);
    parts.push_back(sin(sx));
    parts.push_back(cos(sx));
  }
  if (parts.empty()) throw ContractError("positional_encode: empty encoding");
  return parts.size() == 1 ? parts[0] : concat_cols(parts);
}

RadianceField::RadianceField(const FieldConfig& cfg, Rng& rng) : cfg_(cfg) {
  const Eigen::Index in_dim = positional_encode_dim(3, cfg.pos_enc_levels);
  std::vector<Eigen::Index> hidden(static_cast<size_t>(cfg.depth), cfg.width);
  // trunk ends in a relu'd hidden layer; heads read the features
  trunk = nn::Mlp(in_dim, hidden, cfg.width, rng);
  sigma_head = nn::Linear(cfg.width, 1, rng, std::sqrt(1.0 / cfg.width));
  color_head = nn::Linear(cfg.width, 3, rng, std::sqrt(1.0 / cfg.width));
}

RadianceField::Output RadianceField::query(const Tensor& points) const {
  if (points.rank() != 2 || points.cols() != 3)
    throw ShapeError("RadianceField::query: expects [m,3], got " + shape_str(points.shape()));
  Tensor h = relu(trunk(positional_encode(points, cfg_.pos_enc_levels)));
  Output out;
  Tensor sig_raw = sigma_head(h);
  if (cfg_.sigma_scale != 1.0) sig_raw = scale(sig_raw, cfg_.sigma_scale);
  out.sigma = reshape(softplus(sig_raw), {points.rows()});
  out.rgb = sigmoid(color_head(h));
  return out;
}

std::vector<Tensor> RadianceField::params() const {
  std::vector<Tensor> p;
  trunk.params(p);
  sigma_head.params(p);
  color_head.params(p);
  return p;
}

RaySamples sample_along_rays(const std::vector<Ray>& rays, double near, double far,
                             Eigen::Index n_samples, Rng* jitter) {
  if (rays.empty()) throw ContractError("sample_along_rays: no rays");
  if (!(far > near) || near <= 0.0)
    throw ContractError("sample_along_rays: need 0 < near < far");
  if (n_samples < 1) throw ContractError("sample_along_rays: need at least one sample");

  const Eigen::Index B = static_cast<Eigen::Index>(rays.size());
  const Eigen::Index J = n_samples;
  RaySamples out;
  out.n_rays = B;
  out.n_samples = J;
  out.ts.resize(B * J);
  out.deltas.resize(B * J);
  Eigen::ArrayXd pts(B * J * 3);
  const double span = far - near;
  for (Eigen::Index r = 0; r < B; ++r) {
    for (Eigen::Index j = 0; j < J; ++j) {
      const double u = jitter ? jitter->uniform() : 0.5;
      out.ts[r * J + j] = near + span * (static_cast<double>(j) + u) / static_cast<double>(J);
    }
    for (Eigen::Index j = 0; j < J; ++j) {
      const Eigen::Index i = r * J + j;
      out.deltas[i] = (j + 1 < J ? out.ts[i + 1] : far) - out.ts[i];
      const Eigen::Vector3d p = rays[r].origin + out.ts[i] * rays[r].dir;
      pts.segment(i * 3, 3) = p.array();
    }
  }
  out.points = Tensor::from_array({B * J, 3}, std::move(pts));
  return out;
}

RenderOut render_samples(const RadianceField& field, const RaySamples& s,
                         const Eigen::Vector3d& background, const PointMap& point_map) {
  Tensor pts = point_map ? point_map(s.points) : s.points;
  auto q = field.query(pts);
  auto comp = composite(q.sigma, q.rgb, s.ts, s.deltas, s.n_rays, background);
  RenderOut out;
  out.color = comp.color;
  out.depth = comp.depth;
  out.acc = comp.acc;
  out.alphas = comp.alphas;
  out.sigma = q.sigma;
  return out;
}

FrameRender render_frame(const RadianceField& field, const Camera& cam, Eigen::Index n_samples,
                         const Eigen::Vector3d& background, const PointMap& point_map,
                         Eigen::Index row_batch) {
  NoGradGuard ng;
  const Eigen::Index H = cam.in.height, W = cam.in.width;
  FrameRender out;
  out.color = ImageRgb(H, W);
  out.depth = ImageGray(H, W);
  out.acc = ImageGray(H, W);
  for (Eigen::Index r0 = 0; r0 < H; r0 += row_batch) {
    const Eigen::Index rows = std::min(row_batch, H - r0);
    std::vector<Ray> rays;
    rays.reserve(rows * W);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < W; ++c)
        rays.push_back(cam.ray_for_index(static_cast<int>(r0 + r), static_cast<int>(c)));
    auto samples = sample_along_rays(rays, cam.in.near, cam.in.far, n_samples, nullptr);
    auto render = render_samples(field, samples, background, point_map);
    for (Eigen::Index i = 0; i < rows * W; ++i) {
      const Eigen::Index r = r0 + i / W, c = i % W;
      for (int ch = 0; ch < 3; ++ch) out.color.at(r, c, ch) = render.color.value()[i * 3 + ch];
      out.depth.at(r, c) = render.depth.value()[i];
      out.acc.at(r, c) = render.acc.value()[i];
    }
  }
  return out;
}

}  // namespace canopy
