#include "canopy/losses.hpp"

namespace canopy {

Tensor loss_rgb(const Tensor& pred, const Eigen::ArrayXd& target, const Eigen::ArrayXd& rgb_mask) {
  if (pred.rank() != 2 || pred.cols() != 3)
    throw ShapeError("loss_rgb: pred must be [B,3], got " + shape_str(pred.shape()));
  const Eigen::Index B = pred.rows();
  if (target.size() != B * 3 || rgb_mask.size() != B)
    throw ShapeError("loss_rgb: target/mask sizes do not match prediction");

  Eigen::ArrayXd m3(B * 3);
  Eigen::Index n_fg = 0;
  for (Eigen::Index r = 0; r < B; ++r) {
    const double m = rgb_mask[r] != 0.0 ? 1.0 : 0.0;
    n_fg += m != 0.0;
    m3.segment(r * 3, 3).setConstant(m);
  }
  Tensor diff = sub(pred, Tensor::from_array({B, 3}, target));
  Tensor masked = mul(diff, Tensor::from_array({B, 3}, std::move(m3)));
  Tensor norm = sqrt(sum(mul(masked, masked)));
  return scale(norm, 1.0 / static_cast<double>(std::max<Eigen::Index>(n_fg, 1)));
}

Tensor loss_sparsity(const Tensor& sigma, const Eigen::ArrayXd& fg_mask, Eigen::Index n_rays,
                     double lambda_scale) {
  if (sigma.size() % n_rays != 0)
    throw ShapeError("loss_sparsity: sigma size not divisible by ray count");
  const Eigen::Index J = sigma.size() / n_rays;
  if (fg_mask.size() != n_rays) throw ShapeError("loss_sparsity: mask size mismatch");

  auto idx = std::make_shared<std::vector<std::int64_t>>();
  for (Eigen::Index r = 0; r < n_rays; ++r)
    if (fg_mask[r] == 0.0)
      for (Eigen::Index j = 0; j < J; ++j) idx->push_back(r * J + j);
  if (idx->empty()) return Tensor::scalar(0.0);

  const Eigen::Index m = static_cast<Eigen::Index>(idx->size());
  Tensor sel = gather(sigma, std::move(idx), {m});
  // |1 - exp(-lambda * sigma)|; sigma >= 0 makes the abs a formality
  return mean(abs(add_scalar(scale(exp(scale(sel, -lambda_scale)), -1.0), 1.0)));
}

Tensor loss_entropy(const Tensor& alphas, const Eigen::ArrayXd& fg_mask) {
  Eigen::Index n_fg = 0;
  for (Eigen::Index r = 0; r < fg_mask.size(); ++r) n_fg += fg_mask[r] != 0.0;
  if (n_fg == 0) return Tensor::scalar(0.0);
  return scale(ray_entropy(alphas, fg_mask), 1.0 / static_cast<double>(n_fg));
}

LossTerms reconstruction_loss(const Tensor& pred_color, const Tensor& sigma, const Tensor& alphas,
                              const Eigen::ArrayXd& target, const Eigen::ArrayXd& rgb_mask,
                              const Eigen::ArrayXd& fg_mask, Eigen::Index n_rays,
                              const LossWeights& w) {
  LossTerms t;
  t.rgb = loss_rgb(pred_color, target, rgb_mask);
  t.sparsity = loss_sparsity(sigma, fg_mask, n_rays, w.sparsity_scale);
  t.entropy = loss_entropy(alphas, fg_mask);
  t.total = scale(t.rgb, w.rgb);
  if (w.sparsity != 0.0) t.total = add(t.total, scale(t.sparsity, w.sparsity));
  if (w.entropy != 0.0) t.total = add(t.total, scale(t.entropy, w.entropy));
  return t;
}

}  // namespace canopy
