#include "canopy/deform.hpp"

#include "canopy/field.hpp"

namespace canopy {

DeformationField::DeformationField(const DeformConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.n_views < 1) throw ContractError("DeformationField: need n_views >= 1");
  Eigen::ArrayXd init(cfg.n_views * cfg.code_dim);
  for (Eigen::Index i = 0; i < init.size(); ++i) init[i] = rng.normal(0.0, cfg.code_init_sd);
  codes = Tensor::from_array({cfg.n_views, cfg.code_dim}, std::move(init), true);

  const Eigen::Index in_dim = positional_encode_dim(3, cfg.pos_enc_levels) + cfg.code_dim;
  std::vector<Eigen::Index> hidden(static_cast<size_t>(cfg.depth), cfg.width);
  mlp = nn::Mlp(in_dim, hidden, 3, rng);
  // identity warp at init
  mlp.layers.back().W.mutable_value().setZero();
  mlp.layers.back().b.mutable_value().setZero();
}

Tensor DeformationField::offsets(const Tensor& points, Eigen::Index view) const {
  if (points.rank() != 2 || points.cols() != 3)
    throw ShapeError("deform: expects [m,3], got " + shape_str(points.shape()));
  if (view < 0 || view >= cfg_.n_views)
    throw BoundsError("deform: view " + std::to_string(view) + " out of range");
  const Eigen::Index m = points.rows();
  Tensor code_rows = gather_rows(codes, std::vector<std::int64_t>(m, view));
  Tensor in = concat_cols({positional_encode(points, cfg_.pos_enc_levels), code_rows});
  return mlp(in);
}

Tensor DeformationField::deform(const Tensor& points, Eigen::Index view) const {
  return add(points, offsets(points, view));
}

std::vector<Tensor> DeformationField::params() const {
  std::vector<Tensor> p;
  p.push_back(codes);
  mlp.params(p);
  return p;
}

}  // namespace canopy
