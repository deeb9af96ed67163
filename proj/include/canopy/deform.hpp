#pragma once

#include <vector>

#include "canopy/nn.hpp"
#include "canopy/rng.hpp"
#include "canopy/tensor.hpp"

namespace canopy {

struct DeformConfig {
  int n_views = 0;
  int code_dim = 8;
  int pos_enc_levels = 4;
  int width = 64;
  int depth = 2;
  double code_init_sd = 1e-2;
};

// Per-view deformation: a learned code table (one row per view) plus an MLP
// mapping (gamma(x), code) to a residual offset. The final layer starts at
// zero, so every view initially maps to the canonical space unchanged.
class DeformationField {
 public:
  DeformationField() = default;
  DeformationField(const DeformConfig& cfg, Rng& rng);

  // points: [m,3] sampled in view `view`; returns canonical-space points
  // x + delta(x, code_view).
  Tensor deform(const Tensor& points, Eigen::Index view) const;
  // The raw offsets for diagnostics/regularization.
  Tensor offsets(const Tensor& points, Eigen::Index view) const;

  std::vector<Tensor> params() const;
  const DeformConfig& config() const { return cfg_; }

  Tensor codes;  // [n_views, code_dim]
  nn::Mlp mlp;

 private:
  DeformConfig cfg_;
};

}  // namespace canopy
