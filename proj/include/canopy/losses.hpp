#pragma once

#include "canopy/tensor.hpp"

namespace canopy {

// Masked reconstruction error: || m (.) (pred - target) ||_2 / max(#masked, 1)
// where m broadcasts the per-ray supervision mask over channels. Trusted
// synthetic views supervise every ray (mask of ones); generated views with
// untrusted backgrounds restrict to the foreground.
Tensor loss_rgb(const Tensor& pred /*[B,3]*/, const Eigen::ArrayXd& target /*B*3*/,
                const Eigen::ArrayXd& rgb_mask /*B*/);

// Mean over samples on background rays of |1 - exp(-lambda_scale * sigma)|,
// pushing free space toward zero density. Zero when no ray is background.
Tensor loss_sparsity(const Tensor& sigma /*[B*J]*/, const Eigen::ArrayXd& fg_mask /*B*/,
                     Eigen::Index n_rays, double lambda_scale = 1.0);

// Mean per-ray entropy of normalized sample opacities over foreground rays,
// concentrating each ray's mass onto few samples. Zero when no ray is
// foreground.
Tensor loss_entropy(const Tensor& alphas /*[B,J]*/, const Eigen::ArrayXd& fg_mask /*B*/);

struct LossWeights {
  double rgb = 1.0;
  double sparsity = 1e-3;
  double entropy = 1e-6;
  double sparsity_scale = 1.0;
};

struct LossTerms {
  Tensor total, rgb, sparsity, entropy;
};

// rgb_mask gates color supervision; fg_mask splits rays into foreground
// (entropy) and background (sparsity).
LossTerms reconstruction_loss(const Tensor& pred_color, const Tensor& sigma, const Tensor& alphas,
                              const Eigen::ArrayXd& target, const Eigen::ArrayXd& rgb_mask,
                              const Eigen::ArrayXd& fg_mask, Eigen::Index n_rays,
                              const LossWeights& w);

}  // namespace canopy
