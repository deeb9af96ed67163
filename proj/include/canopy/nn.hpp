#pragma once

#include <vector>

#include "canopy/rng.hpp"
#include "canopy/tensor.hpp"

namespace canopy::nn {

// Fully connected layer, x:[m,in] -> [m,out]. Weights are He-initialized by
// default; pass gain=1 with fan-avg for near-linear heads.
struct Linear {
  Tensor W;  // [in, out]
  Tensor b;  // [out]

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, Rng& rng, double scale = -1.0);

  Tensor operator()(const Tensor& x) const { return add_row_bias(matmul(x, W), b); }

  void params(std::vector<Tensor>& out) const {
    out.push_back(W);
    out.push_back(b);
  }
};

// relu MLP: hidden layers with relu, linear final layer.
struct Mlp {
  std::vector<Linear> layers;

  Mlp() = default;
  Mlp(Eigen::Index in, const std::vector<Eigen::Index>& hidden, Eigen::Index out, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  void params(std::vector<Tensor>& out) const {
    for (const auto& l : layers) l.params(out);
  }
};

}  // namespace canopy::nn
