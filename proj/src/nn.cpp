#include "canopy/nn.hpp"

#include <cmath>

namespace canopy::nn {

Linear::Linear(Eigen::Index in, Eigen::Index out, Rng& rng, double scale) {
  const double sd = scale > 0.0 ? scale : std::sqrt(2.0 / static_cast<double>(in));
  Eigen::ArrayXd w(in * out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, sd);
  W = Tensor::from_array({in, out}, std::move(w), true);
  b = Tensor::zeros({out}, true);
}

Mlp::Mlp(Eigen::Index in, const std::vector<Eigen::Index>& hidden, Eigen::Index out, Rng& rng) {
  Eigen::Index prev = in;
  for (auto h : hidden) {
    layers.emplace_back(prev, h, rng);
    prev = h;
  }
  layers.emplace_back(prev, out, rng, std::sqrt(1.0 / static_cast<double>(prev)));
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (size_t i = 0; i + 1 < layers.size(); ++i) h = relu(layers[i](h));
  return layers.back()(h);
}

}  // namespace canopy::nn
