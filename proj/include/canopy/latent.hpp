#pragma once

#include "canopy/image.hpp"
#include "canopy/rng.hpp"

namespace canopy {

// Channel-last raster of diffusion state or conditioning planes; data is
// pixel-major ((r*w + c)*channels + ch), which doubles as an [h*w, channels]
// row-major token matrix.
struct LatentGrid {
  Eigen::Index h = 0, w = 0, c = 0;
  Eigen::ArrayXd data;

  LatentGrid() = default;
  LatentGrid(Eigen::Index h_, Eigen::Index w_, Eigen::Index c_)
      : h(h_), w(w_), c(c_), data(Eigen::ArrayXd::Zero(h_ * w_ * c_)) {}

  double& at(Eigen::Index r, Eigen::Index col, Eigen::Index ch) {
    return data[(r * w + col) * c + ch];
  }
  double at(Eigen::Index r, Eigen::Index col, Eigen::Index ch) const {
    return data[(r * w + col) * c + ch];
  }
};

// Fixed 3<->4 channel codec around a scaled orthonormal Hadamard basis: the
// paper-scale autoencoder is out of scope, so "latent space" is an exact
// linear embedding of RGB (decode(encode(x)) == x) with one free channel.
// Images enter at `upscale` times the latent resolution (box downsample) and
// leave through nearest-neighbor upsample.
struct LatentCodec {
  int upscale = 4;
  double gain = 2.0;  // spreads [0,1] colors to roughly unit-variance latents

  LatentGrid encode(const ImageRgb& img) const;
  ImageRgb decode(const LatentGrid& z) const;
};

// Seeded standard-normal draw, the x_T of a sampling trajectory.
LatentGrid gaussian_latent(Eigen::Index h, Eigen::Index w, Eigen::Index c, Rng& rng);

// Per-channel centered low-pass with half-size b: keeps the (2b)x(2b)
// centered frequency box of each channel. The view-agnostic texture fix
// applied to x_T before sampling.
LatentGrid filter_latent(const LatentGrid& z, Eigen::Index b);

}  // namespace canopy
