#include "canopy/latent.hpp"

#include <Eigen/Dense>

#include "canopy/spectral.hpp"

namespace canopy {

namespace {

// First three rows of the orthonormalized 4x4 Hadamard matrix. D D^T = I, so
// rgb -> D^T rgb -> D z is lossless and the fourth latent channel spans the
// nullspace the diffusion model is free to use.
Eigen::Matrix<double, 3, 4> hadamard_decode() {
  Eigen::Matrix<double, 3, 4> d;
  d << 1, 1, 1, 1,  //
      1, -1, 1, -1,  //
      1, 1, -1, -1;
  return d / 2.0;
}

}  // namespace

LatentGrid LatentCodec::encode(const ImageRgb& img) const {
  if (img.h % upscale != 0 || img.w % upscale != 0)
    throw ContractError("LatentCodec::encode: image size not divisible by upscale");
  const Eigen::Index h = img.h / upscale, w = img.w / upscale;
  const Eigen::Matrix<double, 4, 3> enc = hadamard_decode().transpose();

  LatentGrid z(h, w, 4);
  const double inv_area = 1.0 / static_cast<double>(upscale * upscale);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
      for (Eigen::Index dr = 0; dr < upscale; ++dr)
        for (Eigen::Index dc = 0; dc < upscale; ++dc)
          for (int ch = 0; ch < 3; ++ch)
            rgb[ch] += img.at(r * upscale + dr, c * upscale + dc, ch);
      rgb *= inv_area;
      const Eigen::Vector4d v = enc * (rgb.array() - 0.5).matrix() * gain;
      for (int ch = 0; ch < 4; ++ch) z.at(r, c, ch) = v[ch];
    }
  }
  return z;
}

ImageRgb LatentCodec::decode(const LatentGrid& z) const {
  if (z.c != 4) throw ShapeError("LatentCodec::decode: expected 4 channels");
  const Eigen::Matrix<double, 3, 4> dec = hadamard_decode();
  ImageRgb img(z.h * upscale, z.w * upscale);
  for (Eigen::Index r = 0; r < z.h; ++r) {
    for (Eigen::Index c = 0; c < z.w; ++c) {
      Eigen::Vector4d v;
      for (int ch = 0; ch < 4; ++ch) v[ch] = z.at(r, c, ch);
      const Eigen::Vector3d rgb = (dec * v / gain).array() + 0.5;
      for (Eigen::Index dr = 0; dr < upscale; ++dr)
        for (Eigen::Index dc = 0; dc < upscale; ++dc)
          for (int ch = 0; ch < 3; ++ch)
            img.at(r * upscale + dr, c * upscale + dc, ch) = rgb[ch];
    }
  }
  return img;
}

LatentGrid gaussian_latent(Eigen::Index h, Eigen::Index w, Eigen::Index c, Rng& rng) {
  LatentGrid z(h, w, c);
  for (Eigen::Index i = 0; i < z.data.size(); ++i) z.data[i] = rng.normal();
  return z;
}

LatentGrid filter_latent(const LatentGrid& z, Eigen::Index b) {
  LatentGrid out(z.h, z.w, z.c);
  Eigen::ArrayXd plane(z.h * z.w);
  for (Eigen::Index ch = 0; ch < z.c; ++ch) {
    for (Eigen::Index p = 0; p < z.h * z.w; ++p) plane[p] = z.data[p * z.c + ch];
    const Eigen::ArrayXd filtered = spectral::filter_low_pass(plane, z.h, z.w, b);
    for (Eigen::Index p = 0; p < z.h * z.w; ++p) out.data[p * z.c + ch] = filtered[p];
  }
  return out;
}

}  // namespace canopy
