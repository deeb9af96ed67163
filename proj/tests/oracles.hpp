// Slow, obviously-correct reference implementations used to pin down the fast
// paths under test. Everything here is written from the definitions directly
// and shares no code with the library.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

namespace oracles {

struct NaiveComposite {
  Eigen::MatrixXd color;   // B x 3
  Eigen::VectorXd depth;   // B
  Eigen::VectorXd acc;     // B
  Eigen::ArrayXd alphas;   // B*J
};

inline NaiveComposite naive_composite(const Eigen::ArrayXd& sigma, const Eigen::ArrayXd& colors,
                                      const Eigen::ArrayXd& ts, const Eigen::ArrayXd& deltas,
                                      Eigen::Index n_rays, const Eigen::Vector3d& bg,
                                      double eps_acc = 1e-6) {
  const Eigen::Index J = sigma.size() / n_rays;
  NaiveComposite out;
  out.color.resize(n_rays, 3);
  out.depth.resize(n_rays);
  out.acc.resize(n_rays);
  out.alphas.resize(sigma.size());
  for (Eigen::Index r = 0; r < n_rays; ++r) {
    double T = 1.0, acc = 0.0, dnum = 0.0;
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (Eigen::Index j = 0; j < J; ++j) {
      const Eigen::Index i = r * J + j;
      const double alpha = 1.0 - std::exp(-sigma[i] * deltas[i]);
      out.alphas[i] = alpha;
      const double w = T * alpha;
      acc += w;
      dnum += w * ts[i];
      for (int ch = 0; ch < 3; ++ch) c[ch] += w * colors[i * 3 + ch];
      T *= 1.0 - alpha;
    }
    c += (1.0 - acc) * bg;
    out.color.row(r) = c.transpose();
    out.acc[r] = acc;
    out.depth[r] = dnum / std::max(acc, eps_acc);
  }
  return out;
}

inline double naive_ray_entropy(const Eigen::ArrayXd& alphas, const Eigen::ArrayXd& fg_mask,
                                Eigen::Index n_rays, double eps_ray = 1e-8) {
  const Eigen::Index J = alphas.size() / n_rays;
  double total = 0.0;
  for (Eigen::Index r = 0; r < n_rays; ++r) {
    if (fg_mask[r] == 0.0) continue;
    double s = 0.0;
    for (Eigen::Index j = 0; j < J; ++j) s += alphas[r * J + j];
    if (s < eps_ray) continue;
    for (Eigen::Index j = 0; j < J; ++j) {
      const double p = alphas[r * J + j] / s;
      if (p > 0.0) total -= p * std::log(p);
    }
  }
  return total;
}

// O(N^2) DFT straight from the definition, with unitary normalization to
// match the library convention. forward: X[k] = 1/sqrt(N) sum_n x[n] w^{kn},
// w = exp(-2*pi*i/N).
inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x,
                                                   bool inverse) {
  const size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  const double sign = inverse ? 2.0 : -2.0;
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (size_t j = 0; j < n; ++j) {
      const double ang = sign * M_PI * static_cast<double>(k * j) / static_cast<double>(n);
      acc += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc / std::sqrt(static_cast<double>(n));
  }
  return out;
}

// Row-major H x W complex image DFT, rows then columns.
inline std::vector<std::complex<double>> naive_dft2(const std::vector<std::complex<double>>& img,
                                                    size_t h, size_t w, bool inverse) {
  std::vector<std::complex<double>> tmp(img.size());
  for (size_t r = 0; r < h; ++r) {
    std::vector<std::complex<double>> row(img.begin() + r * w, img.begin() + (r + 1) * w);
    auto f = naive_dft(row, inverse);
    std::copy(f.begin(), f.end(), tmp.begin() + r * w);
  }
  std::vector<std::complex<double>> out(img.size());
  for (size_t c = 0; c < w; ++c) {
    std::vector<std::complex<double>> col(h);
    for (size_t r = 0; r < h; ++r) col[r] = tmp[r * w + c];
    auto f = naive_dft(col, inverse);
    for (size_t r = 0; r < h; ++r) out[r * w + c] = f[r];
  }
  return out;
}

inline double psnr(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, double peak = 1.0) {
  const double mse = (a - b).square().mean();
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace oracles
