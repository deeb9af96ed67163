#include "canopy/spectral.hpp"

#include <cmath>

namespace canopy::spectral {

namespace {

bool is_pow2(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

void check_dims(Eigen::Index h, Eigen::Index w, Eigen::Index size) {
  if (!is_pow2(h) || !is_pow2(w))
    throw ContractError("spectral: dimensions must be powers of two, got " + std::to_string(h) +
                        "x" + std::to_string(w));
  if (h * w != size)
    throw ShapeError("spectral: buffer size " + std::to_string(size) + " != " +
                     std::to_string(h) + "*" + std::to_string(w));
}

// Iterative Cooley-Tukey on a strided view, unitary normalization.
void fft_strided(std::complex<double>* data, Eigen::Index n, Eigen::Index stride, bool inverse) {
  // bit-reversal permutation
  for (Eigen::Index i = 1, j = 0; i < n; ++i) {
    Eigen::Index bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j |= bit;
    if (i < j) std::swap(data[i * stride], data[j * stride]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (Eigen::Index len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (Eigen::Index i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (Eigen::Index k = 0; k < len / 2; ++k) {
        std::complex<double>& a = data[(i + k) * stride];
        std::complex<double>& b = data[(i + k + len / 2) * stride];
        const std::complex<double> t = b * w;
        b = a - t;
        a += t;
        w *= wl;
      }
    }
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i) data[i * stride] *= norm;
}

Eigen::ArrayXcd fft2_impl(Eigen::ArrayXcd buf, Eigen::Index h, Eigen::Index w, bool inverse) {
  check_dims(h, w, buf.size());
  for (Eigen::Index r = 0; r < h; ++r) fft_strided(buf.data() + r * w, w, 1, inverse);
  for (Eigen::Index c = 0; c < w; ++c) fft_strided(buf.data() + c, h, w, inverse);
  return buf;
}

}  // namespace

void fft(Eigen::ArrayXcd& x, bool inverse) {
  if (!is_pow2(x.size())) throw ContractError("fft: length must be a power of two");
  fft_strided(x.data(), x.size(), 1, inverse);
}

Eigen::ArrayXcd fft2(const Eigen::ArrayXcd& img, Eigen::Index h, Eigen::Index w) {
  return fft2_impl(img, h, w, false);
}

Eigen::ArrayXcd ifft2(const Eigen::ArrayXcd& spec, Eigen::Index h, Eigen::Index w) {
  return fft2_impl(spec, h, w, true);
}

Eigen::ArrayXcd fft2(const Eigen::ArrayXd& img, Eigen::Index h, Eigen::Index w) {
  return fft2_impl(img.cast<std::complex<double>>(), h, w, false);
}

Eigen::ArrayXcd low_pass(const Eigen::ArrayXcd& spec, Eigen::Index h, Eigen::Index w,
                         Eigen::Index b) {
  check_dims(h, w, spec.size());
  if (b < 1 || 2 * b > h || 2 * b > w)
    throw ContractError("low_pass: bandwidth " + std::to_string(b) + " out of range for " +
                        std::to_string(h) + "x" + std::to_string(w));
  Eigen::ArrayXcd out = Eigen::ArrayXcd::Zero(spec.size());
  for (Eigen::Index r = 0; r < h; ++r) {
    const Eigen::Index sr = (r + h / 2) % h;  // fftshift row
    if (sr < h / 2 - b || sr >= h / 2 + b) continue;
    for (Eigen::Index c = 0; c < w; ++c) {
      const Eigen::Index sc = (c + w / 2) % w;
      if (sc < w / 2 - b || sc >= w / 2 + b) continue;
      out[r * w + c] = spec[r * w + c];
    }
  }
  return out;
}

Eigen::ArrayXd filter_low_pass(const Eigen::ArrayXd& img, Eigen::Index h, Eigen::Index w,
                               Eigen::Index b) {
  return ifft2(low_pass(fft2(img, h, w), h, w, b), h, w).real();
}

double retained_energy_fraction(const Eigen::ArrayXd& img, Eigen::Index h, Eigen::Index w,
                                Eigen::Index b) {
  const Eigen::ArrayXcd spec = fft2(img, h, w);
  const double total = spec.abs2().sum();
  if (total <= 0.0) throw NumericError("retained_energy_fraction: zero-energy input");
  return low_pass(spec, h, w, b).abs2().sum() / total;
}

}  // namespace canopy::spectral
