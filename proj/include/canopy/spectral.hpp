#pragma once

#include <Eigen/Core>
#include <complex>

#include "canopy/errors.hpp"

namespace canopy::spectral {

// Unitary radix-2 transforms (1/sqrt(N) both ways, so Parseval holds exactly
// in either direction). Sizes must be powers of two.

// In-place 1D transform over x.size() elements.
void fft(Eigen::ArrayXcd& x, bool inverse);

// Row-major h x w image. fft2 = row transforms then column transforms.
Eigen::ArrayXcd fft2(const Eigen::ArrayXcd& img, Eigen::Index h, Eigen::Index w);
Eigen::ArrayXcd ifft2(const Eigen::ArrayXcd& spec, Eigen::Index h, Eigen::Index w);
Eigen::ArrayXcd fft2(const Eigen::ArrayXd& img, Eigen::Index h, Eigen::Index w);

// Centered low-pass on an unshifted spectrum: with DC viewed at the center
// (fftshift coordinates), keep the half-open box [h/2-b, h/2+b) x
// [w/2-b, w/2+b) and zero everything else. Exactly 2b bins survive per axis,
// so the kept area is (2b)^2. Idempotent by construction. Requires
// 1 <= b <= min(h,w)/2.
Eigen::ArrayXcd low_pass(const Eigen::ArrayXcd& spec, Eigen::Index h, Eigen::Index w,
                         Eigen::Index b);

// fft2 -> low_pass -> ifft2 -> real part. The kept box is not conjugate
// symmetric (the half-open convention clips one edge), so the imaginary
// residue is dropped here; energy accounting lives in the spectral domain.
Eigen::ArrayXd filter_low_pass(const Eigen::ArrayXd& img, Eigen::Index h, Eigen::Index w,
                               Eigen::Index b);

// ||low_pass(fft2(img))||^2 / ||fft2(img)||^2.
double retained_energy_fraction(const Eigen::ArrayXd& img, Eigen::Index h, Eigen::Index w,
                                Eigen::Index b);

}  // namespace canopy::spectral
