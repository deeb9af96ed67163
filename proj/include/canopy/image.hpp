#pragma once

#include <Eigen/Core>

#include "canopy/errors.hpp"

namespace canopy {

// Row-major h x w x 3, values in [0,1].
struct ImageRgb {
  Eigen::Index h = 0, w = 0;
  Eigen::ArrayXd data;

  ImageRgb() = default;
  ImageRgb(Eigen::Index h_, Eigen::Index w_) : h(h_), w(w_), data(Eigen::ArrayXd::Zero(h_ * w_ * 3)) {}

  double& at(Eigen::Index r, Eigen::Index c, int ch) { return data[(r * w + c) * 3 + ch]; }
  double at(Eigen::Index r, Eigen::Index c, int ch) const { return data[(r * w + c) * 3 + ch]; }
};

// Row-major h x w scalar field (depth, mask, single channel).
struct ImageGray {
  Eigen::Index h = 0, w = 0;
  Eigen::ArrayXd data;

  ImageGray() = default;
  ImageGray(Eigen::Index h_, Eigen::Index w_) : h(h_), w(w_), data(Eigen::ArrayXd::Zero(h_ * w_)) {}

  double& at(Eigen::Index r, Eigen::Index c) { return data[r * w + c]; }
  double at(Eigen::Index r, Eigen::Index c) const { return data[r * w + c]; }
};

}  // namespace canopy
