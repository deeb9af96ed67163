#pragma once

#include <vector>

#include "canopy/tensor.hpp"

namespace canopy {

// Adam with bias correction. Parameters must be requires_grad leaves; step()
// consumes whatever backward() accumulated since the last zero_grad().
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  std::int64_t t() const { return t_; }

 private:
  struct Slot {
    Tensor p;
    Eigen::ArrayXd m, v;
  };
  std::vector<Slot> slots_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace canopy
