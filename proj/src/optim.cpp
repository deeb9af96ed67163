#include "canopy/optim.hpp"

#include <cmath>

namespace canopy {

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  slots_.reserve(params.size());
  for (auto& p : params) {
    if (!p.requires_grad()) throw ContractError("Adam: parameter does not require grad");
    Slot s;
    s.m = Eigen::ArrayXd::Zero(p.size());
    s.v = Eigen::ArrayXd::Zero(p.size());
    s.p = std::move(p);
    slots_.push_back(std::move(s));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& s : slots_) {
    const Eigen::ArrayXd& g = s.p.grad();
    if (!g.isFinite().all()) throw NumericError("Adam: non-finite gradient");
    s.m = beta1_ * s.m + (1.0 - beta1_) * g;
    s.v = beta2_ * s.v + (1.0 - beta2_) * g.square();
    s.p.mutable_value() -= lr_ * (s.m / c1) / ((s.v / c2).sqrt() + eps_);
  }
}

void Adam::zero_grad() {
  for (auto& s : slots_) s.p.zero_grad();
}

}  // namespace canopy
