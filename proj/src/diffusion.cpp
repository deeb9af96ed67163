#include "canopy/diffusion.hpp"

#include <cmath>

#include "canopy/errors.hpp"

namespace canopy {

namespace {

void check_t(int t, const DiffusionSchedule& sched, const char* who) {
  if (t < 0 || t > sched.t_steps)
    throw BoundsError(std::string(who) + ": t = " + std::to_string(t) + " outside [0, " +
                      std::to_string(sched.t_steps) + "]");
}

}  // namespace

DiffusionSchedule DiffusionSchedule::linear(int t_steps, double beta_start, double beta_end,
                                            int ddim_steps, int t_thres) {
  if (t_steps < 1 || ddim_steps < 1 || ddim_steps > t_steps)
    throw ContractError("DiffusionSchedule: bad step counts");
  if (t_thres >= ddim_steps) throw ContractError("DiffusionSchedule: t_thres >= ddim_steps");
  DiffusionSchedule s;
  s.t_steps = t_steps;
  s.ddim_steps = ddim_steps;
  s.t_thres = t_thres;
  s.betas.resize(t_steps);
  s.alpha_bars.resize(t_steps + 1);
  s.alpha_bars[0] = 1.0;
  for (int i = 0; i < t_steps; ++i) {
    const double frac = t_steps > 1 ? static_cast<double>(i) / (t_steps - 1) : 0.0;
    s.betas[i] = beta_start + (beta_end - beta_start) * frac;
    s.alpha_bars[i + 1] = s.alpha_bars[i] * (1.0 - s.betas[i]);
  }
  return s;
}

std::vector<int> DiffusionSchedule::ddim_times() const {
  std::vector<int> times;
  times.reserve(static_cast<size_t>(ddim_steps) + 1);
  for (int i = ddim_steps; i >= 1; --i)
    times.push_back(static_cast<int>(static_cast<long long>(i) * t_steps / ddim_steps));
  times.push_back(0);
  return times;
}

LatentGrid q_sample(const LatentGrid& x0, int t, const LatentGrid& eps,
                    const DiffusionSchedule& sched) {
  check_t(t, sched, "q_sample");
  if (eps.data.size() != x0.data.size()) throw ShapeError("q_sample: eps shape mismatch");
  const double abar = sched.alpha_bars[t];
  LatentGrid out = x0;
  out.data = std::sqrt(abar) * x0.data + std::sqrt(1.0 - abar) * eps.data;
  return out;
}

LatentGrid ddim_step(const LatentGrid& x_t, const LatentGrid& eps_hat, int t, int t_prev,
                     const DiffusionSchedule& sched) {
  check_t(t, sched, "ddim_step");
  check_t(t_prev, sched, "ddim_step");
  if (t_prev >= t) throw ContractError("ddim_step: t_prev must precede t");
  if (eps_hat.data.size() != x_t.data.size()) throw ShapeError("ddim_step: eps shape mismatch");
  const double abar = sched.alpha_bars[t];
  const double abar_prev = sched.alpha_bars[t_prev];
  LatentGrid out = x_t;
  // predict the clean latent, then renoise it to the earlier time
  const Eigen::ArrayXd x0_hat = (x_t.data - std::sqrt(1.0 - abar) * eps_hat.data) / std::sqrt(abar);
  out.data = std::sqrt(abar_prev) * x0_hat + std::sqrt(1.0 - abar_prev) * eps_hat.data;
  return out;
}

}  // namespace canopy
