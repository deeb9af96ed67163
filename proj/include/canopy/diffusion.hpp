#pragma once

#include <vector>

#include "canopy/latent.hpp"

namespace canopy {

// Linear-beta noising schedule. alpha_bars[t] is the cumulative signal
// retention after t noising steps, with alpha_bars[0] = 1 (clean data) and
// indices running to t_steps inclusive.
struct DiffusionSchedule {
  int t_steps = 1000;
  Eigen::ArrayXd betas;       // [t_steps], betas[i] applies at step i+1
  Eigen::ArrayXd alpha_bars;  // [t_steps + 1], strictly decreasing from 1
  int ddim_steps = 50;
  int t_thres = 45;  // DDIM step indices above this use reference attention

  static DiffusionSchedule linear(int t_steps = 1000, double beta_start = 1e-4,
                                  double beta_end = 2e-2, int ddim_steps = 50, int t_thres = 45);

  // The sampling trajectory's schedule times, noisiest first:
  // t_i = i * t_steps / ddim_steps for i = ddim_steps .. 1, then 0 as the
  // terminal clean state. DDIM step index i counts down from ddim_steps.
  std::vector<int> ddim_times() const;
};

// Forward noising x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps; eps is
// injected by the caller so sampling stays deterministic.
LatentGrid q_sample(const LatentGrid& x0, int t, const LatentGrid& eps,
                    const DiffusionSchedule& sched);

// One deterministic (eta = 0) DDIM update from schedule time t to t_prev
// given the predicted noise.
LatentGrid ddim_step(const LatentGrid& x_t, const LatentGrid& eps_hat, int t, int t_prev,
                     const DiffusionSchedule& sched);

}  // namespace canopy
