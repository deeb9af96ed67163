#pragma once

#include <vector>

#include "canopy/dataset.hpp"
#include "canopy/deform.hpp"
#include "canopy/field.hpp"
#include "canopy/losses.hpp"
#include "canopy/optim.hpp"

namespace canopy {

struct TrainConfig {
  int steps = 2000;
  int rays_per_batch = 512;
  int samples_per_ray = 48;
  double lr = 5e-3;
  double lr_final = 5e-4;  // exponential decay lr -> lr_final across the run
  LossWeights weights;
  double deform_reg = 1e-3;  // mean squared offset penalty
  // Fraction of the run with the deformation frozen at identity. While the
  // canonical field is still wrong everywhere, gradient noise walks the warp
  // away from zero along the field/warp gauge direction, and the offset
  // penalty never fully pulls it back; letting the field settle first avoids
  // most of that drift.
  double deform_warmup = 0.25;
  // Trusted synthetic views supervise color on every ray; generated views
  // with uncontrolled backgrounds restrict supervision to the foreground.
  bool supervise_background = true;
  std::uint64_t seed = 1;
  int log_every = 100;
  Eigen::Vector3d background = Eigen::Vector3d(1, 1, 1);
};

struct TrainLogRow {
  int step = 0;
  double total = 0, rgb = 0, sparsity = 0, entropy = 0;
  double batch_psnr = 0;
};

struct FitResult {
  RadianceField field;
  DeformationField deform;
  bool deformable = false;
  std::vector<TrainLogRow> log;
  double wall_seconds = 0;
};

// Fit the field to posed views; every batch draws rays from one view.
FitResult fit_radiance_field(const std::vector<ViewData>& views, const FieldConfig& fcfg,
                             const TrainConfig& tcfg);

// Same loop with a per-view deformation between samples and the field.
FitResult fit_deformable_field(const std::vector<ViewData>& views, const FieldConfig& fcfg,
                               const DeformConfig& dcfg, const TrainConfig& tcfg);

struct EvalResult {
  double mean_psnr = 0;
  double depth_mae = 0;  // over ground-truth foreground pixels
};

// Renders the bare canonical field (no deformation) at each view's camera and
// scores against the stored truth.
EvalResult evaluate_field(const RadianceField& field, const std::vector<ViewData>& views,
                          Eigen::Index n_samples, const Eigen::Vector3d& background);

// Mean |offset| across sampled foreground points and all views (deformation
// drift diagnostic).
double mean_deformation(const DeformationField& def, const std::vector<ViewData>& views,
                        int points_per_view, std::uint64_t seed);

struct FieldStats {
  double fg_entropy_mean = 0;  // per-ray opacity entropy, foreground rays
  double bg_acc_mean = 0;      // accumulated opacity, background rays
};

// Full-frame pass over every view collecting the regularizer diagnostics the
// loss terms steer: how concentrated foreground rays are and how opaque the
// background still is.
FieldStats evaluate_field_stats(const RadianceField& field, const std::vector<ViewData>& views,
                                Eigen::Index n_samples, const Eigen::Vector3d& background);

}  // namespace canopy
