#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "canopy/errors.hpp"

namespace canopy {

// Every knob the pipeline reads, flat and typed. Field initializers are the
// defaults; a config file and then --set overrides are layered on top.
struct PipelineConfig {
  // output layout
  std::string out_dir = "out";
  std::string data_dir;  // empty -> <out_dir>/data
  std::string stages = "all";

  // determinism root; every stage derives named substreams from it
  int seed = 7;

  // synthetic capture
  std::string scene = "blob";
  int image_size = 64;
  int n_frames = 12;
  double jitter_rot_deg = 0.0;
  double jitter_trans_frac = 0.0;
  double orbit_radius = 4.0;
  double orbit_min_elev_deg = -20.0;
  double orbit_max_elev_deg = 25.0;
  double focal_scale = 1.2;
  double near = 2.5;
  double far = 5.0;

  // viewpoint rig for depth conditioning and generation
  int rig_views = 13;
  double rig_span_deg = 120.0;
  double rig_elev_deg = 10.0;
  double rig_radius = 4.0;

  // radiance field
  int field_levels = 6;
  int field_width = 48;
  int field_depth = 2;

  // fitting
  int source_steps = 3000;
  int avatar_steps = 2500;
  int rays_per_batch = 384;
  int samples_per_ray = 32;
  double lr = 5e-3;
  double lr_final = 5e-4;
  double lambda_sp = 0.05;
  double lambda_entropy = 1e-3;
  double deform_reg = 1e-3;
  int code_dim = 8;
  int deform_width = 64;
  int deform_depth = 2;

  // diffusion
  int t_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  int ddim_steps = 50;
  int t_thres = 45;
  int filter_b = 16;
  int denoiser_steps = 1200;
  int denoiser_batch = 3;
  double denoiser_lr = 2e-3;
  std::string prompt = "a portrait of a friendly person";

  // metrics
  double pck_tau = 0.1;
  double kp_dark_threshold = 0.45;
};

// Layered load: defaults, then the JSON file (if given), then key=value
// overrides. Unknown keys and malformed values raise ConfigError.
PipelineConfig load_config(const std::optional<std::string>& file,
                           const std::vector<std::string>& overrides);

// Range/consistency checks shared by every entry point.
void validate_config(const PipelineConfig& cfg);

// Effective config as a flat JSON object (sorted keys), and its hash — the
// identity stamped into manifests and the metrics report.
nlohmann::json config_to_json(const PipelineConfig& cfg);
std::string config_hash_hex(const PipelineConfig& cfg);

// One line per key: name, type, default, doc. Backs the `keys` subcommand.
std::string config_schema_text();

}  // namespace canopy
