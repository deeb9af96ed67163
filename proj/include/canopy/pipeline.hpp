#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "canopy/config.hpp"
#include "canopy/dataset.hpp"
#include "canopy/denoiser.hpp"
#include "canopy/diffusion.hpp"
#include "canopy/train.hpp"

namespace canopy {

// Resolved artifact layout for one pipeline run. Stages only talk to each
// other through these paths plus the manifests beside them.
struct Workspace {
  PipelineConfig cfg;
  std::filesystem::path out;
  std::filesystem::path data;

  explicit Workspace(PipelineConfig c);

  std::filesystem::path cameras_json() const { return data / "cameras.json"; }
  std::filesystem::path landmarks_json() const { return data / "landmarks.json"; }
  std::filesystem::path frame_png(int i) const;
  std::filesystem::path depth_png(int i) const;
  std::filesystem::path mask_png(int i) const;

  std::filesystem::path source_ckpt() const { return out / "source.ckpt"; }
  std::filesystem::path source_log() const { return out / "train_source_log.csv"; }

  std::filesystem::path rig_dir() const { return out / "rig"; }
  std::filesystem::path rig_cameras_json() const { return rig_dir() / "cameras.json"; }
  std::filesystem::path rig_depth_png(int i) const;
  std::filesystem::path rig_mask_png(int i) const;

  std::filesystem::path denoiser_ckpt() const { return out / "denoiser.ckpt"; }
  std::filesystem::path gen_dir() const { return out / "generated"; }
  std::filesystem::path gen_png(int i) const;
  std::filesystem::path reference_png() const { return gen_dir() / "reference.png"; }
  std::filesystem::path bundles_json() const { return gen_dir() / "bundles.json"; }

  std::filesystem::path avatar_ckpt() const { return out / "avatar.ckpt"; }
  std::filesystem::path avatar_log() const { return out / "train_avatar_log.csv"; }

  std::filesystem::path render_dir() const { return out / "renders"; }
  std::filesystem::path render_png(int i) const;
  std::filesystem::path render_depth_png(int i) const;

  std::filesystem::path metrics_json() const { return out / "metrics_report.json"; }
  std::filesystem::path filter_demo_json() const { return out / "filter_demo.json"; }
  std::filesystem::path manifest_path(const std::string& stage) const;

  // The path if it exists, else MissingArtifactError naming the stage that
  // would have produced it.
  std::filesystem::path require(const std::filesystem::path& p,
                                const std::string& producing_stage) const;
};

// inputs-hash + outputs + wall time, written next to the artifacts after a
// stage finishes; `run` uses it to skip stages whose world hasn't changed.
void write_stage_manifest(const Workspace& ws, const std::string& stage,
                          const std::vector<std::filesystem::path>& inputs,
                          const std::vector<std::filesystem::path>& outputs,
                          double wall_seconds);
bool stage_up_to_date(const Workspace& ws, const std::string& stage);

// ---- shared artifact formats ----

nlohmann::json camera_to_json(const Camera& cam, int frame);
Camera camera_from_json(const nlohmann::json& j);
void write_cameras_json(const std::filesystem::path& path, const std::vector<Camera>& cams);
std::vector<Camera> read_cameras_json(const std::filesystem::path& path);

struct LoadedDataset {
  std::vector<ViewData> views;
  Landmarks landmarks;                                  // world-space
  std::vector<std::vector<ProjectedKeypoint>> proj_kp;  // per frame
};
LoadedDataset load_dataset(const Workspace& ws);
Landmarks read_landmarks_world(const std::filesystem::path& path);

void save_field_checkpoint(const std::filesystem::path& path, const RadianceField& field,
                           const DeformationField* deform, const PipelineConfig& cfg);
struct LoadedField {
  RadianceField field;
  DeformationField deform;
  bool deformable = false;
};
LoadedField load_field_checkpoint(const std::filesystem::path& path);

void save_denoiser_checkpoint(const std::filesystem::path& path, const Denoiser& den,
                              const PipelineConfig& cfg);
Denoiser load_denoiser_checkpoint(const std::filesystem::path& path);

// Trains the conditional denoiser on analytic scene renders; the
// generate-views stage calls this when no checkpoint exists yet, and test
// fixtures call it directly.
Denoiser train_pipeline_denoiser(const PipelineConfig& cfg);

DiffusionSchedule schedule_from_config(const PipelineConfig& cfg);
Intrinsics intrinsics_from_config(const PipelineConfig& cfg, int size);
std::vector<Camera> rig_from_config(const PipelineConfig& cfg);
void write_training_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log);

ImageRgb downsample_box(const ImageRgb& img, int factor);

// ---- stages ----

void run_synth_data(const Workspace& ws);
void run_train_source(const Workspace& ws);
void run_render_depth(const Workspace& ws);
void run_generate_views(const Workspace& ws);
void run_train_avatar(const Workspace& ws);
void run_render(const Workspace& ws);
void run_metrics(const Workspace& ws);
void run_filter_demo(const Workspace& ws);

// The canonical stage order; `names` may be {"all"} or any subset. Stages
// whose manifest still matches their inputs are skipped.
void run_stages(const Workspace& ws, const std::vector<std::string>& names);
std::vector<std::string> all_stage_names();

}  // namespace canopy
