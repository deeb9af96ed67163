#include <chrono>
#include <cstdio>

#include "canopy/image_io.hpp"
#include "canopy/pipeline.hpp"

namespace fs = std::filesystem;

namespace canopy {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<fs::path> dataset_inputs(const Workspace& ws) {
  std::vector<fs::path> in = {ws.cameras_json(), ws.landmarks_json()};
  for (int i = 0; i < ws.cfg.n_frames; ++i) {
    in.push_back(ws.frame_png(i));
    in.push_back(ws.depth_png(i));
    in.push_back(ws.mask_png(i));
  }
  return in;
}

TrainConfig base_train_config(const PipelineConfig& cfg) {
  TrainConfig tc;
  tc.rays_per_batch = cfg.rays_per_batch;
  tc.samples_per_ray = cfg.samples_per_ray;
  tc.lr = cfg.lr;
  tc.lr_final = cfg.lr_final;
  tc.log_every = 50;
  tc.background = Eigen::Vector3d(1, 1, 1);
  return tc;
}

FieldConfig field_config(const PipelineConfig& cfg) {
  FieldConfig fc;
  fc.pos_enc_levels = cfg.field_levels;
  fc.width = cfg.field_width;
  fc.depth = cfg.field_depth;
  return fc;
}

// Inference-quality sample count: training subsamples for speed, full renders
// integrate finer so depth quantization stays below the metric noise floor.
Eigen::Index render_samples_for(const PipelineConfig& cfg) {
  return static_cast<Eigen::Index>(4 * cfg.samples_per_ray);
}

}  // namespace

void run_train_source(const Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineConfig& cfg = ws.cfg;
  LoadedDataset ds = load_dataset(ws);

  TrainConfig tc = base_train_config(cfg);
  tc.steps = cfg.source_steps;
  tc.weights.rgb = 1.0;
  tc.weights.sparsity = 0.0;
  tc.weights.entropy = 0.0;
  tc.supervise_background = true;  // trusted captures pin down free space
  tc.seed = Rng::substream_seed(static_cast<std::uint64_t>(cfg.seed), "train-source");

  FitResult res = fit_radiance_field(ds.views, field_config(cfg), tc);
  save_field_checkpoint(ws.source_ckpt(), res.field, nullptr, cfg);
  write_training_log(ws.source_log(), res.log);

  write_stage_manifest(ws, "train-source", dataset_inputs(ws),
                       {ws.source_ckpt(), ws.source_log()}, seconds_since(t0));
  std::printf("[train-source] %d steps, final loss %.5f -> %s\n", cfg.source_steps,
              res.log.empty() ? 0.0 : res.log.back().total, ws.source_ckpt().string().c_str());
}

void run_render_depth(const Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineConfig& cfg = ws.cfg;
  LoadedField lf = load_field_checkpoint(ws.require(ws.source_ckpt(), "train-source"));

  std::error_code ec;
  fs::create_directories(ws.rig_dir(), ec);
  if (ec || !fs::is_directory(ws.rig_dir()))
    throw IoError("cannot create '" + ws.rig_dir().string() + "'");

  const std::vector<Camera> rig = rig_from_config(cfg);
  const Eigen::Vector3d bg(1, 1, 1);
  std::vector<fs::path> outputs;
  Eigen::Index solid_pixels = 0;

  for (size_t i = 0; i < rig.size(); ++i) {
    FrameRender fr = render_frame(lf.field, rig[i], render_samples_for(cfg), bg);
    ImageGray depth(fr.depth.h, fr.depth.w);
    ImageGray mask(fr.depth.h, fr.depth.w);
    for (Eigen::Index px = 0; px < depth.data.size(); ++px) {
      // a ray that never meets density carries no depth information: report
      // the far plane, matching how the synthetic captures mark background
      const bool solid = fr.acc.data[px] >= 0.5;
      depth.data[px] = solid ? fr.depth.data[px] : cfg.far;
      mask.data[px] = solid ? 1.0 : 0.0;
      solid_pixels += solid;
    }
    const int n = static_cast<int>(i);
    write_png_gray16(ws.rig_depth_png(n), depth);
    write_png_gray16(ws.rig_mask_png(n), mask);
    outputs.push_back(ws.rig_depth_png(n));
    outputs.push_back(ws.rig_mask_png(n));
  }
  write_cameras_json(ws.rig_cameras_json(), rig);
  outputs.push_back(ws.rig_cameras_json());

  if (solid_pixels == 0)
    std::fprintf(stderr,
                 "[render-depth] warning: no ray reached 0.5 opacity; the field looks "
                 "untrained and every depth map is the far plane\n");

  write_stage_manifest(ws, "render-depth", {ws.source_ckpt()}, outputs, seconds_since(t0));
  std::printf("[render-depth] %d viewpoint depth maps -> %s\n", cfg.rig_views,
              ws.rig_dir().string().c_str());
}

void run_train_avatar(const Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineConfig& cfg = ws.cfg;

  std::vector<fs::path> inputs = {ws.rig_cameras_json()};
  const std::vector<Camera> rig =
      read_cameras_json(ws.require(ws.rig_cameras_json(), "render-depth"));

  std::vector<ViewData> views;
  for (size_t i = 0; i < rig.size(); ++i) {
    const int n = static_cast<int>(i);
    ViewData v;
    v.cam = rig[i];
    ImageRgb gen = read_png_rgb(ws.require(ws.gen_png(n), "generate-views"));
    if (gen.h % cfg.image_size != 0)
      throw DataError("generated image size is not a multiple of the training size");
    v.truth.color = downsample_box(gen, static_cast<int>(gen.h / cfg.image_size));
    v.truth.depth = read_png_gray16(ws.require(ws.rig_depth_png(n), "render-depth"));
    v.truth.mask = read_png_gray16(ws.require(ws.rig_mask_png(n), "render-depth"));
    inputs.push_back(ws.gen_png(n));
    inputs.push_back(ws.rig_depth_png(n));
    inputs.push_back(ws.rig_mask_png(n));
    views.push_back(std::move(v));
  }

  TrainConfig tc = base_train_config(cfg);
  tc.steps = cfg.avatar_steps;
  tc.weights.rgb = 1.0;
  tc.weights.sparsity = cfg.lambda_sp;
  tc.weights.entropy = cfg.lambda_entropy;
  tc.supervise_background = false;  // generated backgrounds are not the scene
  tc.deform_reg = cfg.deform_reg;
  tc.seed = Rng::substream_seed(static_cast<std::uint64_t>(cfg.seed), "train-avatar");

  DeformConfig dc;
  dc.code_dim = cfg.code_dim;
  dc.width = cfg.deform_width;
  dc.depth = cfg.deform_depth;

  FitResult res = fit_deformable_field(views, field_config(cfg), dc, tc);
  save_field_checkpoint(ws.avatar_ckpt(), res.field, &res.deform, cfg);
  write_training_log(ws.avatar_log(), res.log);

  write_stage_manifest(ws, "train-avatar", inputs, {ws.avatar_ckpt(), ws.avatar_log()},
                       seconds_since(t0));
  std::printf("[train-avatar] %d steps over %zu generated views -> %s\n", cfg.avatar_steps,
              views.size(), ws.avatar_ckpt().string().c_str());
}

void run_render(const Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineConfig& cfg = ws.cfg;
  LoadedField lf = load_field_checkpoint(ws.require(ws.avatar_ckpt(), "train-avatar"));

  std::error_code ec;
  fs::create_directories(ws.render_dir(), ec);
  if (ec || !fs::is_directory(ws.render_dir()))
    throw IoError("cannot create '" + ws.render_dir().string() + "'");

  const std::vector<Camera> rig = rig_from_config(cfg);
  const Eigen::Vector3d bg(1, 1, 1);
  std::vector<fs::path> outputs;
  for (size_t i = 0; i < rig.size(); ++i) {
    // canonical renders: the deformation table belongs to the fitting views,
    // the avatar itself lives in the shared canonical frame
    FrameRender fr = render_frame(lf.field, rig[i], render_samples_for(cfg), bg);
    const int n = static_cast<int>(i);
    write_png_rgb(ws.render_png(n), fr.color);
    ImageGray depth(fr.depth.h, fr.depth.w);
    for (Eigen::Index px = 0; px < depth.data.size(); ++px)
      depth.data[px] = fr.acc.data[px] >= 0.5 ? fr.depth.data[px] : cfg.far;
    write_png_gray16(ws.render_depth_png(n), depth);
    outputs.push_back(ws.render_png(n));
    outputs.push_back(ws.render_depth_png(n));
  }

  write_stage_manifest(ws, "render", {ws.avatar_ckpt()}, outputs, seconds_since(t0));
  std::printf("[render] %d canonical views -> %s\n", cfg.rig_views,
              ws.render_dir().string().c_str());
}

}  // namespace canopy
