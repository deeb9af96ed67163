#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "canopy/generation.hpp"
#include "canopy/image_io.hpp"
#include "canopy/metrics.hpp"
#include "canopy/pipeline.hpp"

namespace fs = std::filesystem;

namespace canopy {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct SceneVariant {
  std::string prompt;
  BlobFaceScene scene;
};

// Prompt-keyed appearance variants give the text channel something real to
// predict during denoiser training.
std::vector<SceneVariant> scene_variants(const PipelineConfig& cfg) {
  SceneVariant base{cfg.prompt, BlobFaceScene{}};
  SceneVariant pale{cfg.prompt + ", pale complexion", BlobFaceScene{}};
  pale.scene.skin_albedo = Eigen::Vector3d(0.93, 0.82, 0.72);
  SceneVariant warm{cfg.prompt + ", deep warm complexion", BlobFaceScene{}};
  warm.scene.skin_albedo = Eigen::Vector3d(0.48, 0.33, 0.25);
  return {base, pale, warm};
}

DenoiserSample make_sample(const PipelineConfig& cfg, const SceneVariant& variant,
                           const Camera& hi_cam, const LatentCodec& codec) {
  // clean latents come from the full-resolution render; conditions live at
  // the latent resolution, so reuse the same pose with scaled intrinsics
  Camera lo_cam = hi_cam;
  lo_cam.in = intrinsics_from_config(cfg, cfg.image_size);

  DenoiserSample s;
  s.x0 = codec.encode(render_blob_scene(variant.scene, hi_cam).color);
  const FrameTruth lo = render_blob_scene(variant.scene, lo_cam);
  s.ctx.depth = depth_condition(lo.depth, cfg.near, cfg.far);

  const auto kps = project_landmarks(blob_landmarks(variant.scene), lo_cam);
  std::vector<Eigen::Vector2d> pts;
  std::vector<bool> vis;
  for (const auto& kp : kps) {
    pts.push_back(kp.px);
    vis.push_back(kp.visible);
  }
  s.ctx.keypoints = rasterize_keypoints(pts, vis, cfg.image_size, cfg.image_size);
  s.ctx.text = text_embedding(variant.prompt);
  return s;
}

}  // namespace

Denoiser train_pipeline_denoiser(const PipelineConfig& cfg) {
  const std::uint64_t root = static_cast<std::uint64_t>(cfg.seed);
  const LatentCodec codec;
  const Intrinsics hi = intrinsics_from_config(cfg, cfg.image_size * codec.upscale);

  std::vector<DenoiserSample> data;
  const auto variants = scene_variants(cfg);
  auto orbit = orbit_cameras(hi, Eigen::Vector3d::Zero(), cfg.rig_radius, cfg.n_frames,
                             cfg.rig_elev_deg - 20.0, cfg.rig_elev_deg + 20.0,
                             Rng::substream_seed(root, "denoise-poses"));
  for (const auto& variant : variants)
    for (const auto& cam : orbit) data.push_back(make_sample(cfg, variant, cam, codec));
  // fold in the generation rig itself so view conditions seen at sampling
  // time sit inside the training distribution
  for (Camera cam : rig_from_config(cfg)) {
    cam.in = hi;
    data.push_back(make_sample(cfg, variants[0], cam, codec));
  }

  DenoiserConfig dc;
  dc.latent_hw = cfg.image_size;
  Rng init = Rng::substream(root, "denoiser-init");
  Denoiser den(dc, init);

  DenoiserTrainConfig tc;
  tc.steps = cfg.denoiser_steps;
  tc.batch = cfg.denoiser_batch;
  tc.lr = cfg.denoiser_lr;
  tc.lr_final = 0.1 * cfg.denoiser_lr;
  tc.seed = Rng::substream_seed(root, "denoiser-train");
  std::printf("[denoiser] training: %zu samples, %d steps\n", data.size(), tc.steps);
  auto log = train_denoiser(den, data, schedule_from_config(cfg), tc);
  if (!log.empty()) std::printf("[denoiser] loss %.4f -> %.4f\n", log.front(), log.back());
  return den;
}

namespace {

Denoiser obtain_denoiser(const Workspace& ws) {
  if (fs::exists(ws.denoiser_ckpt())) {
    std::printf("[generate-views] reusing %s\n", ws.denoiser_ckpt().string().c_str());
    return load_denoiser_checkpoint(ws.denoiser_ckpt());
  }
  Denoiser den = train_pipeline_denoiser(ws.cfg);
  save_denoiser_checkpoint(ws.denoiser_ckpt(), den, ws.cfg);
  return den;
}

struct RigConditions {
  std::vector<Camera> cams;
  std::vector<LatentGrid> depth;
  int reference = 0;
};

RigConditions load_rig_conditions(const Workspace& ws) {
  const PipelineConfig& cfg = ws.cfg;
  RigConditions rc;
  rc.cams = read_cameras_json(ws.require(ws.rig_cameras_json(), "render-depth"));
  for (size_t i = 0; i < rc.cams.size(); ++i) {
    ImageGray d = read_png_gray16(ws.require(ws.rig_depth_png(static_cast<int>(i)),
                                             "render-depth"));
    rc.depth.push_back(depth_condition(d, cfg.near, cfg.far));
  }
  rc.reference = rig_reference_index(static_cast<int>(rc.cams.size()));
  return rc;
}

LatentGrid reference_keypoint_map(const Workspace& ws, const Camera& ref_cam) {
  const Landmarks lm =
      read_landmarks_world(ws.require(ws.landmarks_json(), "synth-data"));
  std::vector<Eigen::Vector2d> pts;
  std::vector<bool> vis;
  for (const auto& kp : project_landmarks(lm, ref_cam)) {
    pts.push_back(kp.px);
    vis.push_back(kp.visible);
  }
  return rasterize_keypoints(pts, vis, ws.cfg.image_size, ws.cfg.image_size);
}

}  // namespace

void run_generate_views(const Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineConfig& cfg = ws.cfg;
  const std::uint64_t root = static_cast<std::uint64_t>(cfg.seed);

  Denoiser den = obtain_denoiser(ws);
  RigConditions rig = load_rig_conditions(ws);

  std::error_code ec;
  fs::create_directories(ws.gen_dir(), ec);
  if (ec || !fs::is_directory(ws.gen_dir()))
    throw IoError("cannot create '" + ws.gen_dir().string() + "'");

  GeneratorSettings gs;
  gs.sched = schedule_from_config(cfg);
  gs.filter_b = cfg.filter_b;
  const Eigen::VectorXd text = text_embedding(cfg.prompt);

  const ImageRgb reference =
      generate_reference(den, gs, reference_keypoint_map(ws, rig.cams[rig.reference]), text,
                         Rng::substream_seed(root, "reference"));
  write_png_rgb(ws.reference_png(), reference);

  auto xt_rng = Rng::substream(root, "xT-shared");
  const LatentGrid x_t =
      gaussian_latent(cfg.image_size, cfg.image_size, DenoiserConfig{}.latent_channels, xt_rng);
  const std::uint64_t ref_noise_seed = Rng::substream_seed(root, "reference-noise");

  std::vector<fs::path> inputs = {ws.denoiser_ckpt(), ws.rig_cameras_json(),
                                  ws.landmarks_json()};
  std::vector<fs::path> outputs = {ws.reference_png()};
  nlohmann::json bundles = nlohmann::json::array();

  for (size_t n = 0; n < rig.cams.size(); ++n) {
    const ImageRgb view = generate_view(den, gs, rig.depth[n], rig.depth[rig.reference], text,
                                        x_t, reference, ref_noise_seed);
    const int i = static_cast<int>(n);
    write_png_rgb(ws.gen_png(i), view);
    inputs.push_back(ws.rig_depth_png(i));
    outputs.push_back(ws.gen_png(i));

    nlohmann::json b;
    b["index"] = i;
    b["image"] = ws.gen_png(i).filename().string();
    b["depth"] = ws.rig_depth_png(i).filename().string();
    b["mask"] = ws.rig_mask_png(i).filename().string();
    b["camera"] = camera_to_json(rig.cams[n], i);
    b["provenance"] = {{"seed", cfg.seed},
                       {"filter_b", cfg.filter_b},
                       {"t_thres", cfg.t_thres},
                       {"ddim_steps", cfg.ddim_steps},
                       {"reference_index", rig.reference},
                       {"prompt", cfg.prompt}};
    bundles.push_back(b);
    std::printf("[generate-views] view %d/%zu done\n", i + 1, rig.cams.size());
  }

  {
    std::ofstream out(ws.bundles_json());
    if (!out) throw IoError("cannot write '" + ws.bundles_json().string() + "'");
    out << bundles.dump(2) << "\n";
  }
  outputs.push_back(ws.bundles_json());

  write_stage_manifest(ws, "generate-views", inputs, outputs, seconds_since(t0));
  std::printf("[generate-views] %zu viewpoint-aware images -> %s\n", rig.cams.size(),
              ws.gen_dir().string().c_str());
}

void run_filter_demo(const Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineConfig& cfg = ws.cfg;
  const std::uint64_t root = static_cast<std::uint64_t>(cfg.seed);

  Denoiser den = load_denoiser_checkpoint(ws.require(ws.denoiser_ckpt(), "generate-views"));
  RigConditions rig = load_rig_conditions(ws);
  const ImageRgb reference = read_png_rgb(ws.require(ws.reference_png(), "generate-views"));
  const Eigen::VectorXd text = text_embedding(cfg.prompt);
  const std::uint64_t ref_noise_seed = Rng::substream_seed(root, "reference-noise");

  auto xt_rng = Rng::substream(root, "filter-demo-xT");
  const LatentGrid x_t =
      gaussian_latent(cfg.image_size, cfg.image_size, DenoiserConfig{}.latent_channels, xt_rng);

  GeneratorSettings raw;
  raw.sched = schedule_from_config(cfg);
  raw.filter_b = 0;
  GeneratorSettings filtered = raw;
  filtered.filter_b = cfg.filter_b;

  // both arms share x_T and all conditioning; the low-pass is the only delta.
  // 8-bit quantization is applied to both so the comparison matches what the
  // emitted PNGs hold.
  auto quantize = [](ImageRgb img) {
    for (Eigen::Index i = 0; i < img.data.size(); ++i)
      img.data[i] = std::round(std::clamp(img.data[i], 0.0, 1.0) * 255.0) / 255.0;
    return img;
  };

  const LatentCodec codec;
  std::vector<ImageRgb> arm_raw, arm_filtered;
  for (size_t n = 0; n < rig.cams.size(); ++n) {
    arm_raw.push_back(downsample_box(
        quantize(generate_view(den, raw, rig.depth[n], rig.depth[rig.reference], text, x_t,
                               reference, ref_noise_seed)),
        codec.upscale));
    arm_filtered.push_back(downsample_box(
        quantize(generate_view(den, filtered, rig.depth[n], rig.depth[rig.reference], text, x_t,
                               reference, ref_noise_seed)),
        codec.upscale));
    std::printf("[filter-demo] view %zu/%zu done\n", n + 1, rig.cams.size());
  }

  const size_t center = static_cast<size_t>(rig.reference);
  const double corr_raw = texture_sticking_correlation(arm_raw, center);
  const double corr_filtered = texture_sticking_correlation(arm_filtered, center);

  auto mean_image = [](const std::vector<ImageRgb>& images) {
    ImageRgb avg(images[0].h, images[0].w);
    for (const auto& img : images) avg.data += img.data;
    avg.data /= static_cast<double>(images.size());
    return avg;
  };
  const fs::path demo_dir = ws.out / "filter_demo";
  std::error_code ec;
  fs::create_directories(demo_dir, ec);
  write_png_rgb(demo_dir / "mean_unfiltered.png", mean_image(arm_raw));
  write_png_rgb(demo_dir / "mean_filtered.png", mean_image(arm_filtered));
  write_png_rgb(demo_dir / "center_unfiltered.png", arm_raw[center]);
  write_png_rgb(demo_dir / "center_filtered.png", arm_filtered[center]);

  nlohmann::json j;
  j["correlation_unfiltered"] = corr_raw;
  j["correlation_filtered"] = corr_filtered;
  j["reduction"] = corr_raw - corr_filtered;
  j["filter_b"] = cfg.filter_b;
  j["views"] = rig.cams.size();
  {
    std::ofstream out(ws.filter_demo_json());
    if (!out) throw IoError("cannot write '" + ws.filter_demo_json().string() + "'");
    out << j.dump(2) << "\n";
  }

  std::vector<fs::path> inputs = {ws.denoiser_ckpt(), ws.reference_png(),
                                  ws.rig_cameras_json()};
  for (size_t i = 0; i < rig.cams.size(); ++i)
    inputs.push_back(ws.rig_depth_png(static_cast<int>(i)));
  write_stage_manifest(ws, "filter-demo", inputs,
                       {ws.filter_demo_json(), demo_dir / "mean_unfiltered.png",
                        demo_dir / "mean_filtered.png", demo_dir / "center_unfiltered.png",
                        demo_dir / "center_filtered.png"},
                       seconds_since(t0));
  std::printf("[filter-demo] sticking correlation %.4f (raw) vs %.4f (filtered), drop %.4f\n",
              corr_raw, corr_filtered, corr_raw - corr_filtered);
}

}  // namespace canopy
