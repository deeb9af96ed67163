#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "canopy/image_io.hpp"
#include "canopy/metrics.hpp"
#include "canopy/pipeline.hpp"

namespace fs = std::filesystem;

namespace canopy {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Identity comparisons hit MSE = 0; cap the report at 99 dB instead of
// emitting infinity.
constexpr double kPsnrCap = 99.0;

double masked_psnr(const ImageRgb& a, const ImageRgb& b, const ImageGray& mask) {
  if (a.h != b.h || a.w != b.w || a.h != mask.h || a.w != mask.w)
    throw ShapeError("masked_psnr: image sizes differ");
  double se = 0;
  Eigen::Index n = 0;
  for (Eigen::Index r = 0; r < a.h; ++r)
    for (Eigen::Index c = 0; c < a.w; ++c) {
      if (mask.at(r, c) == 0.0) continue;
      for (int ch = 0; ch < 3; ++ch) {
        const double d = a.at(r, c, ch) - b.at(r, c, ch);
        se += d * d;
      }
      ++n;
    }
  if (n == 0) throw DataError("masked_psnr: empty mask");
  const double mse = se / static_cast<double>(3 * n);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

}  // namespace

void run_metrics(const Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineConfig& cfg = ws.cfg;

  const std::vector<Camera> rig =
      read_cameras_json(ws.require(ws.rig_cameras_json(), "render-depth"));
  const Landmarks lm = read_landmarks_world(ws.require(ws.landmarks_json(), "synth-data"));
  LoadedField lf = load_field_checkpoint(ws.require(ws.avatar_ckpt(), "train-avatar"));

  std::vector<fs::path> inputs = {ws.rig_cameras_json(), ws.landmarks_json(),
                                  ws.avatar_ckpt()};

  nlohmann::json views = nlohmann::json::array();
  double psnr_sum = 0, mae_sum = 0;
  Eigen::Index scored_views = 0;
  Keypoints2d pred_pool, ref_pool;
  Eigen::Index detected_views = 0;

  std::vector<ViewData> stat_views;

  for (size_t i = 0; i < rig.size(); ++i) {
    const int n = static_cast<int>(i);
    const ImageRgb render = read_png_rgb(ws.require(ws.render_png(n), "render"));
    const ImageGray render_depth =
        read_png_gray16(ws.require(ws.render_depth_png(n), "render"));
    ImageRgb generated = read_png_rgb(ws.require(ws.gen_png(n), "generate-views"));
    const ImageGray rig_depth =
        read_png_gray16(ws.require(ws.rig_depth_png(n), "render-depth"));
    const ImageGray mask = read_png_gray16(ws.require(ws.rig_mask_png(n), "render-depth"));
    inputs.insert(inputs.end(), {ws.render_png(n), ws.render_depth_png(n), ws.gen_png(n),
                                 ws.rig_depth_png(n), ws.rig_mask_png(n)});

    if (generated.h != render.h)
      generated = downsample_box(generated, static_cast<int>(generated.h / render.h));

    nlohmann::json v;
    v["view"] = n;
    const double view_psnr = masked_psnr(render, generated, mask);
    const double view_mae = masked_mae(render_depth, rig_depth, mask);
    v["psnr"] = view_psnr;
    v["depth_mae"] = view_mae;
    psnr_sum += view_psnr;
    mae_sum += view_mae;
    ++scored_views;

    // reference keypoints: scene landmarks through this camera; predictions:
    // dark-feature detection on the canonical render
    Keypoints2d ref, pred;
    bool detected = false;
    try {
      const Keypoints2d found =
          detect_blob_keypoints(render, mask, cfg.kp_dark_threshold);
      const auto projected = project_landmarks(lm, rig[i]);
      for (size_t k = 0; k < projected.size(); ++k) {
        if (!projected[k].visible) continue;
        ref.push_back(projected[k].px);
        pred.push_back(found[k]);
      }
      detected = !ref.empty();
    } catch (const DataError&) {
      detected = false;
    }

    if (detected) {
      const KeypointMetrics km =
          keypoint_metrics(pred, ref, cfg.pck_tau, render.w, render.h);
      v["kp_rmse"] = km.rmse;
      v["kp_pck"] = km.pck;
      v["kp_detected"] = true;
      pred_pool.insert(pred_pool.end(), pred.begin(), pred.end());
      ref_pool.insert(ref_pool.end(), ref.begin(), ref.end());
      ++detected_views;
    } else {
      v["kp_rmse"] = nullptr;
      v["kp_pck"] = nullptr;
      v["kp_detected"] = false;
    }
    views.push_back(v);

    ViewData sv;
    sv.cam = rig[i];
    sv.truth.color = generated;
    sv.truth.depth = rig_depth;
    sv.truth.mask = mask;
    stat_views.push_back(std::move(sv));
  }

  const FieldStats stats = evaluate_field_stats(
      lf.field, stat_views, static_cast<Eigen::Index>(4 * cfg.samples_per_ray),
      Eigen::Vector3d(1, 1, 1));

  nlohmann::json agg;
  agg["psnr_mean"] = scored_views ? psnr_sum / static_cast<double>(scored_views) : 0.0;
  agg["depth_mae_mean"] = scored_views ? mae_sum / static_cast<double>(scored_views) : 0.0;
  if (!pred_pool.empty()) {
    const KeypointMetrics km = keypoint_metrics(pred_pool, ref_pool, cfg.pck_tau,
                                                cfg.image_size, cfg.image_size);
    agg["kp_rmse"] = km.rmse;
    agg["kp_pck"] = km.pck;
  } else {
    agg["kp_rmse"] = nullptr;
    agg["kp_pck"] = nullptr;
  }
  agg["kp_detected_views"] = detected_views;
  agg["fg_entropy_mean"] = stats.fg_entropy_mean;
  agg["bg_acc_mean"] = stats.bg_acc_mean;

  nlohmann::json report;
  report["config_hash"] = config_hash_hex(cfg);
  report["image_size"] = cfg.image_size;
  report["pck_tau"] = cfg.pck_tau;
  report["views"] = views;
  report["aggregate"] = agg;
  report["cfs"] = nullptr;
  report["notes"] = {"CFS is omitted: it needs a pretrained face-recognition embedding, "
                     "which is outside the scope of this reproduction."};

  {
    std::ofstream out(ws.metrics_json());
    if (!out) throw IoError("cannot write '" + ws.metrics_json().string() + "'");
    out << report.dump(2) << "\n";
  }

  write_stage_manifest(ws, "metrics", inputs, {ws.metrics_json()}, seconds_since(t0));
  std::printf("[metrics] psnr %.2f dB, depth mae %.4f, keypoints on %lld/%zu views -> %s\n",
              agg["psnr_mean"].get<double>(), agg["depth_mae_mean"].get<double>(),
              static_cast<long long>(detected_views), rig.size(),
              ws.metrics_json().string().c_str());
}

}  // namespace canopy
