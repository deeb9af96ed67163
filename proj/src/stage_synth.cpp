#include <chrono>
#include <cstdio>
#include <fstream>

#include "canopy/image_io.hpp"
#include "canopy/pipeline.hpp"

namespace fs = std::filesystem;

namespace canopy {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void run_synth_data(const Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineConfig& cfg = ws.cfg;
  std::error_code ec;
  fs::create_directories(ws.data, ec);
  if (ec || !fs::is_directory(ws.data))
    throw IoError("cannot create dataset directory '" + ws.data.string() + "'");

  BlobFaceScene scene;
  const Intrinsics in = intrinsics_from_config(cfg, cfg.image_size);
  const std::uint64_t root = static_cast<std::uint64_t>(cfg.seed);
  auto cams = orbit_cameras(in, scene.head_center, cfg.orbit_radius, cfg.n_frames,
                            cfg.orbit_min_elev_deg, cfg.orbit_max_elev_deg,
                            Rng::substream_seed(root, "capture-poses"));
  auto jitter_rng = Rng::substream(root, "capture-jitter");

  const Landmarks lm = blob_landmarks(scene);
  nlohmann::json frames = nlohmann::json::array();
  std::vector<fs::path> outputs;

  for (int i = 0; i < cfg.n_frames; ++i) {
    // frames are rendered from the (possibly jittered) true pose, while the
    // recorded camera is the clean one — that gap is exactly what the
    // deformation model is there to absorb
    const Camera actual = jitter_camera(cams[static_cast<size_t>(i)], cfg.jitter_rot_deg,
                                        cfg.jitter_trans_frac * scene.diameter(), jitter_rng);
    const FrameTruth truth = render_blob_scene(scene, actual);
    write_png_rgb(ws.frame_png(i), truth.color);
    write_png_gray16(ws.depth_png(i), truth.depth);
    write_png_gray16(ws.mask_png(i), truth.mask);
    outputs.push_back(ws.frame_png(i));
    outputs.push_back(ws.depth_png(i));
    outputs.push_back(ws.mask_png(i));

    nlohmann::json fr;
    fr["frame"] = i;
    nlohmann::json px = nlohmann::json::array();
    nlohmann::json vis = nlohmann::json::array();
    for (const auto& kp : project_landmarks(lm, actual)) {
      px.push_back({kp.px.x(), kp.px.y()});
      vis.push_back(kp.visible);
    }
    fr["px"] = px;
    fr["visible"] = vis;
    frames.push_back(fr);
  }

  write_cameras_json(ws.cameras_json(), cams);
  outputs.push_back(ws.cameras_json());

  nlohmann::json lmj;
  lmj["names"] = {"left_eye", "right_eye", "mouth", "head_center"};
  nlohmann::json world = nlohmann::json::array();
  for (int i = 0; i < Landmarks::count; ++i)
    world.push_back({lm[i].x(), lm[i].y(), lm[i].z()});
  lmj["world"] = world;
  lmj["frames"] = frames;
  {
    std::ofstream out(ws.landmarks_json());
    if (!out) throw IoError("cannot write '" + ws.landmarks_json().string() + "'");
    out << lmj.dump(2) << "\n";
  }
  outputs.push_back(ws.landmarks_json());

  write_stage_manifest(ws, "synth-data", {}, outputs, seconds_since(t0));
  std::printf("[synth-data] %d frames at %dx%d -> %s\n", cfg.n_frames, cfg.image_size,
              cfg.image_size, ws.data.string().c_str());
}

}  // namespace canopy
