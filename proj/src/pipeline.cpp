#include "canopy/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "canopy/checkpoint.hpp"
#include "canopy/hash.hpp"
#include "canopy/image_io.hpp"

namespace fs = std::filesystem;

namespace canopy {

namespace {

std::string indexed(const char* stem, int i, const char* ext = ".png") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d%s", stem, i, ext);
  return std::string(buf);
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return j;
}

std::string manifest_key(const Workspace& ws, const fs::path& p) {
  std::error_code ec;
  fs::path rel = fs::relative(p, ws.out, ec);
  if (ec || rel.empty() || rel.native().starts_with(".."))
    return p.generic_string();
  return rel.generic_string();
}

}  // namespace

Workspace::Workspace(PipelineConfig c) : cfg(std::move(c)) {
  out = fs::path(cfg.out_dir);
  data = cfg.data_dir.empty() ? out / "data" : fs::path(cfg.data_dir);
}

fs::path Workspace::frame_png(int i) const { return data / indexed("frame", i); }
fs::path Workspace::depth_png(int i) const { return data / indexed("depth", i); }
fs::path Workspace::mask_png(int i) const { return data / indexed("mask", i); }
fs::path Workspace::rig_depth_png(int i) const { return rig_dir() / indexed("depth", i); }
fs::path Workspace::rig_mask_png(int i) const { return rig_dir() / indexed("mask", i); }
fs::path Workspace::gen_png(int i) const { return gen_dir() / indexed("view", i); }
fs::path Workspace::render_png(int i) const { return render_dir() / indexed("render", i); }
fs::path Workspace::render_depth_png(int i) const { return render_dir() / indexed("depth", i); }

fs::path Workspace::manifest_path(const std::string& stage) const {
  return out / (stage + ".manifest.json");
}

fs::path Workspace::require(const fs::path& p, const std::string& producing_stage) const {
  if (!fs::exists(p)) throw MissingArtifactError(p.string(), producing_stage);
  return p;
}

void write_stage_manifest(const Workspace& ws, const std::string& stage,
                          const std::vector<fs::path>& inputs,
                          const std::vector<fs::path>& outputs, double wall_seconds) {
  nlohmann::json j;
  j["stage"] = stage;
  j["config_hash"] = config_hash_hex(ws.cfg);
  nlohmann::json in = nlohmann::json::object();
  for (const auto& p : inputs) in[manifest_key(ws, p)] = fnv1a_file_hex(p);
  j["inputs"] = in;
  nlohmann::json outs = nlohmann::json::object();
  for (const auto& p : outputs) outs[manifest_key(ws, p)] = fnv1a_file_hex(p);
  j["outputs"] = outs;
  j["wall_seconds"] = wall_seconds;
  write_json_file(ws.manifest_path(stage), j);
}

bool stage_up_to_date(const Workspace& ws, const std::string& stage) {
  const fs::path mp = ws.manifest_path(stage);
  if (!fs::exists(mp)) return false;
  nlohmann::json j;
  try {
    j = read_json_file(mp);
  } catch (const Error&) {
    return false;
  }
  if (j.value("config_hash", "") != config_hash_hex(ws.cfg)) return false;
  auto files_match = [&](const char* section) {
    if (!j.contains(section) || !j[section].is_object()) return false;
    for (const auto& [key, hash] : j[section].items()) {
      fs::path p = fs::path(key).is_absolute() ? fs::path(key) : ws.out / key;
      if (!fs::exists(p)) return false;
      try {
        if (fnv1a_file_hex(p) != hash.get<std::string>()) return false;
      } catch (const Error&) {
        return false;
      }
    }
    return true;
  };
  return files_match("inputs") && files_match("outputs");
}

// ---- camera JSON ----

nlohmann::json camera_to_json(const Camera& cam, int frame) {
  nlohmann::json j;
  j["frame"] = frame;
  j["fx"] = cam.in.fx;
  j["fy"] = cam.in.fy;
  j["cx"] = cam.in.cx;
  j["cy"] = cam.in.cy;
  j["width"] = cam.in.width;
  j["height"] = cam.in.height;
  j["near"] = cam.in.near;
  j["far"] = cam.in.far;
  std::vector<double> m(16);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m[static_cast<size_t>(r * 4 + c)] = cam.cam_to_world(r, c);
  j["cam_to_world"] = m;
  return j;
}

Camera camera_from_json(const nlohmann::json& j) {
  Camera cam;
  try {
    cam.in.fx = j.at("fx").get<double>();
    cam.in.fy = j.at("fy").get<double>();
    cam.in.cx = j.at("cx").get<double>();
    cam.in.cy = j.at("cy").get<double>();
    cam.in.width = j.at("width").get<int>();
    cam.in.height = j.at("height").get<int>();
    cam.in.near = j.at("near").get<double>();
    cam.in.far = j.at("far").get<double>();
    const auto m = j.at("cam_to_world").get<std::vector<double>>();
    if (m.size() != 16) throw DataError("camera: cam_to_world needs 16 entries");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) cam.cam_to_world(r, c) = m[static_cast<size_t>(r * 4 + c)];
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("camera JSON: ") + e.what());
  }
  return cam;
}

void write_cameras_json(const fs::path& path, const std::vector<Camera>& cams) {
  nlohmann::json j = nlohmann::json::array();
  for (size_t i = 0; i < cams.size(); ++i)
    j.push_back(camera_to_json(cams[i], static_cast<int>(i)));
  write_json_file(path, j);
}

std::vector<Camera> read_cameras_json(const fs::path& path) {
  nlohmann::json j = read_json_file(path);
  if (!j.is_array()) throw DataError(path.string() + ": expected a camera array");
  std::vector<Camera> cams;
  cams.reserve(j.size());
  for (const auto& item : j) cams.push_back(camera_from_json(item));
  return cams;
}

// ---- dataset ----

LoadedDataset load_dataset(const Workspace& ws) {
  LoadedDataset ds;
  const auto cams = read_cameras_json(ws.require(ws.cameras_json(), "synth-data"));
  for (size_t i = 0; i < cams.size(); ++i) {
    const int fi = static_cast<int>(i);
    ViewData v;
    v.cam = cams[i];
    v.truth.color = read_png_rgb(ws.require(ws.frame_png(fi), "synth-data"));
    auto depth = read_png_gray16(ws.require(ws.depth_png(fi), "synth-data"));
    auto mask = read_png_gray16(ws.require(ws.mask_png(fi), "synth-data"));
    v.truth.depth = std::move(depth);
    v.truth.mask = std::move(mask);
    ds.views.push_back(std::move(v));
  }

  nlohmann::json lm = read_json_file(ws.require(ws.landmarks_json(), "synth-data"));
  ds.landmarks = read_landmarks_world(ws.landmarks_json());
  try {
    constexpr size_t n_kp = static_cast<size_t>(Landmarks::count);
    for (const auto& fr : lm.at("frames")) {
      std::vector<ProjectedKeypoint> kps;
      const auto px = fr.at("px").get<std::vector<std::vector<double>>>();
      const auto vis = fr.at("visible").get<std::vector<bool>>();
      if (px.size() != n_kp || vis.size() != n_kp)
        throw DataError("landmarks: frame entry has wrong arity");
      for (size_t i = 0; i < px.size(); ++i)
        kps.push_back({Eigen::Vector2d(px[i][0], px[i][1]), vis[i]});
      ds.proj_kp.push_back(std::move(kps));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("landmarks JSON: ") + e.what());
  }
  if (ds.proj_kp.size() != ds.views.size())
    throw DataError("landmarks JSON: frame count does not match cameras");
  return ds;
}

Landmarks read_landmarks_world(const fs::path& path) {
  nlohmann::json lm = read_json_file(path);
  try {
    const auto world = lm.at("world").get<std::vector<std::vector<double>>>();
    if (world.size() != static_cast<size_t>(Landmarks::count))
      throw DataError("landmarks: wrong point count");
    Landmarks l;
    Eigen::Vector3d* slots[Landmarks::count] = {&l.left_eye, &l.right_eye, &l.mouth,
                                                &l.head_center};
    for (size_t i = 0; i < world.size(); ++i) {
      if (world[i].size() != 3) throw DataError("landmarks: points must be 3D");
      *slots[i] = Eigen::Vector3d(world[i][0], world[i][1], world[i][2]);
    }
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad landmarks JSON: " + e.what());
  }
}

// ---- checkpoints ----

void save_field_checkpoint(const fs::path& path, const RadianceField& field,
                           const DeformationField* deform, const PipelineConfig& cfg) {
  Checkpoint ck;
  ck.meta["kind"] = deform ? "deformable_field" : "radiance_field";
  ck.meta["config_hash"] = config_hash_hex(cfg);
  const FieldConfig& fc = field.config();
  ck.meta["field"] = {{"pos_enc_levels", fc.pos_enc_levels},
                      {"width", fc.width},
                      {"depth", fc.depth},
                      {"sigma_scale", fc.sigma_scale}};
  ck.meta["near"] = cfg.near;
  ck.meta["far"] = cfg.far;
  put_params(ck, "field", field.params());
  if (deform) {
    const DeformConfig& dc = deform->config();
    ck.meta["deform"] = {{"n_views", dc.n_views},
                         {"code_dim", dc.code_dim},
                         {"pos_enc_levels", dc.pos_enc_levels},
                         {"width", dc.width},
                         {"depth", dc.depth}};
    put_params(ck, "deform", deform->params());
  }
  save_checkpoint(path, ck);
}

LoadedField load_field_checkpoint(const fs::path& path) {
  Checkpoint ck = load_checkpoint(path);
  const std::string kind = ck.meta.value("kind", "");
  if (kind != "radiance_field" && kind != "deformable_field")
    throw DataError(path.string() + ": not a field checkpoint (kind '" + kind + "')");
  LoadedField out;
  try {
    FieldConfig fc;
    fc.pos_enc_levels = ck.meta.at("field").at("pos_enc_levels").get<int>();
    fc.width = ck.meta.at("field").at("width").get<int>();
    fc.depth = ck.meta.at("field").at("depth").get<int>();
    fc.sigma_scale = ck.meta.at("field").at("sigma_scale").get<double>();
    Rng rng(0);  // shapes only; values are overwritten
    out.field = RadianceField(fc, rng);
    load_params(ck, "field", out.field.params());
    if (kind == "deformable_field") {
      DeformConfig dc;
      dc.n_views = ck.meta.at("deform").at("n_views").get<int>();
      dc.code_dim = ck.meta.at("deform").at("code_dim").get<int>();
      dc.pos_enc_levels = ck.meta.at("deform").at("pos_enc_levels").get<int>();
      dc.width = ck.meta.at("deform").at("width").get<int>();
      dc.depth = ck.meta.at("deform").at("depth").get<int>();
      out.deform = DeformationField(dc, rng);
      load_params(ck, "deform", out.deform.params());
      out.deformable = true;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad field checkpoint meta: " + e.what());
  }
  return out;
}

void save_denoiser_checkpoint(const fs::path& path, const Denoiser& den,
                              const PipelineConfig& cfg) {
  Checkpoint ck;
  ck.meta["kind"] = "denoiser";
  ck.meta["config_hash"] = config_hash_hex(cfg);
  const DenoiserConfig& dc = den.config();
  ck.meta["denoiser"] = {{"latent_hw", dc.latent_hw},
                         {"latent_channels", dc.latent_channels},
                         {"depth_channels", dc.depth_channels},
                         {"keypoint_channels", dc.keypoint_channels},
                         {"time_channels", dc.time_channels},
                         {"text_channels", dc.text_channels},
                         {"text_dim", dc.text_dim},
                         {"c0", dc.c0},
                         {"c1", dc.c1},
                         {"c2", dc.c2}};
  put_params(ck, "den", den.params());
  save_checkpoint(path, ck);
}

Denoiser load_denoiser_checkpoint(const fs::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.meta.value("kind", "") != "denoiser")
    throw DataError(path.string() + ": not a denoiser checkpoint");
  try {
    DenoiserConfig dc;
    const auto& m = ck.meta.at("denoiser");
    dc.latent_hw = m.at("latent_hw").get<Eigen::Index>();
    dc.latent_channels = m.at("latent_channels").get<int>();
    dc.depth_channels = m.at("depth_channels").get<int>();
    dc.keypoint_channels = m.at("keypoint_channels").get<int>();
    dc.time_channels = m.at("time_channels").get<int>();
    dc.text_channels = m.at("text_channels").get<int>();
    dc.text_dim = m.at("text_dim").get<int>();
    dc.c0 = m.at("c0").get<int>();
    dc.c1 = m.at("c1").get<int>();
    dc.c2 = m.at("c2").get<int>();
    Rng rng(0);
    Denoiser den(dc, rng);
    load_params(ck, "den", den.params());
    return den;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad denoiser checkpoint meta: " + e.what());
  }
}

// ---- config-derived objects ----

DiffusionSchedule schedule_from_config(const PipelineConfig& cfg) {
  return DiffusionSchedule::linear(cfg.t_steps, cfg.beta_start, cfg.beta_end, cfg.ddim_steps,
                                   cfg.t_thres);
}

Intrinsics intrinsics_from_config(const PipelineConfig& cfg, int size) {
  Intrinsics in;
  in.fx = in.fy = cfg.focal_scale * static_cast<double>(size);
  in.cx = in.cy = 0.5 * static_cast<double>(size);
  in.width = in.height = size;
  in.near = cfg.near;
  in.far = cfg.far;
  return in;
}

std::vector<Camera> rig_from_config(const PipelineConfig& cfg) {
  RigSpec spec;
  spec.n_views = cfg.rig_views;
  spec.azimuth_span_deg = cfg.rig_span_deg;
  spec.elevation_start_deg = spec.elevation_end_deg = cfg.rig_elev_deg;
  spec.radius = cfg.rig_radius;
  return build_rig(spec, intrinsics_from_config(cfg, cfg.image_size));
}

void write_training_log(const fs::path& path, const std::vector<TrainLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "step,total,rgb,sparsity,entropy,batch_psnr\n";
  char line[160];
  for (const auto& row : log) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%.6f\n", row.step, row.total,
                  row.rgb, row.sparsity, row.entropy, row.batch_psnr);
    out << line;
  }
}

ImageRgb downsample_box(const ImageRgb& img, int factor) {
  if (factor < 1 || img.h % factor != 0 || img.w % factor != 0)
    throw ShapeError("downsample_box: factor must divide both image dimensions");
  const Eigen::Index h = img.h / factor, w = img.w / factor;
  ImageRgb out(h, w);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0;
        for (int dr = 0; dr < factor; ++dr)
          for (int dc = 0; dc < factor; ++dc)
            acc += img.at(r * factor + dr, c * factor + dc, ch);
        out.at(r, c, ch) = acc * inv;
      }
  return out;
}

// ---- stage driver ----

std::vector<std::string> all_stage_names() {
  return {"synth-data",  "train-source", "render-depth", "generate-views",
          "train-avatar", "render",       "metrics",      "filter-demo"};
}

void run_stages(const Workspace& ws, const std::vector<std::string>& names) {
  std::vector<std::string> order = all_stage_names();
  std::vector<std::string> wanted;
  if (names.size() == 1 && names[0] == "all") {
    wanted = order;
  } else {
    for (const auto& n : names) {
      if (std::find(order.begin(), order.end(), n) == order.end())
        throw ConfigError("unknown stage '" + n + "'");
    }
    for (const auto& n : order)
      if (std::find(names.begin(), names.end(), n) != names.end()) wanted.push_back(n);
  }
  for (const auto& name : wanted) {
    if (stage_up_to_date(ws, name)) {
      std::printf("[%s] up to date, skipping\n", name.c_str());
      continue;
    }
    if (name == "synth-data") run_synth_data(ws);
    else if (name == "train-source") run_train_source(ws);
    else if (name == "render-depth") run_render_depth(ws);
    else if (name == "generate-views") run_generate_views(ws);
    else if (name == "train-avatar") run_train_avatar(ws);
    else if (name == "render") run_render(ws);
    else if (name == "metrics") run_metrics(ws);
    else if (name == "filter-demo") run_filter_demo(ws);
  }
}

}  // namespace canopy
