#include "canopy/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "canopy/hash.hpp"

namespace canopy {

namespace {

// Single source of truth for the schema: every consumer (file parse, --set,
// dump, docs) walks the same listing. fn(name, ref, doc) with ref one of
// int&, double&, std::string&.
template <class Fn>
void visit_config(PipelineConfig& c, Fn&& fn) {
  fn("out_dir", c.out_dir, "artifact directory every stage writes under");
  fn("data_dir", c.data_dir, "synthetic dataset directory (empty: <out_dir>/data)");
  fn("stages", c.stages, "comma list for `run`: all or subset in pipeline order");
  fn("seed", c.seed, "root seed; stages derive named substreams");
  fn("scene", c.scene, "synthetic scene kind (blob)");
  fn("image_size", c.image_size, "training/render resolution in pixels");
  fn("n_frames", c.n_frames, "synthetic capture frame count");
  fn("jitter_rot_deg", c.jitter_rot_deg, "pose noise on captured frames, degrees");
  fn("jitter_trans_frac", c.jitter_trans_frac, "pose noise, fraction of scene diameter");
  fn("orbit_radius", c.orbit_radius, "capture camera distance");
  fn("orbit_min_elev_deg", c.orbit_min_elev_deg, "capture elevation range, low");
  fn("orbit_max_elev_deg", c.orbit_max_elev_deg, "capture elevation range, high");
  fn("focal_scale", c.focal_scale, "focal length as a multiple of image size");
  fn("near", c.near, "ray integration near bound");
  fn("far", c.far, "ray integration far bound");
  fn("rig_views", c.rig_views, "viewpoint rig size for generation");
  fn("rig_span_deg", c.rig_span_deg, "rig azimuth span, centered on the face");
  fn("rig_elev_deg", c.rig_elev_deg, "rig elevation");
  fn("rig_radius", c.rig_radius, "rig camera distance");
  fn("field_levels", c.field_levels, "positional encoding frequency count");
  fn("field_width", c.field_width, "field MLP width");
  fn("field_depth", c.field_depth, "field MLP hidden layers");
  fn("source_steps", c.source_steps, "source fit optimization steps");
  fn("avatar_steps", c.avatar_steps, "avatar fit optimization steps");
  fn("rays_per_batch", c.rays_per_batch, "rays per optimization step");
  fn("samples_per_ray", c.samples_per_ray, "integration samples per ray");
  fn("lr", c.lr, "Adam learning rate at step 0");
  fn("lr_final", c.lr_final, "Adam learning rate at the last step (exp decay)");
  fn("lambda_sp", c.lambda_sp, "background sparsity weight (avatar fit)");
  fn("lambda_entropy", c.lambda_entropy, "foreground ray entropy weight (avatar fit)");
  fn("deform_reg", c.deform_reg, "mean squared deformation offset penalty");
  fn("code_dim", c.code_dim, "per-view deformation code size");
  fn("deform_width", c.deform_width, "deformation MLP width");
  fn("deform_depth", c.deform_depth, "deformation MLP hidden layers");
  fn("t_steps", c.t_steps, "diffusion timestep count");
  fn("beta_start", c.beta_start, "linear beta schedule start");
  fn("beta_end", c.beta_end, "linear beta schedule end");
  fn("ddim_steps", c.ddim_steps, "deterministic sampler step count");
  fn("t_thres", c.t_thres, "sampler steps (from noisiest) that use the reference");
  fn("filter_b", c.filter_b, "latent low-pass half-size; 0 disables filtering");
  fn("denoiser_steps", c.denoiser_steps, "denoiser training steps in generate-views");
  fn("denoiser_batch", c.denoiser_batch, "denoiser training batch size");
  fn("denoiser_lr", c.denoiser_lr, "denoiser Adam learning rate");
  fn("prompt", c.prompt, "text condition for generation");
  fn("pck_tau", c.pck_tau, "keypoint PCK threshold, fraction of image diagonal");
  fn("kp_dark_threshold", c.kp_dark_threshold, "luminance cutoff for keypoint detection");
}

std::string type_name(const int&) { return "int"; }
std::string type_name(const double&) { return "float"; }
std::string type_name(const std::string&) { return "string"; }

void assign_from_json(int& ref, const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer())
    throw ConfigError("config key '" + key + "' expects an integer, got " + v.dump());
  ref = v.get<int>();
}

void assign_from_json(double& ref, const nlohmann::json& v, const std::string& key) {
  if (!v.is_number())
    throw ConfigError("config key '" + key + "' expects a number, got " + v.dump());
  ref = v.get<double>();
}

void assign_from_json(std::string& ref, const nlohmann::json& v, const std::string& key) {
  if (!v.is_string())
    throw ConfigError("config key '" + key + "' expects a string, got " + v.dump());
  ref = v.get<std::string>();
}

void assign_from_text(int& ref, const std::string& text, const std::string& key) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, ref);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("config key '" + key + "' expects an integer, got '" + text + "'");
}

void assign_from_text(double& ref, const std::string& text, const std::string& key) {
  try {
    size_t used = 0;
    ref = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + text + "'");
  }
}

void assign_from_text(std::string& ref, const std::string& text, const std::string&) {
  ref = text;
}

void apply_json(PipelineConfig& cfg, const nlohmann::json& doc, const std::string& source) {
  if (!doc.is_object()) throw ConfigError(source + ": config root must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    visit_config(cfg, [&](const char* name, auto& ref, const char*) {
      if (key == name) {
        assign_from_json(ref, value, key);
        known = true;
      }
    });
    if (!known) throw ConfigError(source + ": unknown config key '" + key + "'");
  }
}

}  // namespace

PipelineConfig load_config(const std::optional<std::string>& file,
                           const std::vector<std::string>& overrides) {
  PipelineConfig cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file '" + *file + "'");
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file '" + *file + "': " + e.what());
    }
    apply_json(cfg, doc, *file);
  }
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    bool known = false;
    visit_config(cfg, [&](const char* name, auto& ref, const char*) {
      if (key == name) {
        assign_from_text(ref, value, key);
        known = true;
      }
    });
    if (!known) throw ConfigError("unknown config key '" + key + "'");
  }
  validate_config(cfg);
  return cfg;
}

void validate_config(const PipelineConfig& cfg) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(!cfg.out_dir.empty(), "out_dir must not be empty");
  require(cfg.scene == "blob", "scene must be 'blob'");
  require(cfg.image_size >= 8 && cfg.image_size % 4 == 0,
          "image_size must be >= 8 and a multiple of 4");
  require(cfg.n_frames >= 1, "n_frames must be >= 1");
  require(cfg.seed >= 0, "seed must be >= 0");
  require(cfg.near > 0 && cfg.far > cfg.near, "need 0 < near < far");
  require(cfg.rig_views >= 1, "rig_views must be >= 1");
  require(cfg.field_levels >= 1 && cfg.field_width >= 1 && cfg.field_depth >= 1,
          "field dimensions must be positive");
  require(cfg.source_steps >= 1 && cfg.avatar_steps >= 1, "step counts must be >= 1");
  require(cfg.rays_per_batch >= 1 && cfg.samples_per_ray >= 2,
          "need rays_per_batch >= 1 and samples_per_ray >= 2");
  require(cfg.lr > 0 && cfg.lr_final > 0, "learning rates must be positive");
  require(cfg.lambda_sp >= 0 && cfg.lambda_entropy >= 0 && cfg.deform_reg >= 0,
          "loss weights must be >= 0");
  require(cfg.code_dim >= 1 && cfg.deform_width >= 1 && cfg.deform_depth >= 1,
          "deformation dimensions must be positive");
  require(cfg.t_steps >= 2, "t_steps must be >= 2");
  require(cfg.beta_start > 0 && cfg.beta_end > cfg.beta_start && cfg.beta_end < 1,
          "need 0 < beta_start < beta_end < 1");
  require(cfg.ddim_steps >= 1 && cfg.ddim_steps <= cfg.t_steps,
          "need 1 <= ddim_steps <= t_steps");
  require(cfg.t_thres >= 0 && cfg.t_thres < cfg.ddim_steps,
          "need 0 <= t_thres < ddim_steps");
  require(cfg.filter_b >= 0, "filter_b must be >= 0");
  require(cfg.denoiser_steps >= 1 && cfg.denoiser_batch >= 1 && cfg.denoiser_lr > 0,
          "denoiser training settings must be positive");
  require(cfg.pck_tau > 0, "pck_tau must be positive");
}

nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json out = nlohmann::json::object();
  visit_config(const_cast<PipelineConfig&>(cfg),
               [&](const char* name, auto& ref, const char*) { out[name] = ref; });
  return out;
}

std::string config_hash_hex(const PipelineConfig& cfg) {
  // Identity of the *scientific* configuration: where the artifacts land and
  // which stages a `run` covers don't change what gets computed, so results
  // stay comparable across output directories.
  nlohmann::json j = config_to_json(cfg);
  j.erase("out_dir");
  j.erase("data_dir");
  j.erase("stages");
  return fnv1a_hex(j.dump());
}

std::string config_schema_text() {
  PipelineConfig defaults;
  std::ostringstream out;
  visit_config(defaults, [&](const char* name, auto& ref, const char* doc) {
    nlohmann::json v = ref;
    out << name << " (" << type_name(ref) << ", default " << v.dump() << ") — " << doc << "\n";
  });
  return out.str();
}

}  // namespace canopy
