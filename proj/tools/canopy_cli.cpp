#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "canopy/pipeline.hpp"

namespace {

// Exit codes: 0 success, 2 bad config, 3 missing upstream artifact,
// 4 numeric failure. Everything else (IO, malformed data) lands on 1.
constexpr int kOk = 0;
constexpr int kOther = 1;
constexpr int kConfig = 2;
constexpr int kMissing = 3;
constexpr int kNumeric = 4;

std::vector<std::string> split_csv(const std::string& list) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : list) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"canopy: depth-conditioned avatar reconstruction pipeline"};
  app.require_subcommand(1);

  std::optional<std::string> config_file;
  std::vector<std::string> overrides;
  std::optional<std::string> out_dir;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON config file (flat keys)");
    cmd->add_option("--set", overrides, "override a config key, key=value");
    cmd->add_option("--out", out_dir, "output directory (same as --set out_dir=...)");
  };

  std::vector<std::pair<std::string, std::string>> stages = {
      {"synth-data", "render the synthetic capture: frames, depth, masks, landmarks"},
      {"train-source", "fit the source radiance field to the capture"},
      {"render-depth", "render viewpoint depth maps and masks from the source field"},
      {"generate-views", "sample viewpoint-aware images (trains the denoiser on first run)"},
      {"train-avatar", "fit the deformable avatar to the generated views"},
      {"render", "render canonical avatar views"},
      {"metrics", "score renders and write the metrics report"},
      {"filter-demo", "A/B the latent low-pass and measure texture sticking"},
  };
  for (auto& [name, help] : stages) add_common(app.add_subcommand(name, help));
  add_common(app.add_subcommand("run", "run the configured stages in pipeline order"));
  app.add_subcommand("keys", "print the config schema and exit");

  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  if (name == "keys") {
    std::fputs(canopy::config_schema_text().c_str(), stdout);
    return kOk;
  }

  try {
    if (out_dir) overrides.push_back("out_dir=" + *out_dir);
    canopy::Workspace ws(canopy::load_config(config_file, overrides));

    if (name == "run") {
      canopy::run_stages(ws, split_csv(ws.cfg.stages));
    } else {
      canopy::run_stages(ws, {name});
    }
    return kOk;
  } catch (const canopy::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const canopy::MissingArtifactError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kMissing;
  } catch (const canopy::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumeric;
  } catch (const canopy::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kOther;
  }
}
