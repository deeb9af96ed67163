// Trains the small conditional denoiser that the texture-sticking acceptance
// criterion samples from, and writes the checkpoint where ctest's fixture
// wiring expects it. Idempotent: an existing checkpoint is kept.
//
// usage: fixture_denoiser <out.ckpt> [image_size] [steps]

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "canopy/config.hpp"
#include "canopy/pipeline.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: fixture_denoiser <out.ckpt> [image_size] [steps]\n");
    return 2;
  }
  const std::filesystem::path out = argv[1];
  if (std::filesystem::exists(out)) {
    std::printf("fixture denoiser already at %s\n", out.string().c_str());
    return 0;
  }

  canopy::PipelineConfig cfg = canopy::load_config(std::nullopt, {});
  cfg.image_size = argc > 2 ? std::atoi(argv[2]) : 32;
  cfg.denoiser_steps = argc > 3 ? std::atoi(argv[3]) : 800;
  cfg.n_frames = 10;

  canopy::Denoiser den = canopy::train_pipeline_denoiser(cfg);
  std::filesystem::create_directories(out.parent_path());
  canopy::save_denoiser_checkpoint(out, den, cfg);
  std::printf("fixture denoiser written to %s\n", out.string().c_str());
  return 0;
}
