#pragma once

#include <map>
#include <optional>

#include "canopy/denoiser.hpp"

namespace canopy {

// K/V token matrices of the reference stream, keyed by schedule time. Only
// the times the regime schedule actually visits are present.
using ReferenceTokens = std::map<int, Tensor>;

// Noises the reference latent to each high-noise sampling time (seeded, so
// trajectories are reproducible), runs the shared denoiser under the
// reference's own conditioning, and captures the attention-input tokens.
ReferenceTokens encode_reference(const Denoiser& den, const DiffusionSchedule& sched,
                                 const LatentGrid& ref_latent, const DenoiseContext& ref_ctx,
                                 std::uint64_t seed);

struct SampleOptions {
  // Cross-reference K/V per time; mutually exclusive with full_freq_start.
  const ReferenceTokens* reference = nullptr;
  // Dual-stream mode: a second, unfiltered trajectory evolving from this
  // start feeds its tokens to the main stream during high-noise steps.
  const LatentGrid* full_freq_start = nullptr;
};

// Deterministic DDIM trajectory. Steps are indexed ddim_steps..1 (noisiest
// first); indices above t_thres attend to the reference (or parallel) stream
// when one is supplied, later indices fall back to self-attention.
LatentGrid ddim_sample(const Denoiser& den, const DiffusionSchedule& sched,
                       const LatentGrid& x_start, const DenoiseContext& ctx,
                       const SampleOptions& opts = {});

struct GeneratorSettings {
  DiffusionSchedule sched = DiffusionSchedule::linear();
  LatentCodec codec;
  Eigen::Index filter_b = 16;  // low-pass half-size for view latents; 0 = off
};

// Keypoint-conditional reference generation, pure self-attention.
ImageRgb generate_reference(const Denoiser& den, const GeneratorSettings& gs,
                            const LatentGrid& keypoint_map, const Eigen::VectorXd& text,
                            std::uint64_t seed);

// Viewpoint-aware generation: depth-conditional sampling from the low-passed
// shared latent, attending to the reference image's features during the
// high-noise steps.
ImageRgb generate_view(const Denoiser& den, const GeneratorSettings& gs,
                       const LatentGrid& depth_cond, const LatentGrid& ref_depth_cond,
                       const Eigen::VectorXd& text, const LatentGrid& x_t_shared,
                       const ImageRgb& reference_image, std::uint64_t seed);

}  // namespace canopy
