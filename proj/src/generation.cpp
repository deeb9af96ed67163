#include "canopy/generation.hpp"

namespace canopy {

namespace {

Tensor tokens_of(const LatentGrid& z, Eigen::Index channels) {
  return Tensor::from_array({z.h * z.w, channels}, z.data);
}

}  // namespace

ReferenceTokens encode_reference(const Denoiser& den, const DiffusionSchedule& sched,
                                 const LatentGrid& ref_latent, const DenoiseContext& ref_ctx,
                                 std::uint64_t seed) {
  NoGradGuard ng;
  auto rng = Rng::substream(seed, "reference-noise");
  ReferenceTokens out;
  const auto times = sched.ddim_times();
  for (int i = 0; i < sched.ddim_steps; ++i) {
    const int step_index = sched.ddim_steps - i;
    if (step_index <= sched.t_thres) break;  // later steps run self-attention
    const int t = times[static_cast<size_t>(i)];
    LatentGrid eps = gaussian_latent(ref_latent.h, ref_latent.w, ref_latent.c, rng);
    LatentGrid x_t = q_sample(ref_latent, t, eps, sched);
    Tensor captured;
    den.forward(tokens_of(x_t, ref_latent.c), ref_ctx, t, sched.t_steps,
                AttentionRegime::kSelf, nullptr, &captured);
    out.emplace(t, captured);
  }
  return out;
}

LatentGrid ddim_sample(const Denoiser& den, const DiffusionSchedule& sched,
                       const LatentGrid& x_start, const DenoiseContext& ctx,
                       const SampleOptions& opts) {
  if (opts.reference && opts.full_freq_start)
    throw ContractError("ddim_sample: reference and dual-stream modes are exclusive");
  NoGradGuard ng;
  const auto times = sched.ddim_times();
  const Eigen::Index c = x_start.c;

  LatentGrid x = x_start;
  LatentGrid x_full;
  if (opts.full_freq_start) x_full = *opts.full_freq_start;

  for (int i = 0; i < sched.ddim_steps; ++i) {
    const int t = times[static_cast<size_t>(i)];
    const int t_prev = times[static_cast<size_t>(i) + 1];
    const int step_index = sched.ddim_steps - i;
    const bool high_noise = step_index > sched.t_thres;

    LatentGrid eps_hat = x;  // shape carrier
    if (high_noise && opts.reference && opts.reference->count(t)) {
      const Tensor& kv = opts.reference->at(t);
      eps_hat.data = den.forward(tokens_of(x, c), ctx, t, sched.t_steps,
                                 AttentionRegime::kCrossReference, &kv)
                         .value();
    } else if (high_noise && opts.full_freq_start) {
      // advance the unfiltered twin one step under self-attention, exporting
      // its tokens into the filtered stream
      Tensor full_tokens;
      Tensor eps_full = den.forward(tokens_of(x_full, c), ctx, t, sched.t_steps,
                                    AttentionRegime::kSelf, nullptr, &full_tokens);
      LatentGrid ef = x_full;
      ef.data = eps_full.value();
      x_full = ddim_step(x_full, ef, t, t_prev, sched);
      eps_hat.data = den.forward(tokens_of(x, c), ctx, t, sched.t_steps,
                                 AttentionRegime::kDualStreamFullFreq, &full_tokens)
                         .value();
    } else {
      eps_hat.data = den.forward(tokens_of(x, c), ctx, t, sched.t_steps).value();
    }
    x = ddim_step(x, eps_hat, t, t_prev, sched);
  }
  return x;
}

ImageRgb generate_reference(const Denoiser& den, const GeneratorSettings& gs,
                            const LatentGrid& keypoint_map, const Eigen::VectorXd& text,
                            std::uint64_t seed) {
  const Eigen::Index hw = den.config().latent_hw;
  DenoiseContext ctx;
  ctx.keypoints = keypoint_map;
  ctx.text = text;
  auto rng = Rng::substream(seed, "reference-x_T");
  LatentGrid x_t = gaussian_latent(hw, hw, den.config().latent_channels, rng);
  return gs.codec.decode(ddim_sample(den, gs.sched, x_t, ctx));
}

ImageRgb generate_view(const Denoiser& den, const GeneratorSettings& gs,
                       const LatentGrid& depth_cond, const LatentGrid& ref_depth_cond,
                       const Eigen::VectorXd& text, const LatentGrid& x_t_shared,
                       const ImageRgb& reference_image, std::uint64_t seed) {
  if (reference_image.h <= 0) throw ContractError("generate_view: missing reference image");

  DenoiseContext ref_ctx;
  ref_ctx.depth = ref_depth_cond;
  ref_ctx.text = text;
  const LatentGrid ref_latent = gs.codec.encode(reference_image);
  const ReferenceTokens ref = encode_reference(den, gs.sched, ref_latent, ref_ctx, seed);

  DenoiseContext ctx;
  ctx.depth = depth_cond;
  ctx.text = text;
  const LatentGrid x_start =
      gs.filter_b > 0 ? filter_latent(x_t_shared, gs.filter_b) : x_t_shared;

  SampleOptions opts;
  opts.reference = &ref;
  return gs.codec.decode(ddim_sample(den, gs.sched, x_start, ctx, opts));
}

}  // namespace canopy
