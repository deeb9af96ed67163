#pragma once

#include <map>
#include <string>
#include <vector>

#include "canopy/attention.hpp"
#include "canopy/diffusion.hpp"
#include "canopy/latent.hpp"

namespace canopy {

// Deterministic 32-dim stand-in for a text encoder: the prompt string seeds a
// fixed pseudo-random unit-scale vector, so equal prompts embed equally.
Eigen::VectorXd text_embedding(const std::string& prompt);

// Sinusoidal embedding of normalized schedule time, broadcast to every token.
Eigen::Vector4d time_embedding(int t, int t_steps);

// Renders keypoints as one peak-1 Gaussian splat channel per landmark slot at
// the latent resolution. Points outside the frame still splat their tail;
// invisible slots (empty entries) stay zero.
LatentGrid rasterize_keypoints(const std::vector<Eigen::Vector2d>& points,
                               const std::vector<bool>& visible, Eigen::Index h, Eigen::Index w,
                               double sigma_px = 2.0);

// Depth plane scaled to [0,1] over [near, far]; non-positive depths (the
// background convention) read as far.
LatentGrid depth_condition(const ImageGray& depth, double near, double far);

struct DenoiserConfig {
  Eigen::Index latent_hw = 64;
  int latent_channels = 4;
  int depth_channels = 1;
  int keypoint_channels = 4;
  int time_channels = 4;
  int text_channels = 4;  // learned projection of the 32-dim embedding
  int text_dim = 32;
  int c0 = 12, c1 = 24, c2 = 36;  // widths of the 64/32/16 levels

  int condition_channels() const { return depth_channels + keypoint_channels; }
  int input_channels() const {
    return latent_channels + condition_channels() + time_channels + text_channels;
  }
};

// Conditioning for one diffusion stream. Empty grids mean "condition absent"
// and enter the network as zero planes.
struct DenoiseContext {
  LatentGrid depth;      // [hw, hw, 1]
  LatentGrid keypoints;  // [hw, hw, 4]
  Eigen::VectorXd text = Eigen::VectorXd::Zero(32);
};

// Toy conditional eps-predictor: three-level conv encoder-decoder over latent
// tokens with one attention block at the coarsest (16x16) level. Convolutions
// are im2col gathers plus matmuls over precomputed index tables; all state is
// immutable after construction, so forwards are thread-safe.
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(const DenoiserConfig& cfg, Rng& rng);

  // x_tokens: [hw*hw, latent_channels] noised latent. When `capture` is
  // given, receives the normalized attention-input tokens (the K/V source a
  // reference stream exports). kv_tokens supplies those of the other stream
  // for non-self regimes.
  Tensor forward(const Tensor& x_tokens, const DenoiseContext& ctx, int t, int t_steps,
                 AttentionRegime regime = AttentionRegime::kSelf,
                 const Tensor* kv_tokens = nullptr, Tensor* capture = nullptr) const;

  std::vector<Tensor> params() const;
  const DenoiserConfig& config() const { return cfg_; }

  nn::Linear enc0a, enc0b;      // 64x64
  nn::Linear dn1a, dn1b;        // stride 2 to 32x32
  nn::Linear dn2a, dn2b;        // stride 2 to 16x16
  Tensor attn_gain, attn_bias;  // layer norm before attention
  AttentionBlock attn;
  nn::Linear up1a, up1b;  // back to 32x32 (skip concat)
  nn::Linear up2a, up2b;  // back to 64x64 (skip concat)
  nn::Linear out_head;    // zero-initialized: a fresh model predicts eps = 0
  nn::Linear text_proj;   // text_dim -> text_channels

 private:
  using IndexTable = std::shared_ptr<const std::vector<std::int64_t>>;

  Tensor conv3(const Tensor& x, const nn::Linear& kernel, const IndexTable& taps,
               Eigen::Index out_pixels, Eigen::Index in_channels) const;

  DenoiserConfig cfg_;
  // im2col tables per level and the 2x nearest-neighbor upsample tables
  IndexTable t_in_, t_c0_, t_c0s2_, t_c1_, t_c1s2_, t_c2_, t_cat1_, t_up1_, t_cat0_, t_up0_;
  IndexTable up_16_32_, up_32_64_;
  std::shared_ptr<const std::vector<std::int64_t>> row0_;  // text broadcast
};

struct DenoiserSample {
  LatentGrid x0;       // clean latent
  DenoiseContext ctx;  // full conditioning; training may drop groups
};

struct DenoiserTrainConfig {
  int steps = 1500;
  int batch = 3;
  double lr = 2e-3;
  double lr_final = 2e-4;
  std::uint64_t seed = 5;
  int log_every = 50;
  // per-sample condition dropout: [0, p_depth_only) keeps depth alone,
  // [p_depth_only, p_depth_only + p_kp_only) keeps keypoints alone, the rest
  // keeps both
  double p_depth_only = 0.45;
  double p_kp_only = 0.45;
};

// eps-prediction MSE training; returns the logged losses.
std::vector<double> train_denoiser(Denoiser& den, const std::vector<DenoiserSample>& data,
                                   const DiffusionSchedule& sched,
                                   const DenoiserTrainConfig& cfg);

}  // namespace canopy
