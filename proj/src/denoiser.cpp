#include "canopy/denoiser.hpp"

#include <cmath>

#include "canopy/optim.hpp"

namespace canopy {

namespace {

constexpr double kPi = 3.14159265358979323846;

// 3x3 taps around each output pixel of an h x w, c-channel token grid,
// flattened for gather: -1 marks zero padding. stride 2 halves the grid.
std::shared_ptr<const std::vector<std::int64_t>> im2col_taps(Eigen::Index h, Eigen::Index w,
                                                             Eigen::Index c,
                                                             Eigen::Index stride) {
  const Eigen::Index oh = h / stride, ow = w / stride;
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(oh * ow * 9 * c);
  for (Eigen::Index r = 0; r < oh; ++r) {
    for (Eigen::Index col = 0; col < ow; ++col) {
      for (Eigen::Index dr = -1; dr <= 1; ++dr) {
        for (Eigen::Index dc = -1; dc <= 1; ++dc) {
          const Eigen::Index ir = r * stride + dr;
          const Eigen::Index ic = col * stride + dc;
          const bool in = ir >= 0 && ir < h && ic >= 0 && ic < w;
          for (Eigen::Index ch = 0; ch < c; ++ch)
            idx->push_back(in ? (ir * w + ic) * c + ch : -1);
        }
      }
    }
  }
  return idx;
}

// Nearest-neighbor 2x upsample of an h x w, c-channel token grid.
std::shared_ptr<const std::vector<std::int64_t>> upsample_taps(Eigen::Index h, Eigen::Index w,
                                                               Eigen::Index c) {
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(4 * h * w * c);
  for (Eigen::Index r = 0; r < 2 * h; ++r)
    for (Eigen::Index col = 0; col < 2 * w; ++col)
      for (Eigen::Index ch = 0; ch < c; ++ch)
        idx->push_back(((r / 2) * w + col / 2) * c + ch);
  return idx;
}

Eigen::ArrayXd condition_plane(const LatentGrid& grid, Eigen::Index hw, Eigen::Index channels,
                               const char* name) {
  if (grid.data.size() == 0) return Eigen::ArrayXd::Zero(hw * hw * channels);
  if (grid.h != hw || grid.w != hw || grid.c != channels)
    throw ShapeError(std::string("denoiser: ") + name + " condition has wrong shape");
  return grid.data;
}

}  // namespace

Eigen::VectorXd text_embedding(const std::string& prompt) {
  Rng rng(Rng::substream_seed(0x7e87u, prompt));
  Eigen::VectorXd v(32);
  for (int i = 0; i < 32; ++i) v[i] = rng.normal(0.0, 1.0 / std::sqrt(32.0));
  return v;
}

Eigen::Vector4d time_embedding(int t, int t_steps) {
  const double x = static_cast<double>(t) / static_cast<double>(t_steps);
  return {std::sin(kPi * x), std::cos(kPi * x), std::sin(4.0 * kPi * x),
          std::cos(4.0 * kPi * x)};
}

LatentGrid rasterize_keypoints(const std::vector<Eigen::Vector2d>& points,
                               const std::vector<bool>& visible, Eigen::Index h, Eigen::Index w,
                               double sigma_px) {
  if (visible.size() != points.size())
    throw ShapeError("rasterize_keypoints: visibility size mismatch");
  LatentGrid grid(h, w, static_cast<Eigen::Index>(points.size()));
  const double inv = 1.0 / (2.0 * sigma_px * sigma_px);
  for (size_t k = 0; k < points.size(); ++k) {
    if (!visible[k]) continue;
    for (Eigen::Index r = 0; r < h; ++r) {
      for (Eigen::Index c = 0; c < w; ++c) {
        const double dx = (static_cast<double>(c) + 0.5) - points[k].x();
        const double dy = (static_cast<double>(r) + 0.5) - points[k].y();
        grid.at(r, c, static_cast<Eigen::Index>(k)) = std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  return grid;
}

LatentGrid depth_condition(const ImageGray& depth, double near, double far) {
  if (far <= near) throw ContractError("depth_condition: far <= near");
  LatentGrid grid(depth.h, depth.w, 1);
  for (Eigen::Index i = 0; i < depth.data.size(); ++i) {
    const double d = depth.data[i];
    const double v = d <= 0.0 ? 1.0 : (d - near) / (far - near);
    grid.data[i] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }
  return grid;
}

Denoiser::Denoiser(const DenoiserConfig& cfg, Rng& rng) : cfg_(cfg) {
  const Eigen::Index hw = cfg.latent_hw;
  if (hw % 4 != 0) throw ContractError("Denoiser: latent_hw must be divisible by 4");
  const int cin = cfg.input_channels();

  enc0a = nn::Linear(9 * cin, cfg.c0, rng);
  enc0b = nn::Linear(9 * cfg.c0, cfg.c0, rng);
  dn1a = nn::Linear(9 * cfg.c0, cfg.c1, rng);
  dn1b = nn::Linear(9 * cfg.c1, cfg.c1, rng);
  dn2a = nn::Linear(9 * cfg.c1, cfg.c2, rng);
  dn2b = nn::Linear(9 * cfg.c2, cfg.c2, rng);
  attn_gain = Tensor::full({cfg.c2}, 1.0, true);
  attn_bias = Tensor::zeros({cfg.c2}, true);
  attn = AttentionBlock(cfg.c2, rng);
  up1a = nn::Linear(9 * (cfg.c2 + cfg.c1), cfg.c1, rng);
  up1b = nn::Linear(9 * cfg.c1, cfg.c1, rng);
  up2a = nn::Linear(9 * (cfg.c1 + cfg.c0), cfg.c0, rng);
  up2b = nn::Linear(9 * cfg.c0, cfg.c0, rng);
  out_head = nn::Linear(9 * cfg.c0, cfg.latent_channels, rng);
  out_head.W.mutable_value().setZero();  // fresh model predicts eps = 0
  text_proj = nn::Linear(cfg.text_dim, cfg.text_channels, rng);

  t_in_ = im2col_taps(hw, hw, cin, 1);
  t_c0_ = im2col_taps(hw, hw, cfg.c0, 1);
  t_c0s2_ = im2col_taps(hw, hw, cfg.c0, 2);
  t_c1_ = im2col_taps(hw / 2, hw / 2, cfg.c1, 1);
  t_c1s2_ = im2col_taps(hw / 2, hw / 2, cfg.c1, 2);
  t_c2_ = im2col_taps(hw / 4, hw / 4, cfg.c2, 1);
  t_cat1_ = im2col_taps(hw / 2, hw / 2, cfg.c2 + cfg.c1, 1);
  t_cat0_ = im2col_taps(hw, hw, cfg.c1 + cfg.c0, 1);
  up_16_32_ = upsample_taps(hw / 4, hw / 4, cfg.c2);
  up_32_64_ = upsample_taps(hw / 2, hw / 2, cfg.c1);
  row0_ = std::make_shared<const std::vector<std::int64_t>>(hw * hw, 0);
}

Tensor Denoiser::conv3(const Tensor& x, const nn::Linear& kernel, const IndexTable& taps,
                       Eigen::Index out_pixels, Eigen::Index in_channels) const {
  return kernel(gather(x, taps, {out_pixels, 9 * in_channels}));
}

Tensor Denoiser::forward(const Tensor& x_tokens, const DenoiseContext& ctx, int t, int t_steps,
                         AttentionRegime regime, const Tensor* kv_tokens,
                         Tensor* capture) const {
  const Eigen::Index hw = cfg_.latent_hw;
  const Eigen::Index n = hw * hw;
  if (x_tokens.rank() != 2 || x_tokens.shape()[0] != n ||
      x_tokens.shape()[1] != cfg_.latent_channels)
    throw ShapeError("Denoiser::forward: latent tokens have shape " + shape_str(x_tokens.shape()));
  if (ctx.text.size() != cfg_.text_dim)
    throw ShapeError("Denoiser::forward: text embedding dimension mismatch");

  Tensor depth = Tensor::from_array({n, cfg_.depth_channels},
                                    condition_plane(ctx.depth, hw, cfg_.depth_channels, "depth"));
  Tensor keyp = Tensor::from_array(
      {n, cfg_.keypoint_channels},
      condition_plane(ctx.keypoints, hw, cfg_.keypoint_channels, "keypoint"));

  const Eigen::Vector4d te = time_embedding(t, t_steps);
  Eigen::ArrayXd time_tiled(n * 4);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < 4; ++k) time_tiled[i * 4 + k] = te[k];
  Tensor time_tok = Tensor::from_array({n, 4}, std::move(time_tiled));

  Tensor text_row = Tensor::from_array({1, cfg_.text_dim}, ctx.text.array());
  Tensor text_tok = gather_rows(text_proj(text_row), *row0_);

  Tensor h = concat_cols({x_tokens, depth, keyp, time_tok, text_tok});
  h = relu(conv3(h, enc0a, t_in_, n, cfg_.input_channels()));
  Tensor skip0 = relu(conv3(h, enc0b, t_c0_, n, cfg_.c0));

  h = relu(conv3(skip0, dn1a, t_c0s2_, n / 4, cfg_.c0));
  Tensor skip1 = relu(conv3(h, dn1b, t_c1_, n / 4, cfg_.c1));

  h = relu(conv3(skip1, dn2a, t_c1s2_, n / 16, cfg_.c1));
  h = relu(conv3(h, dn2b, t_c2_, n / 16, cfg_.c2));

  Tensor normed = layernorm_rows(h, attn_gain, attn_bias);
  if (capture) *capture = normed;
  const Tensor* other = regime == AttentionRegime::kSelf ? nullptr : kv_tokens;
  h = add(h, attend_with_regime(attn, normed, other, regime));

  h = gather(h, up_16_32_, {n / 4, cfg_.c2});
  h = concat_cols({h, skip1});
  h = relu(conv3(h, up1a, t_cat1_, n / 4, cfg_.c2 + cfg_.c1));
  h = relu(conv3(h, up1b, t_c1_, n / 4, cfg_.c1));

  h = gather(h, up_32_64_, {n, cfg_.c1});
  h = concat_cols({h, skip0});
  h = relu(conv3(h, up2a, t_cat0_, n, cfg_.c1 + cfg_.c0));
  h = relu(conv3(h, up2b, t_c0_, n, cfg_.c0));

  return conv3(h, out_head, t_c0_, n, cfg_.c0);
}

std::vector<Tensor> Denoiser::params() const {
  std::vector<Tensor> out;
  for (const auto* lin : {&enc0a, &enc0b, &dn1a, &dn1b, &dn2a, &dn2b, &up1a, &up1b, &up2a, &up2b,
                          &out_head, &text_proj})
    lin->params(out);
  out.push_back(attn_gain);
  out.push_back(attn_bias);
  for (const auto& p : attn.params()) out.push_back(p);
  return out;
}

std::vector<double> train_denoiser(Denoiser& den, const std::vector<DenoiserSample>& data,
                                   const DiffusionSchedule& sched,
                                   const DenoiserTrainConfig& cfg) {
  if (data.empty()) throw DataError("train_denoiser: empty dataset");
  const Eigen::Index hw = den.config().latent_hw;
  const Eigen::Index n = hw * hw;
  const Eigen::Index c = den.config().latent_channels;

  Adam opt(den.params(), cfg.lr);
  auto pick = Rng::substream(cfg.seed, "denoise-batch");
  auto noise = Rng::substream(cfg.seed, "denoise-eps");
  auto drop = Rng::substream(cfg.seed, "denoise-cond");
  const double decay =
      cfg.steps > 1 ? std::pow(cfg.lr_final / cfg.lr, 1.0 / static_cast<double>(cfg.steps - 1))
                    : 1.0;

  std::vector<double> log;
  for (int step = 0; step < cfg.steps; ++step) {
    opt.set_lr(cfg.lr * std::pow(decay, static_cast<double>(step)));
    Tensor total;
    for (int b = 0; b < cfg.batch; ++b) {
      const DenoiserSample& s = data[pick.index(data.size())];
      if (s.x0.h != hw || s.x0.w != hw || s.x0.c != c)
        throw ShapeError("train_denoiser: sample latent shape mismatch");
      const int t = 1 + static_cast<int>(pick.index(static_cast<size_t>(sched.t_steps)));
      LatentGrid eps = gaussian_latent(hw, hw, c, noise);
      LatentGrid x_t = q_sample(s.x0, t, eps, sched);

      DenoiseContext ctx = s.ctx;
      const double u = drop.uniform();
      if (u < cfg.p_depth_only)
        ctx.keypoints = LatentGrid{};
      else if (u < cfg.p_depth_only + cfg.p_kp_only)
        ctx.depth = LatentGrid{};

      Tensor pred = den.forward(Tensor::from_array({n, c}, x_t.data), ctx, t, sched.t_steps);
      Tensor diff = sub(pred, Tensor::from_array({n, c}, eps.data));
      Tensor loss = mean(mul(diff, diff));
      total = total.defined() ? add(total, loss) : loss;
    }
    total = scale(total, 1.0 / static_cast<double>(cfg.batch));

    opt.zero_grad();
    backward(total);
    opt.step();
    if (step % cfg.log_every == 0 || step + 1 == cfg.steps) log.push_back(total.item());
  }
  return log;
}

}  // namespace canopy
