#include "canopy/train.hpp"

#include <chrono>
#include <cmath>

#include "canopy/metrics.hpp"

namespace canopy {

namespace {

struct Batch {
  std::vector<Ray> rays;
  Eigen::ArrayXd target;    // B*3
  Eigen::ArrayXd rgb_mask;  // B: rays with trusted color supervision
  Eigen::ArrayXd fg_mask;   // B: object foreground split
  Eigen::Index view = 0;
};

Batch draw_batch(const std::vector<ViewData>& views, int n_rays, bool supervise_background,
                 Rng& rng) {
  Batch b;
  b.view = static_cast<Eigen::Index>(rng.index(views.size()));
  const ViewData& v = views[b.view];
  const Eigen::Index H = v.cam.in.height, W = v.cam.in.width;
  b.rays.reserve(n_rays);
  b.target.resize(n_rays * 3);
  b.rgb_mask.resize(n_rays);
  b.fg_mask.resize(n_rays);
  for (int i = 0; i < n_rays; ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(rng.index(H));
    const Eigen::Index c = static_cast<Eigen::Index>(rng.index(W));
    b.rays.push_back(v.cam.ray_for_index(static_cast<int>(r), static_cast<int>(c)));
    for (int ch = 0; ch < 3; ++ch) b.target[i * 3 + ch] = v.truth.color.at(r, c, ch);
    b.fg_mask[i] = v.truth.mask.at(r, c);
    b.rgb_mask[i] = supervise_background ? 1.0 : b.fg_mask[i];
  }
  return b;
}

FitResult fit_impl(const std::vector<ViewData>& views, const FieldConfig& fcfg,
                   const DeformConfig* dcfg, const TrainConfig& tcfg) {
  if (views.empty()) throw ContractError("fit: no views");
  const auto t_start = std::chrono::steady_clock::now();

  auto init_rng = Rng::substream(tcfg.seed, "field-init");
  FitResult out;
  out.field = RadianceField(fcfg, init_rng);
  std::vector<Tensor> params = out.field.params();
  if (dcfg) {
    DeformConfig dc = *dcfg;
    dc.n_views = static_cast<int>(views.size());
    auto def_rng = Rng::substream(tcfg.seed, "deform-init");
    out.deform = DeformationField(dc, def_rng);
    out.deformable = true;
    for (auto& p : out.deform.params()) params.push_back(p);
  }
  Adam opt(params, tcfg.lr);
  auto batch_rng = Rng::substream(tcfg.seed, "batches");
  auto jitter_rng = Rng::substream(tcfg.seed, "sample-jitter");

  const double near = views.front().cam.in.near;
  const double far = views.front().cam.in.far;
  const double decay = tcfg.steps > 1 ? std::pow(tcfg.lr_final / tcfg.lr,
                                                 1.0 / static_cast<double>(tcfg.steps - 1))
                                      : 1.0;
  const int warmup =
      out.deformable
          ? static_cast<int>(std::lround(tcfg.deform_warmup * static_cast<double>(tcfg.steps)))
          : 0;

  for (int step = 0; step < tcfg.steps; ++step) {
    opt.set_lr(tcfg.lr * std::pow(decay, static_cast<double>(step)));
    Batch b = draw_batch(views, tcfg.rays_per_batch, tcfg.supervise_background, batch_rng);
    auto samples = sample_along_rays(b.rays, near, far, tcfg.samples_per_ray, &jitter_rng);

    // During warmup the warp is exactly identity (zero-initialized head) and
    // gets no gradient, so skipping the point map is equivalent and cheaper.
    const bool deform_on = out.deformable && step >= warmup;
    PointMap pm;
    Tensor offsets;
    if (deform_on) {
      // keep a handle on the offsets for the drift penalty
      pm = [&](const Tensor& pts) {
        offsets = out.deform.offsets(pts, b.view);
        return add(pts, offsets);
      };
    }
    auto render = render_samples(out.field, samples, tcfg.background, pm);
    auto terms = reconstruction_loss(render.color, render.sigma, render.alphas, b.target,
                                     b.rgb_mask, b.fg_mask, samples.n_rays, tcfg.weights);
    Tensor total = terms.total;
    if (deform_on && tcfg.deform_reg != 0.0)
      total = add(total, scale(mean(mul(offsets, offsets)), tcfg.deform_reg));

    opt.zero_grad();
    backward(total);
    opt.step();

    if (step % tcfg.log_every == 0 || step + 1 == tcfg.steps) {
      TrainLogRow row;
      row.step = step;
      row.total = total.item();
      row.rgb = terms.rgb.item();
      row.sparsity = terms.sparsity.item();
      row.entropy = terms.entropy.item();
      const double mse = (render.color.value() - b.target).square().mean();
      row.batch_psnr = mse > 0 ? 10.0 * std::log10(1.0 / mse) : 99.0;
      out.log.push_back(row);
    }
  }

  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace

FitResult fit_radiance_field(const std::vector<ViewData>& views, const FieldConfig& fcfg,
                             const TrainConfig& tcfg) {
  return fit_impl(views, fcfg, nullptr, tcfg);
}

FitResult fit_deformable_field(const std::vector<ViewData>& views, const FieldConfig& fcfg,
                               const DeformConfig& dcfg, const TrainConfig& tcfg) {
  return fit_impl(views, fcfg, &dcfg, tcfg);
}

EvalResult evaluate_field(const RadianceField& field, const std::vector<ViewData>& views,
                          Eigen::Index n_samples, const Eigen::Vector3d& background) {
  if (views.empty()) throw ContractError("evaluate_field: no views");
  EvalResult out;
  double mae_num = 0.0;
  Eigen::Index mae_count = 0;
  for (const auto& v : views) {
    auto frame = render_frame(field, v.cam, n_samples, background);
    out.mean_psnr += psnr(frame.color, v.truth.color);
    for (Eigen::Index i = 0; i < frame.depth.data.size(); ++i) {
      if (v.truth.mask.data[i] == 0.0) continue;
      mae_num += std::abs(frame.depth.data[i] - v.truth.depth.data[i]);
      ++mae_count;
    }
  }
  out.mean_psnr /= static_cast<double>(views.size());
  out.depth_mae = mae_count ? mae_num / static_cast<double>(mae_count) : 0.0;
  return out;
}

double mean_deformation(const DeformationField& def, const std::vector<ViewData>& views,
                        int points_per_view, std::uint64_t seed) {
  NoGradGuard ng;
  auto rng = Rng::substream(seed, "deform-probe");
  double acc = 0.0;
  Eigen::Index n = 0;
  for (size_t v = 0; v < views.size(); ++v) {
    // probe at observed surface points: unproject foreground pixels to their
    // true depth
    const auto& truth = views[v].truth;
    std::vector<double> pts;
    for (int tries = 0; tries < points_per_view * 20 && static_cast<int>(pts.size() / 3) < points_per_view; ++tries) {
      const Eigen::Index r = static_cast<Eigen::Index>(rng.index(truth.mask.h));
      const Eigen::Index c = static_cast<Eigen::Index>(rng.index(truth.mask.w));
      if (truth.mask.at(r, c) == 0.0) continue;
      const Ray ray = views[v].cam.ray_for_index(static_cast<int>(r), static_cast<int>(c));
      const Eigen::Vector3d p = ray.origin + truth.depth.at(r, c) * ray.dir;
      pts.insert(pts.end(), {p.x(), p.y(), p.z()});
    }
    if (pts.empty()) continue;
    const Eigen::Index m = static_cast<Eigen::Index>(pts.size() / 3);
    auto t = Tensor::from_vector({m, 3}, pts);
    auto off = def.offsets(t, static_cast<Eigen::Index>(v));
    for (Eigen::Index i = 0; i < m; ++i) {
      acc += off.value().segment(i * 3, 3).matrix().norm();
      ++n;
    }
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

FieldStats evaluate_field_stats(const RadianceField& field, const std::vector<ViewData>& views,
                                Eigen::Index n_samples, const Eigen::Vector3d& background) {
  if (views.empty()) throw ContractError("evaluate_field_stats: no views");
  NoGradGuard ng;
  FieldStats out;
  Eigen::Index fg_n = 0, bg_n = 0;
  for (const auto& v : views) {
    const Intrinsics& in = v.cam.in;
    for (int row = 0; row < in.height; ++row) {
      std::vector<Ray> rays;
      rays.reserve(static_cast<size_t>(in.width));
      for (int col = 0; col < in.width; ++col) rays.push_back(v.cam.ray_for_index(row, col));
      auto s = sample_along_rays(rays, in.near, in.far, n_samples, nullptr);
      auto r = render_samples(field, s, background);
      const Eigen::ArrayXd& alphas = r.alphas.value();
      const Eigen::ArrayXd& acc = r.acc.value();
      for (int col = 0; col < in.width; ++col) {
        if (v.truth.mask.at(row, col) != 0.0) {
          const auto a = alphas.segment(col * n_samples, n_samples);
          const double mass = a.sum();
          if (mass < 1e-8) continue;  // degenerate ray, entropy undefined
          double ent = 0.0;
          for (Eigen::Index j = 0; j < n_samples; ++j) {
            const double p = a[j] / mass;
            if (p > 0.0) ent -= p * std::log(p);
          }
          out.fg_entropy_mean += ent;
          ++fg_n;
        } else {
          out.bg_acc_mean += acc[col];
          ++bg_n;
        }
      }
    }
  }
  out.fg_entropy_mean = fg_n ? out.fg_entropy_mean / static_cast<double>(fg_n) : 0.0;
  out.bg_acc_mean = bg_n ? out.bg_acc_mean / static_cast<double>(bg_n) : 0.0;
  return out;
}

}  // namespace canopy
