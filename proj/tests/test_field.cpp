#include "doctest.h"

#include <cmath>

#include "canopy/deform.hpp"
#include "canopy/field.hpp"
#include "canopy/losses.hpp"
#include "canopy/rng.hpp"

using namespace canopy;

TEST_CASE("positional encoding closed forms and dimension law") {
  auto x = Tensor::from_vector({2, 1}, {1.0, 0.5});
  auto enc = positional_encode(x, 2);
  REQUIRE(enc.shape() == Shape{2, 5});  // [x, sin(pi x), cos(pi x), sin(2pi x), cos(2pi x)]
  auto v = enc.mat();
  CHECK(v(0, 0) == 1.0);
  CHECK(v(0, 1) == doctest::Approx(std::sin(M_PI)).epsilon(1e-12));
  CHECK(v(0, 2) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(v(0, 3) == doctest::Approx(std::sin(2 * M_PI)).epsilon(1e-12));
  CHECK(v(0, 4) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v(1, 1) == doctest::Approx(1.0).epsilon(1e-12));   // sin(pi/2)
  CHECK(v(1, 2) == doctest::Approx(0.0).epsilon(1e-12));   // cos(pi/2)
  CHECK(v(1, 3) == doctest::Approx(0.0).epsilon(1e-12));   // sin(pi)
  CHECK(v(1, 4) == doctest::Approx(-1.0).epsilon(1e-12));  // cos(pi)

  CHECK(positional_encode(Tensor::zeros({4, 3}), 6).shape() == Shape{4, 39});
  CHECK(positional_encode(Tensor::zeros({4, 3}), 6, false).shape() == Shape{4, 36});
  CHECK(positional_encode_dim(3, 6) == 39);

  Rng rng(3);
  Eigen::ArrayXd pv(6);
  for (Eigen::Index i = 0; i < 6; ++i) pv[i] = rng.uniform(-1, 1);
  CHECK(grad_check(
            [](const Tensor& t) { return sum(mul(positional_encode(t, 3), positional_encode(t, 3))); },
            Tensor::from_array({2, 3}, pv)) < 1e-6);
}

TEST_CASE("stratified sampling lands in its bins with correct deltas") {
  std::vector<Ray> rays(3);
  rays[0] = {{0, 0, 0}, {0, 0, -1}};
  rays[1] = {{1, 2, 3}, Eigen::Vector3d(1, 1, 0).normalized()};
  rays[2] = {{0, 1, 0}, {1, 0, 0}};
  const double near = 0.5, far = 4.5;
  const Eigen::Index J = 16;

  Rng rng(9);
  auto s = sample_along_rays(rays, near, far, J, &rng);
  REQUIRE(s.n_rays == 3);
  REQUIRE(s.n_samples == J);
  const double bin = (far - near) / static_cast<double>(J);
  for (Eigen::Index r = 0; r < 3; ++r) {
    for (Eigen::Index j = 0; j < J; ++j) {
      const double t = s.ts[r * J + j];
      CHECK(t >= near + bin * static_cast<double>(j));
      CHECK(t < near + bin * static_cast<double>(j + 1));
      if (j > 0) CHECK(t > s.ts[r * J + j - 1]);
      const double next = (j + 1 < J) ? s.ts[r * J + j + 1] : far;
      CHECK(s.deltas[r * J + j] == doctest::Approx(next - t).epsilon(1e-12));
      // point = origin + t * dir
      const Eigen::Vector3d p = rays[r].origin + t * rays[r].dir;
      for (int k = 0; k < 3; ++k)
        CHECK(s.points.value()[(r * J + j) * 3 + k] == doctest::Approx(p[k]).epsilon(1e-12));
    }
  }

  // deterministic midpoints without a jitter source
  auto mid = sample_along_rays(rays, near, far, J, nullptr);
  for (Eigen::Index j = 0; j < J; ++j)
    CHECK(mid.ts[j] == doctest::Approx(near + bin * (static_cast<double>(j) + 0.5)).epsilon(1e-12));
}

TEST_CASE("field query ranges, shapes, and gradient flow") {
  Rng rng(21);
  FieldConfig cfg;
  cfg.pos_enc_levels = 4;
  cfg.width = 32;
  cfg.depth = 2;
  RadianceField field(cfg, rng);

  Eigen::ArrayXd pv(5 * 3);
  for (Eigen::Index i = 0; i < pv.size(); ++i) pv[i] = rng.uniform(-1, 1);
  auto pts = Tensor::from_array({5, 3}, pv);
  auto out = field.query(pts);
  REQUIRE(out.sigma.shape() == Shape{5});
  REQUIRE(out.rgb.shape() == Shape{5, 3});
  CHECK((out.sigma.value() >= 0.0).all());
  CHECK((out.rgb.value() > 0.0).all());
  CHECK((out.rgb.value() < 1.0).all());

  backward(add(sum(out.sigma), sum(out.rgb)));
  double gnorm = 0.0;
  for (const auto& p : field.params()) gnorm += p.grad().abs().sum();
  CHECK(gnorm > 0.0);
}

TEST_CASE("render_samples composits the field output end to end") {
  Rng rng(23);
  FieldConfig cfg;
  cfg.pos_enc_levels = 3;
  cfg.width = 24;
  cfg.depth = 2;
  RadianceField field(cfg, rng);

  std::vector<Ray> rays;
  for (int i = 0; i < 4; ++i)
    rays.push_back({{0, 0, 2}, Eigen::Vector3d(0.1 * i - 0.15, 0.05, -1).normalized()});
  auto s = sample_along_rays(rays, 0.5, 4.0, 12, &rng);
  const Eigen::Vector3d bg(1, 1, 1);
  auto out = render_samples(field, s, bg);

  REQUIRE(out.color.shape() == Shape{4, 3});
  // composited color is a convex combination of sample colors and background
  CHECK((out.color.value() >= 0.0).all());
  CHECK((out.color.value() <= 1.0).all());
  CHECK((out.acc.value() >= 0.0).all());
  CHECK((out.acc.value() <= 1.0).all());

  backward(sum(out.color));
  double gnorm = 0.0;
  for (const auto& p : field.params()) gnorm += p.grad().abs().sum();
  CHECK(gnorm > 0.0);
  CHECK(std::isfinite(gnorm));
}

TEST_CASE("render_frame is independent of row batching") {
  Rng rng(25);
  FieldConfig cfg;
  cfg.pos_enc_levels = 2;
  cfg.width = 16;
  cfg.depth = 1;
  RadianceField field(cfg, rng);

  Intrinsics in;
  in.fx = in.fy = 12.0;
  in.cx = in.cy = 4.0;
  in.width = in.height = 8;
  in.near = 0.5;
  in.far = 4.0;
  auto cam = Camera::look_at(in, {0, 0, 3}, {0, 0, 0}, {0, 1, 0});

  auto a = render_frame(field, cam, 8, {0, 0, 0}, {}, 2);
  auto b = render_frame(field, cam, 8, {0, 0, 0}, {}, 64);
  CHECK((a.color.data - b.color.data).abs().maxCoeff() == 0.0);
  CHECK((a.depth.data - b.depth.data).abs().maxCoeff() == 0.0);
  CHECK(a.color.h == 8);
  CHECK(a.color.w == 8);
}

TEST_CASE("deformation starts as the identity and learns per view") {
  Rng rng(27);
  DeformConfig cfg;
  cfg.n_views = 4;
  cfg.code_dim = 6;
  cfg.pos_enc_levels = 2;
  cfg.width = 24;
  cfg.depth = 2;
  DeformationField def(cfg, rng);

  Eigen::ArrayXd pv(6 * 3);
  for (Eigen::Index i = 0; i < pv.size(); ++i) pv[i] = rng.uniform(-1, 1);
  auto pts = Tensor::from_array({6, 3}, pv);

  auto warped = def.deform(pts, 1);
  CHECK((warped.value() - pts.value()).abs().maxCoeff() == 0.0);
  CHECK(def.offsets(pts, 1).value().abs().maxCoeff() == 0.0);

  // randomize the head: warp becomes view-dependent and differentiable
  auto& head = def.mlp.layers.back();
  for (Eigen::Index i = 0; i < head.W.size(); ++i) head.W.mutable_value()[i] = rng.normal(0, 0.1);
  auto w0 = def.deform(pts, 0);
  auto w3 = def.deform(pts, 3);
  CHECK((w0.value() - w3.value()).abs().maxCoeff() > 0.0);

  // only the active view's code receives gradient
  backward(sum(def.offsets(pts, 2)));
  const auto& cg = def.codes.grad();
  const Eigen::Index cd = cfg.code_dim;
  CHECK(cg.segment(0 * cd, cd).abs().maxCoeff() == 0.0);
  CHECK(cg.segment(1 * cd, cd).abs().maxCoeff() == 0.0);
  CHECK(cg.segment(3 * cd, cd).abs().maxCoeff() == 0.0);
  CHECK(cg.segment(2 * cd, cd).abs().maxCoeff() > 0.0);

  CHECK(grad_check(
            [&](const Tensor& x) { return sum(mul(def.deform(x, 0), def.deform(x, 0))); },
            pts) < 1e-6);
}

TEST_CASE("loss_rgb closed form and gradient") {
  const Eigen::Index B = 3;
  Eigen::ArrayXd target = Eigen::ArrayXd::Zero(B * 3);
  Eigen::ArrayXd mask(B);
  mask << 1, 1, 0;
  auto pred = Tensor::full({B, 3}, 0.3, true);
  auto l = loss_rgb(pred, target, mask);
  // sqrt(6 * 0.3^2) / 2 foreground rays
  CHECK(l.item() == doctest::Approx(std::sqrt(6 * 0.09) / 2.0).epsilon(1e-12));

  // masked-out rays receive no gradient
  backward(l);
  CHECK(pred.grad().segment(6, 3).abs().maxCoeff() == 0.0);
  CHECK(pred.grad().segment(0, 6).abs().maxCoeff() > 0.0);

  Rng rng(31);
  Eigen::ArrayXd t2(B * 3), p2(B * 3);
  for (Eigen::Index i = 0; i < B * 3; ++i) {
    t2[i] = rng.uniform(0, 1);
    p2[i] = rng.uniform(0, 1);
  }
  CHECK(grad_check([&](const Tensor& x) { return loss_rgb(x, t2, mask); },
                   Tensor::from_array({B, 3}, p2)) < 1e-6);

  // perfect prediction: zero loss, finite (zero) gradient
  auto exact = Tensor::from_array({B, 3}, t2, true);
  auto lz = loss_rgb(exact, t2, mask);
  CHECK(lz.item() == 0.0);
  backward(lz);
  CHECK(exact.grad().isFinite().all());
}

TEST_CASE("loss_sparsity closed form and gradient") {
  const Eigen::Index B = 4, J = 5;
  Eigen::ArrayXd mask(B);
  mask << 1, 0, 0, 1;  // two background rays
  auto sigma = Tensor::full({B * J}, 2.0, true);
  auto l = loss_sparsity(sigma, mask, B, 1.0);
  CHECK(l.item() == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-12));

  backward(l);
  // only background-ray samples get gradient
  for (Eigen::Index j = 0; j < J; ++j) {
    CHECK(sigma.grad()[0 * J + j] == 0.0);
    CHECK(sigma.grad()[3 * J + j] == 0.0);
    CHECK(sigma.grad()[1 * J + j] != 0.0);
  }

  Rng rng(33);
  Eigen::ArrayXd raw(B * J);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw[i] = rng.uniform(-1, 2);
  CHECK(grad_check(
            [&](const Tensor& x) { return loss_sparsity(softplus(x), mask, B, 0.7); },
            Tensor::from_array({B * J}, raw)) < 1e-6);

  // all-foreground batch: sparsity term vanishes
  Eigen::ArrayXd all_fg = Eigen::ArrayXd::Ones(B);
  CHECK(loss_sparsity(sigma, all_fg, B).item() == 0.0);
}

TEST_CASE("loss_entropy averages ray entropy over foreground") {
  const Eigen::Index B = 3, J = 4;
  Eigen::ArrayXd mask(B);
  mask << 1, 1, 0;
  auto alphas = Tensor::full({B, J}, 0.25, true);
  auto l = loss_entropy(alphas, mask);
  CHECK(l.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));  // 2 uniform rays / 2

  Eigen::ArrayXd none = Eigen::ArrayXd::Zero(B);
  CHECK(loss_entropy(alphas, none).item() == 0.0);

  Rng rng(35);
  Eigen::ArrayXd raw(B * J);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw[i] = rng.uniform(-1, 1);
  CHECK(grad_check([&](const Tensor& x) { return loss_entropy(sigmoid(x), mask); },
                   Tensor::from_array({B, J}, raw)) < 1e-6);
}

TEST_CASE("reconstruction_loss combines weighted terms") {
  Rng rng(37);
  const Eigen::Index B = 4, J = 6;
  Eigen::ArrayXd mask(B), target(B * 3);
  mask << 1, 0, 1, 1;
  for (Eigen::Index i = 0; i < target.size(); ++i) target[i] = rng.uniform(0, 1);
  Eigen::ArrayXd sraw(B * J), craw(B * 3);
  for (Eigen::Index i = 0; i < sraw.size(); ++i) sraw[i] = rng.uniform(0.01, 2.0);
  for (Eigen::Index i = 0; i < craw.size(); ++i) craw[i] = rng.uniform(0, 1);
  auto sigma = Tensor::from_array({B * J}, sraw, true);
  auto pred = Tensor::from_array({B, 3}, craw, true);
  Eigen::ArrayXd deltas = Eigen::ArrayXd::Constant(B * J, 0.1);
  Eigen::ArrayXd ts(B * J);
  for (Eigen::Index r = 0; r < B; ++r)
    for (Eigen::Index j = 0; j < J; ++j) ts[r * J + j] = 1.0 + 0.1 * static_cast<double>(j);
  auto comp = composite(sigma, Tensor::from_array({B * J, 3}, craw.replicate(J, 1).eval()),
                        ts, deltas, B, {0, 0, 0});

  LossWeights w;
  w.rgb = 1.0;
  w.sparsity = 1e-3;
  w.entropy = 1e-6;
  Eigen::ArrayXd rgb_mask = Eigen::ArrayXd::Ones(B);
  auto terms = reconstruction_loss(pred, sigma, comp.alphas, target, rgb_mask, mask, B, w);
  CHECK(terms.total.item() ==
        doctest::Approx(terms.rgb.item() + 1e-3 * terms.sparsity.item() +
                        1e-6 * terms.entropy.item())
            .epsilon(1e-12));
  backward(terms.total);
  CHECK(sigma.grad().isFinite().all());
  CHECK(pred.grad().isFinite().all());
}
