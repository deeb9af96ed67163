#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "canopy/checkpoint.hpp"
#include "canopy/image_io.hpp"
#include "canopy/rng.hpp"

using namespace canopy;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("canopy-test-" + std::to_string(Rng(std::random_device{}()).index(1u << 30)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("rgb png round trip is exact on the 8-bit lattice") {
  TempDir dir;
  ImageRgb img(9, 7);
  Rng rng(3);
  for (Eigen::Index i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<double>(rng.index(256)) / 255.0;

  const auto path = dir.path / "img.png";
  write_png_rgb(path, img);
  ImageRgb back = read_png_rgb(path);
  REQUIRE(back.h == img.h);
  REQUIRE(back.w == img.w);
  CHECK((back.data - img.data).abs().maxCoeff() == 0.0);
}

TEST_CASE("rgb png write is byte deterministic and clamps out-of-range") {
  TempDir dir;
  ImageRgb img(4, 4);
  img.data.setConstant(0.5);
  img.at(0, 0, 0) = -2.0;
  img.at(0, 0, 1) = 3.0;
  write_png_rgb(dir.path / "a.png", img);
  write_png_rgb(dir.path / "b.png", img);
  CHECK(slurp(dir.path / "a.png") == slurp(dir.path / "b.png"));

  ImageRgb back = read_png_rgb(dir.path / "a.png");
  CHECK(back.at(0, 0, 0) == 0.0);
  CHECK(back.at(0, 0, 1) == 1.0);
}

TEST_CASE("gray16 png keeps scene units to quantization accuracy") {
  TempDir dir;
  ImageGray depth(8, 6);
  Rng rng(5);
  for (Eigen::Index i = 0; i < depth.data.size(); ++i) depth.data[i] = rng.uniform(2.0, 4.5);
  depth.at(0, 0) = 0.0;  // background convention

  const auto path = dir.path / "depth.png";
  write_png_gray16(path, depth);
  CHECK(fs::exists(dir.path / "depth.png.json"));
  ImageGray back = read_png_gray16(path);
  REQUIRE(back.h == depth.h);
  // half a code of the 16-bit range
  const double tol = (4.5 - 0.0) / 65535.0;
  CHECK((back.data - depth.data).abs().maxCoeff() <= tol);

  // second write of the readback reproduces the file exactly: the lattice is
  // a fixed point
  write_png_gray16(dir.path / "again.png", back);
  ImageGray back2 = read_png_gray16(dir.path / "again.png");
  CHECK((back2.data - back.data).abs().maxCoeff() == 0.0);
}

TEST_CASE("constant gray16 plane survives the degenerate scale") {
  TempDir dir;
  ImageGray flat(4, 4);
  flat.data.setConstant(3.25);
  write_png_gray16(dir.path / "flat.png", flat);
  ImageGray back = read_png_gray16(dir.path / "flat.png");
  CHECK((back.data - flat.data).abs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint round trip preserves meta and exact payloads") {
  TempDir dir;
  Checkpoint ckpt;
  ckpt.meta["stage"] = "fit";
  ckpt.meta["config"] = {{"width", 48}, {"lr", 5e-3}};

  Rng rng(7);
  Eigen::ArrayXd a(6);
  for (Eigen::Index i = 0; i < 6; ++i) a[i] = rng.normal();
  ckpt.put("field.0", Tensor::from_array({2, 3}, a));
  ckpt.put("field.1", Tensor::full({4}, -1.5));

  const auto path = dir.path / "model.ckpt";
  save_checkpoint(path, ckpt);
  Checkpoint back = load_checkpoint(path);

  CHECK(back.meta["stage"] == "fit");
  CHECK(back.meta["config"]["width"] == 48);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.get("field.0").shape() == Shape{2, 3});
  CHECK((back.get("field.0").value() - a).abs().maxCoeff() == 0.0);
  CHECK((back.get("field.1").value() + 1.5).abs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(back.get("missing"), DataError);
}

TEST_CASE("checkpoint loading guards names, shapes, and corruption") {
  TempDir dir;
  Checkpoint ckpt;
  ckpt.put("p.0", Tensor::full({3}, 2.0));
  const auto path = dir.path / "m.ckpt";
  save_checkpoint(path, ckpt);

  Tensor live_ok = Tensor::zeros({3}, true);
  load_params(load_checkpoint(path), "p", {live_ok});
  CHECK((live_ok.value() - 2.0).abs().maxCoeff() == 0.0);

  Tensor live_bad = Tensor::zeros({4}, true);
  CHECK_THROWS_AS(load_params(load_checkpoint(path), "p", {live_bad}), ShapeError);
  CHECK_THROWS_AS(load_params(load_checkpoint(path), "q", {live_ok}), DataError);

  // clobber the magic
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("WRONG!!!", 8);
  }
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir.path / "absent.ckpt"), IoError);
}
