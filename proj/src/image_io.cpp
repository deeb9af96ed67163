#include "canopy/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <vector>

#include <json.hpp>

namespace canopy {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

unsigned char quantize8(double v) {
  const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<unsigned char>(c * 255.0 + 0.5);
}

// libpng reports errors through longjmp; wrap each call sequence in a scope
// that turns them into exceptions once control returns.
struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;

  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) throw IoError("libpng writer allocation failed");
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;

  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) throw IoError("libpng reader allocation failed");
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

void write_png_rgb(const std::filesystem::path& path, const ImageRgb& img) {
  if (img.h <= 0 || img.w <= 0) throw ContractError("write_png_rgb: empty image");
  std::vector<unsigned char> bytes(static_cast<size_t>(img.h * img.w * 3));
  for (Eigen::Index i = 0; i < img.data.size(); ++i) bytes[i] = quantize8(img.data[i]);
  std::vector<png_bytep> rows(static_cast<size_t>(img.h));
  for (Eigen::Index r = 0; r < img.h; ++r) rows[r] = bytes.data() + r * img.w * 3;

  auto file = open_file(path, "wb");
  PngWriter w;
  if (setjmp(png_jmpbuf(w.png))) throw IoError("png write failed: " + path.string());
  png_init_io(w.png, file.get());
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

ImageRgb read_png_rgb(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  PngReader r;
  if (setjmp(png_jmpbuf(r.png))) throw IoError("png read failed: " + path.string());
  png_init_io(r.png, file.get());
  png_read_info(r.png, r.info);
  if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_RGB ||
      png_get_bit_depth(r.png, r.info) != 8)
    throw IoError("expected 8-bit RGB png: " + path.string());

  ImageRgb img(png_get_image_height(r.png, r.info), png_get_image_width(r.png, r.info));
  std::vector<unsigned char> bytes(static_cast<size_t>(img.h * img.w * 3));
  std::vector<png_bytep> rows(static_cast<size_t>(img.h));
  for (Eigen::Index i = 0; i < img.h; ++i) rows[i] = bytes.data() + i * img.w * 3;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

void write_png_gray16(const std::filesystem::path& path, const ImageGray& img) {
  if (img.h <= 0 || img.w <= 0) throw ContractError("write_png_gray16: empty image");
  const double lo = img.data.minCoeff();
  const double hi = img.data.maxCoeff();
  const double scale = hi > lo ? (hi - lo) / 65535.0 : 1.0;

  std::vector<png_uint_16> codes(static_cast<size_t>(img.h * img.w));
  for (Eigen::Index i = 0; i < img.data.size(); ++i)
    codes[i] = static_cast<png_uint_16>((img.data[i] - lo) / scale + 0.5);
  std::vector<png_bytep> rows(static_cast<size_t>(img.h));
  for (Eigen::Index r = 0; r < img.h; ++r)
    rows[r] = reinterpret_cast<png_bytep>(codes.data() + r * img.w);

  auto file = open_file(path, "wb");
  PngWriter w;
  if (setjmp(png_jmpbuf(w.png))) throw IoError("png write failed: " + path.string());
  png_init_io(w.png, file.get());
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h),
               16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_set_swap(w.png);  // codes are little-endian in memory
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);

  nlohmann::json meta = {{"scale", scale}, {"offset", lo}};
  std::ofstream side(sidecar_path(path));
  if (!side) throw IoError("cannot write " + sidecar_path(path).string());
  side << meta.dump(2) << "\n";
}

ImageGray read_png_gray16(const std::filesystem::path& path) {
  std::ifstream side(sidecar_path(path));
  if (!side) throw IoError("missing sidecar " + sidecar_path(path).string());
  const auto meta = nlohmann::json::parse(side);
  const double scale = meta.at("scale").get<double>();
  const double offset = meta.at("offset").get<double>();

  auto file = open_file(path, "rb");
  PngReader r;
  if (setjmp(png_jmpbuf(r.png))) throw IoError("png read failed: " + path.string());
  png_init_io(r.png, file.get());
  png_read_info(r.png, r.info);
  if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(r.png, r.info) != 16)
    throw IoError("expected 16-bit gray png: " + path.string());

  ImageGray img(png_get_image_height(r.png, r.info), png_get_image_width(r.png, r.info));
  std::vector<png_uint_16> codes(static_cast<size_t>(img.h * img.w));
  std::vector<png_bytep> rows(static_cast<size_t>(img.h));
  for (Eigen::Index i = 0; i < img.h; ++i)
    rows[i] = reinterpret_cast<png_bytep>(codes.data() + i * img.w);
  png_set_swap(r.png);
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data[i] = offset + codes[i] * scale;
  return img;
}

}  // namespace canopy
