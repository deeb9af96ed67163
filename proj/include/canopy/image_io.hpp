#pragma once

#include <filesystem>

#include "canopy/image.hpp"

namespace canopy {

// 8-bit RGB PNG; values clamp to [0,1] and quantize to 0..255.
void write_png_rgb(const std::filesystem::path& path, const ImageRgb& img);
ImageRgb read_png_rgb(const std::filesystem::path& path);

// 16-bit grayscale PNG for depth/mask planes. The affine dequantization
// (value = offset + code * scale) lives in a `<file>.png.json` sidecar so
// scene-unit values survive the trip; codes themselves round-trip exactly.
void write_png_gray16(const std::filesystem::path& path, const ImageGray& img);
ImageGray read_png_gray16(const std::filesystem::path& path);

}  // namespace canopy
