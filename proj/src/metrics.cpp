#include "canopy/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace canopy {

double psnr(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, double peak) {
  if (a.size() != b.size() || a.size() == 0) throw ShapeError("psnr: size mismatch");
  const double mse = (a - b).square().mean();
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double masked_mae(const ImageGray& a, const ImageGray& b, const ImageGray& mask) {
  if (a.data.size() != b.data.size() || a.data.size() != mask.data.size())
    throw ShapeError("masked_mae: size mismatch");
  double acc = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < a.data.size(); ++i) {
    if (mask.data[i] == 0.0) continue;
    acc += std::abs(a.data[i] - b.data[i]);
    ++n;
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

double keypoint_rmse(const Keypoints2d& pred, const Keypoints2d& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw ShapeError("keypoint_rmse: need matched non-empty sets");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - gt[i]).squaredNorm();
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

double keypoint_pck(const Keypoints2d& pred, const Keypoints2d& gt, double threshold_px) {
  if (pred.size() != gt.size() || pred.empty())
    throw ShapeError("keypoint_pck: need matched non-empty sets");
  int hits = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    hits += (pred[i] - gt[i]).norm() <= threshold_px;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double luminance(double r, double g, double b) { return 0.2126 * r + 0.7152 * g + 0.0722 * b; }

Eigen::ArrayXd to_gray(const ImageRgb& img) {
  Eigen::ArrayXd out(img.h * img.w);
  for (Eigen::Index i = 0; i < img.h * img.w; ++i)
    out[i] = luminance(img.data[i * 3], img.data[i * 3 + 1], img.data[i * 3 + 2]);
  return out;
}

Eigen::ArrayXd laplacian(const Eigen::ArrayXd& gray, Eigen::Index h, Eigen::Index w) {
  if (gray.size() != h * w) throw ShapeError("laplacian: size mismatch");
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(h * w);
  for (Eigen::Index r = 1; r + 1 < h; ++r)
    for (Eigen::Index c = 1; c + 1 < w; ++c)
      out[r * w + c] = 4.0 * gray[r * w + c] - gray[(r - 1) * w + c] - gray[(r + 1) * w + c] -
                       gray[r * w + c - 1] - gray[r * w + c + 1];
  return out;
}

double pearson(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw ShapeError("pearson: size mismatch");
  const double ma = a.mean(), mb = b.mean();
  const Eigen::ArrayXd da = a - ma, db = b - mb;
  const double denom = std::sqrt(da.square().sum() * db.square().sum());
  if (denom == 0.0) throw NumericError("pearson: zero variance");
  return (da * db).sum() / denom;
}

Keypoints2d detect_blob_keypoints(const ImageRgb& img, const ImageGray& mask,
                                  double dark_threshold) {
  const Eigen::Index h = img.h, w = img.w;
  if (mask.h != h || mask.w != w) throw ShapeError("detect_blob_keypoints: mask size mismatch");
  const Eigen::ArrayXd gray = to_gray(img);

  // connected components (4-neighborhood) of dark foreground pixels
  std::vector<int> label(h * w, -1);
  struct Blob {
    double sum_r = 0, sum_c = 0;
    Eigen::Index n = 0;
  };
  std::vector<Blob> blobs;
  std::vector<Eigen::Index> stack;
  for (Eigen::Index start = 0; start < h * w; ++start) {
    if (label[start] != -1 || mask.data[start] == 0.0 || gray[start] >= dark_threshold) continue;
    const int id = static_cast<int>(blobs.size());
    blobs.emplace_back();
    label[start] = id;
    stack.assign(1, start);
    while (!stack.empty()) {
      const Eigen::Index i = stack.back();
      stack.pop_back();
      const Eigen::Index r = i / w, c = i % w;
      blobs[id].sum_r += static_cast<double>(r) + 0.5;
      blobs[id].sum_c += static_cast<double>(c) + 0.5;
      ++blobs[id].n;
      const Eigen::Index nb[4] = {i - w, i + w, i - 1, i + 1};
      const bool ok[4] = {r > 0, r + 1 < h, c > 0, c + 1 < w};
      for (int k = 0; k < 4; ++k) {
        if (!ok[k] || label[nb[k]] != -1) continue;
        if (mask.data[nb[k]] == 0.0 || gray[nb[k]] >= dark_threshold) continue;
        label[nb[k]] = id;
        stack.push_back(nb[k]);
      }
    }
  }

  std::sort(blobs.begin(), blobs.end(), [](const Blob& a, const Blob& b) { return a.n > b.n; });
  if (blobs.size() < 3) throw DataError("detect_blob_keypoints: found fewer than three features");
  blobs.resize(3);

  std::vector<Eigen::Vector2d> pts;  // (px, py)
  for (const auto& b : blobs)
    pts.emplace_back(b.sum_c / static_cast<double>(b.n), b.sum_r / static_cast<double>(b.n));
  // mouth sits lowest in the image (largest py)
  std::sort(pts.begin(), pts.end(),
            [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.y() < b.y(); });
  Eigen::Vector2d mouth = pts[2];
  Eigen::Vector2d eye_a = pts[0], eye_b = pts[1];
  if (eye_a.x() > eye_b.x()) std::swap(eye_a, eye_b);

  double mr = 0, mc = 0, mn = 0;
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c)
      if (mask.at(r, c) != 0.0) {
        mr += static_cast<double>(r) + 0.5;
        mc += static_cast<double>(c) + 0.5;
        ++mn;
      }
  if (mn == 0) throw DataError("detect_blob_keypoints: empty mask");

  return {eye_a, eye_b, mouth, {mc / mn, mr / mn}};
}

KeypointMetrics keypoint_metrics(const Keypoints2d& pred, const Keypoints2d& ref, double tau,
                                 Eigen::Index width, Eigen::Index height) {
  if (pred.size() != ref.size())
    throw DataError("keypoint_metrics: " + std::to_string(pred.size()) + " predictions vs " +
                    std::to_string(ref.size()) + " references");
  if (pred.empty()) throw DataError("keypoint_metrics: empty keypoint lists");
  const double radius =
      tau * std::sqrt(static_cast<double>(width * width + height * height));
  KeypointMetrics out;
  double sq = 0;
  Eigen::Index hits = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d2 = (pred[i] - ref[i]).squaredNorm();
    sq += d2;
    if (std::sqrt(d2) <= radius) ++hits;
  }
  out.rmse = std::sqrt(sq / static_cast<double>(pred.size()));
  out.pck = static_cast<double>(hits) / static_cast<double>(pred.size());
  return out;
}

double texture_sticking_correlation(const std::vector<ImageRgb>& images, size_t center) {
  if (images.empty()) throw DataError("texture_sticking_correlation: no images");
  if (center >= images.size())
    throw DataError("texture_sticking_correlation: center index out of range");
  const Eigen::Index h = images[0].h, w = images[0].w;
  ImageRgb avg(h, w);
  for (const auto& img : images) {
    if (img.h != h || img.w != w)
      throw DataError("texture_sticking_correlation: image sizes differ");
    avg.data += img.data;
  }
  avg.data /= static_cast<double>(images.size());
  return pearson(laplacian(to_gray(avg), h, w), laplacian(to_gray(images[center]), h, w));
}

}  // namespace canopy
