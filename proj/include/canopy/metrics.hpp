#pragma once

#include <vector>

#include "canopy/image.hpp"

namespace canopy {

double psnr(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, double peak = 1.0);
inline double psnr(const ImageRgb& a, const ImageRgb& b) { return psnr(a.data, b.data); }

// Mean |a-b| over pixels where mask != 0; 0 if the mask is empty.
double masked_mae(const ImageGray& a, const ImageGray& b, const ImageGray& mask);

using Keypoints2d = std::vector<Eigen::Vector2d>;

// Root mean squared Euclidean distance over matched keypoint pairs.
double keypoint_rmse(const Keypoints2d& pred, const Keypoints2d& gt);
// Fraction of keypoints within threshold_px (<=) of ground truth.
double keypoint_pck(const Keypoints2d& pred, const Keypoints2d& gt, double threshold_px);

double luminance(double r, double g, double b);
Eigen::ArrayXd to_gray(const ImageRgb& img);

// 5-point Laplacian of a grayscale field; border ring is zero.
Eigen::ArrayXd laplacian(const Eigen::ArrayXd& gray, Eigen::Index h, Eigen::Index w);

double pearson(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b);

// Dark-feature detector for rendered cartoon heads: thresholds dark pixels
// inside the mask, groups them by connectivity, and reads off the two eye
// centroids (upper blobs, left/right by column), the mouth centroid (lower
// blob), and the mask centroid as head center. Pixel coordinates are centers
// (col + 0.5, row + 0.5). Throws DataError when fewer than three dark blobs
// are found.
Keypoints2d detect_blob_keypoints(const ImageRgb& img, const ImageGray& mask,
                                  double dark_threshold = 0.45);

struct KeypointMetrics {
  double rmse = 0;  // pixels, over the matched pairs
  double pck = 0;   // fraction within tau * image diagonal
};

// RMSE/PCK over equal-length visible-keypoint lists; the PCK radius is
// tau * sqrt(w^2 + h^2). DataError on length mismatch or empty lists.
KeypointMetrics keypoint_metrics(const Keypoints2d& pred, const Keypoints2d& ref, double tau,
                                 Eigen::Index width, Eigen::Index height);

// How much of one generation's high-frequency detail survives averaging a
// whole batch: Pearson correlation between the Laplacian of the batch mean
// and the Laplacian of the center image. Near 1 when texture sits at the
// same pixels in every image, near 0 when detail moves with the view.
double texture_sticking_correlation(const std::vector<ImageRgb>& images, size_t center);

}  // namespace canopy
