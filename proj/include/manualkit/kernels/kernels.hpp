#pragma once

#include <opencv2/core.hpp>

#include <array>
#include <cstdint>
#include <vector>

namespace manualkit::kernels {

/// Execution policy for the data-parallel kernels. `serial` is the
/// reference the OpenMP path is tested against.
enum class Exec { serial, parallel };

/// Per-pixel Sobel gradient magnitude of an 8-bit image (1 or 3 channels).
/// Channels are combined as sqrt(sum over c of gx^2 + gy^2); borders
/// replicate. Output is CV_32F.
cv::Mat sobel_magnitude(const cv::Mat& image, Exec exec = Exec::parallel);

/// Density clustering over 2D points. A point's neighbourhood includes the
/// point itself; a point is core iff its neighbourhood has >= min_pts
/// members. Returns one label per point: cluster ids 0.. in order of the
/// lowest-index core point of each cluster, -1 for noise. Border points
/// reachable from several clusters join the lowest cluster id.
std::vector<int> dbscan(const std::vector<cv::Point2d>& points, double eps, int min_pts, Exec exec = Exec::parallel);

/// Pixel statistics per label of a CV_32S label image; labels outside
/// [0, num_labels) are ignored.
struct LabelStats {
  std::int64_t count = 0;
  double sum_x = 0.0;
  double sum_y = 0.0;
  int min_x = 0, min_y = 0, max_x = -1, max_y = -1;

  cv::Point2d centroid() const { return {sum_x / static_cast<double>(count), sum_y / static_cast<double>(count)}; }
  cv::Rect bbox() const { return count ? cv::Rect(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1) : cv::Rect(); }
};

std::vector<LabelStats> label_stats(const cv::Mat& labels, int num_labels, Exec exec = Exec::parallel);

/// Alpha-blends colors[label] over an 8-bit BGR image wherever the label is
/// in [0, colors.size()).
void tint(cv::Mat& bgr, const cv::Mat& labels, const std::vector<cv::Vec3b>& colors, double alpha,
          Exec exec = Exec::parallel);

}  // namespace manualkit::kernels
