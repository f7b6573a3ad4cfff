#include "manualkit/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace manualkit::kernels {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

void sobel_rows(const cv::Mat& img, cv::Mat& out, int y0, int y1) {
  const int ch = img.channels();
  const int w = img.cols, h = img.rows;
  for (int y = y0; y < y1; ++y) {
    const uchar* r0 = img.ptr<uchar>(clampi(y - 1, 0, h - 1));
    const uchar* r1 = img.ptr<uchar>(y);
    const uchar* r2 = img.ptr<uchar>(clampi(y + 1, 0, h - 1));
    float* o = out.ptr<float>(y);
    for (int x = 0; x < w; ++x) {
      const int xl = clampi(x - 1, 0, w - 1) * ch, xc = x * ch, xr = clampi(x + 1, 0, w - 1) * ch;
      double acc = 0.0;
      for (int c = 0; c < ch; ++c) {
        const int gx = (r0[xr + c] + 2 * r1[xr + c] + r2[xr + c]) - (r0[xl + c] + 2 * r1[xl + c] + r2[xl + c]);
        const int gy = (r2[xl + c] + 2 * r2[xc + c] + r2[xr + c]) - (r0[xl + c] + 2 * r0[xc + c] + r0[xr + c]);
        acc += static_cast<double>(gx) * gx + static_cast<double>(gy) * gy;
      }
      o[x] = static_cast<float>(std::sqrt(acc));
    }
  }
}

std::vector<std::vector<int>> neighbourhoods(const std::vector<cv::Point2d>& pts, double eps, Exec exec) {
  const int n = static_cast<int>(pts.size());
  const double eps2 = eps * eps;
  std::vector<std::vector<int>> nb(n);
  auto fill = [&](int i) {
    for (int j = 0; j < n; ++j) {
      const double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y;
      if (dx * dx + dy * dy <= eps2) nb[i].push_back(j);
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) fill(i);
  } else {
    for (int i = 0; i < n; ++i) fill(i);
  }
  return nb;
}

}  // namespace

cv::Mat sobel_magnitude(const cv::Mat& image, Exec exec) {
  CV_Assert(image.depth() == CV_8U && (image.channels() == 1 || image.channels() == 3));
  cv::Mat out(image.size(), CV_32F);
  if (image.empty()) return out;
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < image.rows; ++y) sobel_rows(image, out, y, y + 1);
  } else {
    sobel_rows(image, out, 0, image.rows);
  }
  return out;
}

std::vector<int> dbscan(const std::vector<cv::Point2d>& points, double eps, int min_pts, Exec exec) {
  const int n = static_cast<int>(points.size());
  const auto nb = neighbourhoods(points, eps, exec);
  std::vector<char> core(n);
  for (int i = 0; i < n; ++i) core[i] = static_cast<int>(nb[i].size()) >= min_pts;

  std::vector<int> label(n, -1);
  int next = 0;
  std::vector<int> frontier;
  for (int i = 0; i < n; ++i) {
    if (!core[i] || label[i] != -1) continue;
    const int id = next++;
    label[i] = id;
    frontier.assign(1, i);
    while (!frontier.empty()) {
      const int p = frontier.back();
      frontier.pop_back();
      for (int q : nb[p]) {
        if (label[q] != -1) continue;  // already in this or an earlier (lower id) cluster
        label[q] = id;
        if (core[q]) frontier.push_back(q);
      }
    }
  }
  return label;
}

std::vector<LabelStats> label_stats(const cv::Mat& labels, int num_labels, Exec exec) {
  CV_Assert(labels.type() == CV_32S);
  auto accumulate = [&](std::vector<LabelStats>& acc, int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      const int* row = labels.ptr<int>(y);
      for (int x = 0; x < labels.cols; ++x) {
        const int l = row[x];
        if (l < 0 || l >= num_labels) continue;
        LabelStats& s = acc[l];
        if (s.count == 0) {
          s.min_x = s.max_x = x;
          s.min_y = s.max_y = y;
        } else {
          s.min_x = std::min(s.min_x, x);
          s.max_x = std::max(s.max_x, x);
          s.min_y = std::min(s.min_y, y);
          s.max_y = std::max(s.max_y, y);
        }
        ++s.count;
        s.sum_x += x;
        s.sum_y += y;
      }
    }
  };
  std::vector<LabelStats> total(std::max(0, num_labels));
  if (exec == Exec::serial) {
    accumulate(total, 0, labels.rows);
    return total;
  }
#pragma omp parallel
  {
    std::vector<LabelStats> local(total.size());
#pragma omp for schedule(static) nowait
    for (int y = 0; y < labels.rows; ++y) accumulate(local, y, y + 1);
#pragma omp critical(manualkit_label_stats)
    for (std::size_t l = 0; l < local.size(); ++l) {
      const LabelStats& s = local[l];
      if (s.count == 0) continue;
      LabelStats& t = total[l];
      if (t.count == 0) {
        t = s;
        continue;
      }
      t.count += s.count;
      t.sum_x += s.sum_x;
      t.sum_y += s.sum_y;
      t.min_x = std::min(t.min_x, s.min_x);
      t.min_y = std::min(t.min_y, s.min_y);
      t.max_x = std::max(t.max_x, s.max_x);
      t.max_y = std::max(t.max_y, s.max_y);
    }
  }
  // Sums of integers below 2^53 are exact, so the merge order does not matter.
  return total;
}

void tint(cv::Mat& bgr, const cv::Mat& labels, const std::vector<cv::Vec3b>& colors, double alpha, Exec exec) {
  CV_Assert(bgr.type() == CV_8UC3 && labels.type() == CV_32S && bgr.size() == labels.size());
  const int k = static_cast<int>(colors.size());
  auto row_op = [&](int y) {
    cv::Vec3b* px = bgr.ptr<cv::Vec3b>(y);
    const int* lab = labels.ptr<int>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      const int l = lab[x];
      if (l < 0 || l >= k) continue;
      for (int c = 0; c < 3; ++c) {
        px[x][c] = cv::saturate_cast<uchar>((1.0 - alpha) * px[x][c] + alpha * colors[l][c]);
      }
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < bgr.rows; ++y) row_op(y);
  } else {
    for (int y = 0; y < bgr.rows; ++y) row_op(y);
  }
}

}  // namespace manualkit::kernels
