#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "manualkit/kernels/kernels.hpp"

#include <opencv2/imgproc.hpp>

#include <map>
#include <numeric>
#include <random>

using namespace manualkit::kernels;

namespace {

// Union-find over core points; clusters ordered by their smallest member
// index; border points join the lowest-numbered adjacent cluster.
std::vector<int> dbscan_oracle(const std::vector<cv::Point2d>& p, double eps, int min_pts) {
  const int n = static_cast<int>(p.size());
  auto close = [&](int i, int j) { return std::hypot(p[i].x - p[j].x, p[i].y - p[j].y) <= eps; };
  std::vector<bool> core(n);
  for (int i = 0; i < n; ++i) {
    int c = 0;
    for (int j = 0; j < n; ++j) c += close(i, j);
    core[i] = c >= min_pts;
  }
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (core[i] && core[j] && close(i, j)) parent[find(i)] = find(j);
    }
  }
  std::map<int, int> root_min;
  for (int i = 0; i < n; ++i) {
    if (!core[i]) continue;
    const int r = find(i);
    if (!root_min.count(r)) root_min[r] = i;
  }
  std::vector<std::pair<int, int>> order;  // (min index, root)
  for (auto [r, m] : root_min) order.emplace_back(m, r);
  std::sort(order.begin(), order.end());
  std::map<int, int> id_of_root;
  for (std::size_t k = 0; k < order.size(); ++k) id_of_root[order[k].second] = static_cast<int>(k);
  std::vector<int> out(n, -1);
  for (int i = 0; i < n; ++i) {
    if (core[i]) {
      out[i] = id_of_root[find(i)];
      continue;
    }
    int best = -1;
    for (int j = 0; j < n; ++j) {
      if (core[j] && close(i, j)) {
        const int id = id_of_root[find(j)];
        if (best == -1 || id < best) best = id;
      }
    }
    out[i] = best;
  }
  return out;
}

cv::Mat random_image(std::mt19937& rng, int type, cv::Size size) {
  cv::Mat m(size, type);
  cv::randu(m, 0, 256);
  (void)rng;
  return m;
}

}  // namespace

TEST_CASE("dbscan examples") {
  std::vector<cv::Point2d> four = {{100, 100}, {120, 100}, {100, 125}, {118, 122}};
  CHECK(dbscan(four, 50, 2) == std::vector<int>{0, 0, 0, 0});
  CHECK(dbscan({{10, 10}}, 50, 2) == std::vector<int>{-1});
  std::vector<cv::Point2d> groups = {{0, 0}, {10, 5}, {500, 0}, {505, 10}, {12, 0}};
  CHECK(dbscan(groups, 50, 2) == std::vector<int>{0, 0, 1, 1, 0});
  CHECK(dbscan({}, 50, 2).empty());
}

TEST_CASE("dbscan border point joins the lower cluster") {
  // min_pts 3: the middle point has only two neighbours besides itself... it is
  // a border point reachable from both dense groups.
  std::vector<cv::Point2d> pts = {{0, 0}, {1, 0}, {2, 0}, {10, 0}, {18, 0}, {19, 0}, {20, 0}};
  const auto labels = dbscan(pts, 8.5, 3);
  CHECK(labels == dbscan_oracle(pts, 8.5, 3));
  CHECK(labels[3] == 0);
}

TEST_CASE("dbscan matches the naive oracle on random point sets") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(0, 50)(rng);
    std::vector<cv::Point2d> pts;
    const int centers = std::uniform_int_distribution<int>(1, 5)(rng);
    std::vector<cv::Point2d> c;
    for (int k = 0; k < centers; ++k) c.emplace_back(std::uniform_real_distribution<double>(0, 800)(rng),
                                                     std::uniform_real_distribution<double>(0, 600)(rng));
    std::normal_distribution<double> jitter(0, 40);
    for (int i = 0; i < n; ++i) {
      const auto& cc = c[std::uniform_int_distribution<int>(0, centers - 1)(rng)];
      pts.emplace_back(cc.x + jitter(rng), cc.y + jitter(rng));
    }
    const double eps = std::uniform_real_distribution<double>(10, 80)(rng);
    const int min_pts = std::uniform_int_distribution<int>(1, 5)(rng);
    const auto expect = dbscan_oracle(pts, eps, min_pts);
    REQUIRE(dbscan(pts, eps, min_pts, Exec::serial) == expect);
    REQUIRE(dbscan(pts, eps, min_pts, Exec::parallel) == expect);
  }
}

TEST_CASE("sobel magnitude: parallel equals serial, both match OpenCV") {
  std::mt19937 rng(1);
  for (int type : {CV_8UC1, CV_8UC3}) {
    const cv::Mat img = random_image(rng, type, {97, 61});
    const cv::Mat a = sobel_magnitude(img, Exec::serial);
    const cv::Mat b = sobel_magnitude(img, Exec::parallel);
    CHECK(cv::norm(a, b, cv::NORM_INF) == 0.0);

    std::vector<cv::Mat> ch;
    cv::split(img, ch);
    cv::Mat acc = cv::Mat::zeros(img.size(), CV_32F);
    for (const auto& c : ch) {
      cv::Mat gx, gy;
      cv::Sobel(c, gx, CV_32F, 1, 0, 3, 1, 0, cv::BORDER_REPLICATE);
      cv::Sobel(c, gy, CV_32F, 0, 1, 3, 1, 0, cv::BORDER_REPLICATE);
      acc += gx.mul(gx) + gy.mul(gy);
    }
    cv::sqrt(acc, acc);
    CHECK(cv::norm(a, acc, cv::NORM_INF) < 1e-2);
  }
}

TEST_CASE("label stats: parallel equals serial and the pixel-mean oracle") {
  std::mt19937 rng(3);
  cv::Mat labels(73, 91, CV_32S);
  for (int y = 0; y < labels.rows; ++y) {
    for (int x = 0; x < labels.cols; ++x) labels.at<int>(y, x) = std::uniform_int_distribution<int>(-2, 4)(rng);
  }
  const auto s = label_stats(labels, 5, Exec::serial);
  const auto p = label_stats(labels, 5, Exec::parallel);
  for (int l = 0; l < 5; ++l) {
    double sx = 0, sy = 0;
    std::int64_t n = 0;
    int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
    for (int y = 0; y < labels.rows; ++y) {
      for (int x = 0; x < labels.cols; ++x) {
        if (labels.at<int>(y, x) != l) continue;
        ++n;
        sx += x;
        sy += y;
        x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x), y1 = std::max(y1, y);
      }
    }
    CHECK(s[l].count == n);
    CHECK(p[l].count == n);
    CHECK(s[l].centroid().x == doctest::Approx(sx / n));
    CHECK(p[l].centroid().y == doctest::Approx(sy / n));
    CHECK(s[l].bbox() == cv::Rect(x0, y0, x1 - x0 + 1, y1 - y0 + 1));
    CHECK(p[l].bbox() == s[l].bbox());
  }
  CHECK(label_stats(labels, 0).empty());
}

TEST_CASE("tint: parallel equals serial, untouched outside labels") {
  std::mt19937 rng(9);
  const cv::Mat base = random_image(rng, CV_8UC3, {64, 48});
  cv::Mat labels(base.size(), CV_32S, cv::Scalar(-1));
  labels(cv::Rect(5, 5, 20, 10)).setTo(0);
  labels(cv::Rect(30, 20, 10, 10)).setTo(1);
  const std::vector<cv::Vec3b> colors = {{255, 0, 0}, {0, 255, 0}};
  cv::Mat a = base.clone(), b = base.clone();
  tint(a, labels, colors, 0.45, Exec::serial);
  tint(b, labels, colors, 0.45, Exec::parallel);
  CHECK(cv::norm(a, b, cv::NORM_INF) == 0.0);
  CHECK(a.at<cv::Vec3b>(0, 0) == base.at<cv::Vec3b>(0, 0));
  const cv::Vec3b orig = base.at<cv::Vec3b>(6, 6);
  CHECK(a.at<cv::Vec3b>(6, 6)[0] == cv::saturate_cast<uchar>(0.55 * orig[0] + 0.45 * 255));
}
