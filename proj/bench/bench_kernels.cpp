#include "manualkit/kernels/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace manualkit::kernels;

namespace {

cv::Mat random_image(int w, int h) {
  cv::Mat img(h, w, CV_8UC3);
  cv::randu(img, cv::Scalar::all(0), cv::Scalar::all(255));
  return img;
}

cv::Mat random_labels(int w, int h, int n) {
  cv::Mat labels(h, w, CV_32S);
  cv::randu(labels, cv::Scalar(-1), cv::Scalar(n));
  return labels;
}

std::vector<cv::Point2d> clustered_points(int n) {
  std::mt19937 rng(7);
  std::normal_distribution<double> jitter(0.0, 4.0);
  std::uniform_int_distribution<int> centre(0, 9);
  std::vector<cv::Point2d> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = centre(rng);
    pts.emplace_back(60.0 * c + jitter(rng), 40.0 * (c % 3) + jitter(rng));
  }
  return pts;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void BM_Sobel(benchmark::State& state) {
  const cv::Mat img = random_image(800, 600);
  for (auto _ : state) benchmark::DoNotOptimize(sobel_magnitude(img, exec_of(state)));
}

void BM_Dbscan(benchmark::State& state) {
  const auto pts = clustered_points(2000);
  for (auto _ : state) benchmark::DoNotOptimize(dbscan(pts, 5.0, 4, exec_of(state)));
}

void BM_LabelStats(benchmark::State& state) {
  const cv::Mat labels = random_labels(800, 600, 16);
  for (auto _ : state) benchmark::DoNotOptimize(label_stats(labels, 16, exec_of(state)));
}

void BM_Tint(benchmark::State& state) {
  const cv::Mat base = random_image(800, 600);
  const cv::Mat labels = random_labels(800, 600, 8);
  const std::vector<cv::Vec3b> colors(8, cv::Vec3b(0, 0, 255));
  for (auto _ : state) {
    state.PauseTiming();
    cv::Mat img = base.clone();
    state.ResumeTiming();
    tint(img, labels, colors, 0.4, exec_of(state));
    benchmark::DoNotOptimize(img.data);
  }
}

}  // namespace

// Arg 0 runs the serial reference, 1 the OpenMP path.
BENCHMARK(BM_Sobel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Dbscan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LabelStats)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Tint)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
