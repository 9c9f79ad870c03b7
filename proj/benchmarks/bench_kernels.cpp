#include "m3d/geometry.hpp"
#include "m3d/hungarian.hpp"
#include "m3d/maxpool_nms.hpp"
#include "m3d/memory_bank.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace m3d;

namespace {

Box7 random_box(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> pos(-extent, extent), size(1.0, 5.0), ang(-kPi, kPi);
  return Box7(pos(rng), pos(rng), pos(rng) * 0.1, size(rng), size(rng), size(rng), ang(rng));
}

std::vector<std::pair<Box7, Box7>> overlapping_pairs(int n) {
  std::mt19937_64 rng(1);
  std::vector<std::pair<Box7, Box7>> out;
  for (int i = 0; i < n; ++i) out.emplace_back(random_box(rng, 1.5), random_box(rng, 1.5));
  return out;
}

void BM_IouBev(benchmark::State& state) {
  const auto pairs = overlapping_pairs(1024);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& p = pairs[i++ & 1023];
    benchmark::DoNotOptimize(iou_bev(p.first, p.second));
  }
}
BENCHMARK(BM_IouBev);

void BM_Iou3d(benchmark::State& state) {
  const auto pairs = overlapping_pairs(1024);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& p = pairs[i++ & 1023];
    benchmark::DoNotOptimize(iou_3d(p.first, p.second));
  }
}
BENCHMARK(BM_Iou3d);

void BM_Hungarian(benchmark::State& state) {
  const int g = static_cast<int>(state.range(0)), n = static_cast<int>(state.range(1));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd m(g, n);
  for (int r = 0; r < g; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian_match(m));
}
BENCHMARK(BM_Hungarian)->Args({8, 32})->Args({32, 32})->Args({16, 128})->Args({128, 128});

std::vector<double> random_map(int side) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(static_cast<std::size_t>(side) * side);
  for (auto& v : s) v = u(rng);
  return s;
}

void BM_MaxpoolNms(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto scores = random_map(side);
  for (auto _ : state) benchmark::DoNotOptimize(maxpool_nms(scores, side, side, 7, 128));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_MaxpoolNms)->Arg(64)->Arg(128)->Arg(256)->Arg(448)->Unit(benchmark::kMillisecond);

void BM_SequentialNms(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto scores = random_map(side);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::vector<Box7> boxes;
  for (int i = 0; i < side * side; ++i)
    boxes.emplace_back((i / side + 0.5) * 0.3, (i % side + 0.5) * 0.3, 0.85, 4.7, 2.1, 1.7, ang(rng));
  for (auto _ : state) benchmark::DoNotOptimize(sequential_nms(boxes, scores, 0.5, 128));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_SequentialNms)->Arg(64)->Arg(128)->Arg(256)->Arg(448)->Unit(benchmark::kMillisecond);

void BM_RoiExtraction(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), k = static_cast<int>(state.range(1));
  std::mt19937_64 rng(5);
  BevFeatureMap fmap;
  fmap.height = fmap.width = 128;
  fmap.features = ag::Var::constant(ag::Mat::Random(128 * 128, 64));
  std::vector<Box7> boxes;
  for (int i = 0; i < n; ++i) boxes.push_back(random_box(rng, 15.0));
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(extract_roi_features(fmap, boxes, k).value().data());
}
BENCHMARK(BM_RoiExtraction)->Args({32, 7})->Args({160, 7})->Args({128, 3});

}  // namespace

BENCHMARK_MAIN();
