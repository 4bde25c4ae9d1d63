#include <benchmark/benchmark.h>

#include "mr/features.hpp"
#include "mr/kernels.hpp"
#include "mr/taskgen.hpp"

using namespace mr;

namespace {

const Trial& sample() {
  static const Trial t = generate_trial(0, Condition::PerceptualReasoning, 0, 0);
  return t;
}

const AffineTransform& turn() {
  static const AffineTransform t = AffineTransform::rotation(0.3, {99.5, 99.5});
  return t;
}

void BM_warp_serial(benchmark::State& st) {
  const GrayImage& img = sample().panels[0];
  for (auto _ : st) benchmark::DoNotOptimize(serial::warp_affine(img, turn(), img.width(), img.height()));
}

void BM_warp_omp(benchmark::State& st) {
  const GrayImage& img = sample().panels[0];
  for (auto _ : st) benchmark::DoNotOptimize(warp_affine(img, turn(), img.width(), img.height()));
}

void BM_combine_serial(benchmark::State& st) {
  const GrayImage& a = sample().cue_screen;
  for (auto _ : st) benchmark::DoNotOptimize(serial::combine_threshold(a, a, 128, RoundingDirection::Up));
}

void BM_combine_omp(benchmark::State& st) {
  const GrayImage& a = sample().cue_screen;
  for (auto _ : st) benchmark::DoNotOptimize(combine_threshold(a, a, 128, RoundingDirection::Up));
}

void BM_mse_serial(benchmark::State& st) {
  const GrayImage& a = sample().cue_screen;
  const GrayImage b = combine_threshold(a, a, 85, RoundingDirection::Down);
  for (auto _ : st) benchmark::DoNotOptimize(serial::mse(a, b));
}

void BM_mse_omp(benchmark::State& st) {
  const GrayImage& a = sample().cue_screen;
  const GrayImage b = combine_threshold(a, a, 85, RoundingDirection::Down);
  for (auto _ : st) benchmark::DoNotOptimize(mse(a, b));
}

void BM_detect_serial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(serial::detect(sample().panels[0]));
}

void BM_detect_omp(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(detect(sample().panels[0]));
}

void BM_match_serial(benchmark::State& st) {
  const auto fa = detect(sample().panels[0]), fb = detect(sample().panels[1]);
  for (auto _ : st) benchmark::DoNotOptimize(serial::match(fa, fb));
}

void BM_match_omp(benchmark::State& st) {
  const auto fa = detect(sample().panels[0]), fb = detect(sample().panels[1]);
  for (auto _ : st) benchmark::DoNotOptimize(match(fa, fb));
}

}  // namespace

BENCHMARK(BM_warp_serial);
BENCHMARK(BM_warp_omp);
BENCHMARK(BM_combine_serial);
BENCHMARK(BM_combine_omp);
BENCHMARK(BM_mse_serial);
BENCHMARK(BM_mse_omp);
BENCHMARK(BM_detect_serial);
BENCHMARK(BM_detect_omp);
BENCHMARK(BM_match_serial);
BENCHMARK(BM_match_omp);

BENCHMARK_MAIN();
