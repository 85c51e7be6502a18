#include <benchmark/benchmark.h>

#include <random>

#include "reperfq/phantom.hpp"
#include "reperfq/phase.hpp"
#include "reperfq/projection.hpp"
#include "reperfq/registration.hpp"
#include "reperfq/segmentation.hpp"

using namespace reperfq;

namespace {

Frame vessel_frame() {
  phantom::PhantomSpec spec;
  spec.jitter_px = 0.0;
  spec.noise_sigma = 0.005;
  const phantom::PhantomOutput out = phantom::generate(spec);
  return out.atlas;
}

void BM_MattesMI(benchmark::State& state) {
  const Frame img = vessel_frame();
  const MIConfig cfg;
  const AffineTransform2D t =
      AffineTransform2D::identity((img.width - 1) / 2.0, (img.height - 1) / 2.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mattes_mi(img, img, t, cfg));
  }
}
BENCHMARK(BM_MattesMI);

void BM_RegisterAffine(benchmark::State& state) {
  const Frame fixed = vessel_frame();
  const Frame moving = warp(fixed, AffineTransform2D::translation(5.0, -3.0));
  const MIConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(register_affine(fixed, moving, cfg));
  }
}
BENCHMARK(BM_RegisterAffine)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_Frangi(benchmark::State& state) {
  const Frame img = vessel_frame();
  const seg::FrangiConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(seg::frangi_vesselness(img, cfg));
  }
}
BENCHMARK(BM_Frangi)->Unit(benchmark::kMillisecond);

void BM_Otsu(benchmark::State& state) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> values(1 << 16);
  for (double& v : values) v = u(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(seg::otsu_threshold(values));
  }
}
BENCHMARK(BM_Otsu);

void BM_Decode(benchmark::State& state) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PhaseProbabilities> probs(64);
  for (auto& p : probs) {
    double total = 0.0;
    for (double& v : p) total += v = u(rng) + 1e-6;
    for (double& v : p) v /= total;
  }
  const auto t = phase::TransitionMatrix::standard();
  for (auto _ : state) {
    benchmark::DoNotOptimize(phase::decode_constrained(probs, t));
  }
}
BENCHMARK(BM_Decode);

void BM_Minip(benchmark::State& state) {
  std::vector<Frame> frames(8, Frame(256, 256, 0.5));
  for (auto _ : state) {
    benchmark::DoNotOptimize(minip(frames));
  }
}
BENCHMARK(BM_Minip);

}  // namespace

BENCHMARK_MAIN();
