#include <benchmark/benchmark.h>

#include <vector>

#include "rgi/geometry.hpp"
#include "rgi/ism.hpp"

namespace {

std::vector<double> unit_coeffs(const rgi::RoomModel& room) {
  return std::vector<double>(room.walls.size(), 0.8);
}

void BM_EnumerateImages(benchmark::State& state) {
  const rgi::RoomModel room = rgi::make_shoebox(6.0, 5.0, 3.0);
  const auto coeffs = unit_coeffs(room);
  const int order = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto images = rgi::enumerate_image_sources(room, order, coeffs);
    benchmark::DoNotOptimize(images.data());
  }
}
BENCHMARK(BM_EnumerateImages)->DenseRange(2, 6);

void BM_ValidatePaths(benchmark::State& state) {
  const rgi::RoomModel room = rgi::sample_room(static_cast<rgi::ShapeFamily>(state.range(0)), 7);
  const auto coeffs = unit_coeffs(room);
  const auto images = rgi::enumerate_image_sources(room, 3, coeffs);
  const rgi::Vec3 receiver{0.01, 0.02, 0.03};
  for (auto _ : state) {
    int valid = 0;
    for (const auto& img : images) valid += rgi::validate_path(room, img, receiver);
    benchmark::DoNotOptimize(valid);
  }
  state.counters["images"] = static_cast<double>(images.size());
}
BENCHMARK(BM_ValidatePaths)->DenseRange(0, 3);

void BM_SimulateRir(benchmark::State& state) {
  const rgi::RoomModel room = rgi::sample_room(static_cast<rgi::ShapeFamily>(state.range(0)), 7);
  const auto coeffs = unit_coeffs(room);
  rgi::SimConfig cfg;
  for (auto _ : state) {
    auto rir = rgi::simulate_rir(room, coeffs, cfg);
    benchmark::DoNotOptimize(rir.data());
  }
}
BENCHMARK(BM_SimulateRir)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
