#include <benchmark/benchmark.h>

#include "rgi/metrics.hpp"
#include "rgi/rng.hpp"
#include "rgi/training.hpp"

namespace {

void fill_random(rgi::WallRows& a, rgi::SlotVec& p, rgi::Rng& rng) {
  for (auto& row : a)
    for (double& v : row) v = rng.uniform(-1.0, 1.0);
  for (double& v : p) v = rng.uniform(0.05, 0.95);
}

void BM_PitLoss(benchmark::State& state) {
  rgi::Rng rng(3);
  rgi::WallRows a_hat, a_gt;
  rgi::SlotVec p_hat, p_gt;
  fill_random(a_hat, p_hat, rng);
  fill_random(a_gt, p_gt, rng);
  for (auto _ : state) {
    auto breakdown = rgi::pit_total_loss(a_hat, p_hat, a_gt, p_gt);
    benchmark::DoNotOptimize(breakdown.total);
  }
}
BENCHMARK(BM_PitLoss);

void BM_MatchWalls(benchmark::State& state) {
  rgi::Rng rng(5);
  rgi::WallRows a_hat, a_gt;
  rgi::SlotVec p_hat, p_gt;
  fill_random(a_hat, p_hat, rng);
  fill_random(a_gt, p_gt, rng);
  const std::array<bool, 8> mask{true, true, true, true, true, true, true, true};
  for (auto _ : state) {
    auto matching = rgi::match_walls(a_hat, mask, a_gt, 8);
    benchmark::DoNotOptimize(matching.total_cost);
  }
}
BENCHMARK(BM_MatchWalls);

}  // namespace
