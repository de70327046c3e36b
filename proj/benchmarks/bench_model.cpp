#include <benchmark/benchmark.h>

#include <vector>

#include "rgi/model.hpp"
#include "rgi/rng.hpp"

namespace {

std::vector<float> random_rir() {
  rgi::Rng rng(42);
  std::vector<float> rir(static_cast<size_t>(rgi::Network::kInChannels) *
                         rgi::Network::kInTaps);
  for (float& v : rir) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return rir;
}

void BM_Forward(benchmark::State& state) {
  rgi::Network net;
  net.init(1);
  const auto rir = random_rir();
  rgi::Workspace ws;
  for (auto _ : state) {
    auto out = net.forward(rir, ws);
    benchmark::DoNotOptimize(out.p_hat.data());
  }
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  rgi::Network net;
  net.init(1);
  const auto rir = random_rir();
  rgi::Workspace ws;
  std::vector<double> grad(rgi::Network::kParamCount);
  std::array<std::array<double, 4>, 8> da{};
  std::array<double, 8> dp{};
  for (auto& row : da) row.fill(0.1);
  dp.fill(0.1);
  for (auto _ : state) {
    net.forward(rir, ws);
    std::fill(grad.begin(), grad.end(), 0.0);
    net.backward(ws, da, dp, grad);
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace
