#include <benchmark/benchmark.h>

#include <random>

#include "vqashap/metrics.hpp"
#include "vqashap/protocol.hpp"

using namespace vqashap;

namespace {

void BM_ScoreTuple(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  AttributionResult attr;
  attr.layout = ModalityLayout(m / 2, m / 4, m - m / 2 - m / 4);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> dist;
  attr.values.assign(m, std::vector<double>(5));
  for (auto& row : attr.values) {
    for (double& v : row) v = dist(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_tuple(attr, 2, ClassBasis::kFalseMean));
  }
}
BENCHMARK(BM_ScoreTuple)->Arg(30)->Arg(200)->Arg(2000);

void BM_MaskHexRoundTrip(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto mask = MaskVector::from_pattern(0x5a5a5a5a5a5a5a5aull, std::min<std::size_t>(m, 64));
  const MaskVector wide(m, true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(decode_mask_hex(encode_mask_hex(wide), m));
    benchmark::DoNotOptimize(encode_mask_hex(mask));
  }
}
BENCHMARK(BM_MaskHexRoundTrip)->Arg(30)->Arg(300);

}  // namespace
