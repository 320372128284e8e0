#include <benchmark/benchmark.h>

#include <random>

#include "fcseg/fine_model.hpp"

namespace {

using namespace fcseg;

FrameMatrix random_video(int frames, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  FrameMatrix video(frames, dim);
  for (Eigen::Index i = 0; i < video.size(); ++i) video.data()[i] = normal(rng);
  return video;
}

void BM_Posteriors(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const GruParams params = GruParams::random(16, hidden, 18, 1);
  const FrameMatrix video = random_video(1000, 16, 2);
  for (auto _ : state) benchmark::DoNotOptimize(posteriors(params, video));
  state.SetItemsProcessed(state.iterations() * video.rows());
}
BENCHMARK(BM_Posteriors)->Arg(16)->Arg(64);

void BM_TrainPass(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const FrameMatrix video = random_video(1000, 16, 3);
  std::vector<int> targets(video.rows());
  for (std::size_t t = 0; t < targets.size(); ++t) targets[t] = static_cast<int>(t * 18 / targets.size());
  const std::vector<Chunk> chunks = make_chunks(video, targets);
  for (auto _ : state) {
    state.PauseTiming();
    GruParams params = GruParams::random(16, hidden, 18, 1);
    state.ResumeTiming();
    benchmark::DoNotOptimize(train_pass(params, chunks, TrainOptions{}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(chunks.size()));
}
BENCHMARK(BM_TrainPass)->Arg(16)->Arg(64);

}  // namespace
