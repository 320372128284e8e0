#include <benchmark/benchmark.h>

#include <random>

#include "fcseg/grammar.hpp"
#include "fcseg/inference.hpp"

namespace {

using namespace fcseg;

ScoreMatrix random_scores(int frames, int states, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(-3.0, 1.0);
  ScoreMatrix scores(frames, states);
  for (Eigen::Index i = 0; i < scores.size(); ++i) scores.data()[i] = normal(rng);
  return scores;
}

// Three actions with six subactions each, every ordering of them allowed.
struct Setup {
  SubactionSpace space{std::vector<int>{6, 6, 6}};
  TransitionModel transitions{std::vector<double>(18, 0.9)};
  std::vector<std::vector<int>> transcripts{{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                            {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
};

void BM_Align(benchmark::State& state) {
  const Setup s;
  const ScoreMatrix scores = random_scores(static_cast<int>(state.range(0)), 18, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(align(scores, s.transcripts[0], s.space, s.transitions));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Align)->Arg(500)->Arg(2000)->Arg(8000);

void BM_Decode(benchmark::State& state) {
  const Setup s;
  const DecodingGraph graph = build_graph(build_grammar(s.transcripts), s.space, s.transitions);
  const ScoreMatrix scores = random_scores(static_cast<int>(state.range(0)), 18, 2);
  for (auto _ : state) benchmark::DoNotOptimize(decode(scores, graph));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Decode)->Arg(500)->Arg(2000)->Arg(8000);

}  // namespace
