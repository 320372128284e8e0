#include "fcseg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "fcseg/error.hpp"

namespace fcseg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Relative margin below which two path scores count as tied. Equal paths
// summed in a different order can differ in the last few bits.
constexpr double kTieTolerance = 1e-13;

bool beats(double candidate, double best) {
  if (best == kNegInf) return candidate > best;
  return candidate > best + kTieTolerance * std::max(1.0, std::abs(best));
}

}  // namespace

DecodeResult viterbi(const ScoreMatrix& scores, const DecodingGraph& graph) {
  const int T = static_cast<int>(scores.rows());
  const int G = graph.num_states();
  if (T < 1) throw DomainError("viterbi: no frames");
  for (const auto& state : graph.states()) {
    if (state.subaction >= scores.cols()) {
      throw DomainError("viterbi: score matrix has fewer columns than subactions");
    }
  }
  for (int g = 0; g < G; ++g) {
    if (graph.incoming(g).size() > std::numeric_limits<std::uint16_t>::max()) {
      throw DomainError("viterbi: predecessor fan-in exceeds backpointer width");
    }
  }

  std::vector<double> prev(G, kNegInf), cur(G, kNegInf);
  // Backpointer t*G + g holds the slot of the chosen incoming arc.
  std::vector<std::uint16_t> back(static_cast<std::size_t>(T) * G, 0);
  for (int g : graph.initial()) prev[g] = scores(0, graph.states()[g].subaction);

  for (int t = 1; t < T; ++t) {
    std::uint16_t* bp = back.data() + static_cast<std::size_t>(t) * G;
    for (int g = 0; g < G; ++g) {
      const auto& arcs = graph.incoming(g);
      double best = kNegInf;
      std::uint16_t slot = 0;
      // Ties keep the self-loop, which is always slot 0.
      for (std::size_t i = 0; i < arcs.size(); ++i) {
        const double candidate = prev[arcs[i].from] + arcs[i].log_weight;
        if (beats(candidate, best)) {
          best = candidate;
          slot = static_cast<std::uint16_t>(i);
        }
      }
      bp[g] = slot;
      cur[g] = best == kNegInf ? kNegInf : best + scores(t, graph.states()[g].subaction);
    }
    std::swap(prev, cur);
  }

  int end = -1;
  double best = kNegInf;
  for (int g : graph.accepting_states()) {
    if (beats(prev[g], best)) {
      best = prev[g];
      end = g;
    }
  }
  if (end < 0) throw InfeasibleError("no accepted transcript fits " + std::to_string(T) + " frames");

  DecodeResult result;
  result.score = best;
  result.alignment.states.resize(T);
  result.alignment.instances.resize(T);
  int g = end;
  for (int t = T - 1; t >= 0; --t) {
    result.alignment.states[t] = graph.states()[g].subaction;
    result.alignment.instances[t] = graph.states()[g].depth;
    if (t > 0) g = graph.incoming(g)[back[static_cast<std::size_t>(t) * G + g]].from;
  }
  result.transcript = graph.transcript_at(end);
  return result;
}

AlignResult align(const ScoreMatrix& scores, std::span<const int> transcript,
                  const SubactionSpace& space, const TransitionModel& transitions) {
  if (transcript.empty()) throw DomainError("align: empty transcript");
  const int T = static_cast<int>(scores.rows());
  if (T < space.min_frames(transcript)) {
    throw InfeasibleError(std::to_string(T) + " frames cannot host " +
                          std::to_string(space.min_frames(transcript)) + " subactions");
  }
  TranscriptGrammar single;
  single.add(transcript);
  auto decoded = viterbi(scores, build_graph(single, space, transitions));
  return {std::move(decoded.alignment), decoded.score};
}

DecodeResult decode(const ScoreMatrix& scores, const DecodingGraph& graph) {
  return viterbi(scores, graph);
}

}  // namespace fcseg
