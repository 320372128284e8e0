#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "fcseg/coarse_model.hpp"
#include "fcseg/grammar.hpp"

namespace fcseg {

/// Per-frame log observation scores, T x S.
using ScoreMatrix = Eigen::MatrixXd;

struct AlignResult {
  Alignment alignment;
  double score = 0.0;
};

struct DecodeResult {
  std::vector<int> transcript;
  Alignment alignment;
  double score = 0.0;
};

/// Viterbi over a decoding graph. The first frame contributes only its
/// observation score; ties prefer the self-loop, and among accepting end
/// states the lowest state index wins. Scores within a relative 1e-13 of
/// each other count as tied. Throws InfeasibleError if no accepting state
/// is reachable in T frames.
DecodeResult viterbi(const ScoreMatrix& scores, const DecodingGraph& graph);

/// Forced alignment of the frames to one transcript.
AlignResult align(const ScoreMatrix& scores, std::span<const int> transcript,
                  const SubactionSpace& space, const TransitionModel& transitions);

/// Joint transcript and alignment search over every transcript of the graph.
DecodeResult decode(const ScoreMatrix& scores, const DecodingGraph& graph);

}  // namespace fcseg
