#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fcseg/coarse_model.hpp"
#include "fcseg/corpus.hpp"
#include "fcseg/fine_model.hpp"
#include "fcseg/grammar.hpp"
#include "fcseg/inference.hpp"

namespace fcseg {

inline constexpr const char* kModelFormat = "WAMODEL1";

/// Everything needed to segment or align unseen videos.
struct Model {
  std::vector<std::string> label_set;
  SubactionSpace space;
  GruParams params;
  Eigen::VectorXd prior;
  TransitionModel transitions;
  TranscriptGrammar grammar;

  int action_id(const std::string& label) const;
  std::vector<int> action_ids(const Transcript& transcript) const;
  Transcript labels_of(std::span<const int> actions) const;
  FrameLabels frame_labels(const Alignment& alignment) const;

  /// Log-likelihood scores of every frame for every subaction.
  ScoreMatrix scores(const FrameMatrix& features) const;

  void validate() const;
};

/// Self-describing JSON document tagged with kModelFormat. Matrices are
/// stored row-major with round-trip precision.
std::string to_document(const Model& model);
Model parse_model(const std::string& document);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

struct Segmentation {
  Transcript transcript;
  Alignment alignment;
  FrameLabels frame_labels;
  double score = 0.0;
};

/// Free decoding of one video under the model grammar.
Segmentation segment_video(const Model& model, const FrameMatrix& features);
/// Overload reusing a prebuilt decoding graph.
Segmentation segment_video(const Model& model, const DecodingGraph& graph,
                           const FrameMatrix& features);
/// Forced alignment of one video to a given transcript.
Segmentation align_video(const Model& model, const FrameMatrix& features,
                         const Transcript& transcript);

}  // namespace fcseg
