#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fcseg {

/// Per-frame feature vectors, one row per frame (T x D).
using FrameMatrix = Eigen::MatrixXd;

/// Ordered action labels of one video.
using Transcript = std::vector<std::string>;

/// One label per frame.
using FrameLabels = std::vector<std::string>;

/// Video id -> transcript.
using TranscriptTable = std::map<std::string, Transcript>;

struct VideoSample {
  std::string id;
  FrameMatrix features;
  Transcript transcript;
  std::optional<FrameLabels> ground_truth;

  int num_frames() const { return static_cast<int>(features.rows()); }
};

struct Dataset {
  std::vector<VideoSample> samples;
  /// Distinct action labels; the position of a label is its action id.
  std::vector<std::string> label_set;

  /// Index of `label` in label_set; throws DomainError for unknown labels.
  int action_id(const std::string& label) const;
  std::vector<int> action_ids(const Transcript& transcript) const;

  /// Checks every invariant (unique ids, known labels, finite features,
  /// ground truth consistent with transcripts).
  void validate() const;
};

/// Parameters of the synthetic corpus generator.
///
/// Every action class owns `phases_per_class` latent phases with fixed mean
/// vectors. A video concatenates action instances following one of
/// `num_orderings` fixed class permutations; each instance is split evenly
/// across its phases and every frame is the phase mean plus Gaussian noise.
struct SynthConfig {
  int num_classes = 3;
  int num_videos = 20;
  int feature_dim = 16;
  int phases_per_class = 2;
  /// One entry per class, or a single entry shared by all classes.
  std::vector<double> mean_len_per_class = {60.0};
  double len_jitter = 0.2;
  double noise_sigma = 0.5;
  int num_orderings = 3;
  std::uint64_t seed = 1;

  double mean_len(int cls) const;
  void validate() const;
};

/// Separation factor applied to the unit-variance phase means.
inline constexpr double kPhaseMeanScale = 4.0;

Dataset generate_synthetic(const SynthConfig& config);

/// Throws FormatError unless the matrix is non-empty and finite.
void validate_features(const FrameMatrix& features);

// Binary feature file: "FTR1", u32 T, u32 D, T*D float32, all little-endian,
// row-major.
FrameMatrix load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path,
                   const FrameMatrix& features);

// Transcript file: one video per line, "<id> <label> <label> ...".
TranscriptTable load_transcripts(const std::filesystem::path& path);
TranscriptTable parse_transcripts(const std::string& text);
void save_transcripts(const std::filesystem::path& path,
                      const TranscriptTable& table);

// Framewise label file: line t holds the label of frame t.
FrameLabels load_frame_labels(const std::filesystem::path& path);
void save_frame_labels(const std::filesystem::path& path,
                       const FrameLabels& labels);

/// Collapses runs of identical labels, e.g. [a,a,b,b,a] -> [a,b,a].
std::vector<std::string> collapse_runs(const FrameLabels& labels);

/// Sorted distinct labels across all transcripts.
std::vector<std::string> label_set_of(const TranscriptTable& table);

/// Dataset directory layout:
///   DIR/transcripts.txt
///   DIR/features/<id>.ftr
///   DIR/groundtruth/<id>.txt   (optional per video)
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace fcseg
