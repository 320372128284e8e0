#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fcseg/corpus.hpp"

namespace fcseg {

/// Frames each subaction should cover on average.
inline constexpr int kDefaultFramesPerSubaction = 10;

/// Per-action subaction counts K_a with a flat, contiguous state index:
/// the states of action a are first(a) .. first(a) + K_a - 1, in order.
class SubactionSpace {
 public:
  SubactionSpace() = default;
  explicit SubactionSpace(std::vector<int> counts);

  int num_actions() const { return static_cast<int>(counts_.size()); }
  int num_states() const { return static_cast<int>(action_of_.size()); }

  int count(int action) const { return counts_.at(action); }
  int first(int action) const { return offsets_.at(action); }
  int last(int action) const { return offsets_.at(action) + counts_.at(action) - 1; }
  /// Flat index of the `ordinal`-th (0-based) subaction of `action`.
  int state(int action, int ordinal) const;
  int action_of(int state) const { return action_of_.at(state); }
  int ordinal_of(int state) const { return state - offsets_.at(action_of_.at(state)); }
  bool is_last(int state) const { return ordinal_of(state) == count(action_of(state)) - 1; }

  const std::vector<int>& counts() const { return counts_; }

  /// Minimum number of frames needed to traverse every subaction of the
  /// given action sequence.
  int min_frames(std::span<const int> actions) const;

  friend bool operator==(const SubactionSpace&, const SubactionSpace&) = default;

 private:
  std::vector<int> counts_;
  std::vector<int> offsets_;
  std::vector<int> action_of_;
};

/// Frame-to-subaction assignment s(t) together with the action-instance
/// index n(t) of every frame (0-based position in the transcript).
struct Alignment {
  std::vector<int> states;
  std::vector<int> instances;

  int num_frames() const { return static_cast<int>(states.size()); }
  friend bool operator==(const Alignment&, const Alignment&) = default;
};

/// Action id of every frame.
std::vector<int> frame_actions(const Alignment& alignment,
                               const SubactionSpace& space);

/// Verifies the alignment invariants against `transcript`: instances run
/// 0..N-1 contiguously, each instance starts at the first and ends at the
/// last subaction of its action, and steps are 0 or +1. Throws DomainError.
void check_alignment(const Alignment& alignment, std::span<const int> transcript,
                     const SubactionSpace& space);

/// Left-to-right transition probabilities: every state either stays or
/// advances to its successor.
class TransitionModel {
 public:
  TransitionModel() = default;
  explicit TransitionModel(std::vector<double> self_probs);

  int num_states() const { return static_cast<int>(self_.size()); }
  double self(int state) const { return self_.at(state); }
  double advance(int state) const { return 1.0 - self_.at(state); }
  double log_self(int state) const;
  double log_advance(int state) const;
  const std::vector<double>& self_probs() const { return self_; }

  /// Uniform stay/advance probability 0.5 for every state.
  static TransitionModel uniform(int num_states);

 private:
  std::vector<double> self_;
};

/// Uniform initial count per action from corpus-wide frames / (instances * m),
/// round-half-up with a floor of 1. Throws DomainError if some action of the
/// label set never occurs.
SubactionSpace init_subaction_counts(const Dataset& dataset, int m);

/// Splits `num_frames` frames into contiguous spans for the transcript and
/// each span across its action's subactions; remainders go to the earliest
/// parts. Throws InfeasibleError if num_frames < min_frames(transcript).
Alignment linear_alignment(int num_frames, std::span<const int> transcript,
                           const SubactionSpace& space);

/// Builds an alignment from explicit instance span lengths, distributing
/// each span evenly across its action's subactions. Spans shorter than
/// their action's count are widened by borrowing frames from the spans
/// with the most slack.
Alignment alignment_from_spans(std::vector<int> spans, std::span<const int> transcript,
                               const SubactionSpace& space);

/// Instance span lengths and instance actions of an alignment.
struct InstanceSpans {
  std::vector<int> actions;
  std::vector<int> lengths;
};
InstanceSpans instance_spans(const Alignment& alignment, const SubactionSpace& space);

/// Re-splits every instance of `alignment` (expressed in `from`) evenly
/// across the subactions of `to`.
Alignment redistribute(const Alignment& alignment, const SubactionSpace& from,
                       const SubactionSpace& to);

/// Add-one smoothed self/advance frequencies over consecutive frame pairs
/// inside action instances.
TransitionModel estimate_transitions(std::span<const Alignment> alignments,
                                     const SubactionSpace& space);

struct Reestimate {
  SubactionSpace space;
  /// Mean aligned length per action (0 for actions without frames).
  std::vector<double> mean_lengths;
  /// Actions that kept their previous count because nothing aligned to them.
  std::vector<int> unchanged;
};

/// New K_a = max(1, round(len(a) / m)) with len(a) = aligned frames of a
/// over instances of a.
Reestimate reestimate_space(std::span<const Alignment> alignments,
                            const SubactionSpace& previous, int m);

/// Lowers counts until every transcript fits its video length:
/// repeatedly decrements the largest count of an offending transcript.
SubactionSpace fit_to_lengths(const SubactionSpace& space,
                              std::span<const std::vector<int>> transcripts,
                              std::span<const int> lengths);

/// Round-half-up with a floor of 1.
int round_count(double value);

// Alignment file: one "frame,label,ordinal" line per frame, ordinal 1-based.
void save_alignment(const std::filesystem::path& path, const Alignment& alignment,
                    const SubactionSpace& space,
                    const std::vector<std::string>& label_set);
std::string format_alignment(const Alignment& alignment, const SubactionSpace& space,
                             const std::vector<std::string>& label_set);

struct AlignmentRow {
  int frame;
  std::string label;
  int ordinal;  // 1-based
};
std::vector<AlignmentRow> load_alignment_rows(const std::filesystem::path& path);
std::vector<AlignmentRow> parse_alignment_rows(const std::string& text);

}  // namespace fcseg
