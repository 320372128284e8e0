#pragma once

#include <map>
#include <span>
#include <vector>

#include "fcseg/coarse_model.hpp"

namespace fcseg {

/// Finite language of training transcripts, stored as a prefix tree over
/// action ids. Node 0 is the root; every other node is reached by one edge
/// labeled with an action.
class TranscriptGrammar {
 public:
  struct Node {
    int parent = -1;
    int action = -1;
    int depth = 0;
    bool accepting = false;
    std::map<int, int> children;  // action -> node
  };

  TranscriptGrammar();

  void add(std::span<const int> transcript);
  bool accepts(std::span<const int> transcript) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_.at(id); }
  int num_transcripts() const;

  /// Actions along the path root -> node.
  std::vector<int> path_to(int node) const;
  /// Every accepted transcript, in depth-first order of the tree.
  std::vector<std::vector<int>> transcripts() const;
  /// Largest action id used, or -1 for an empty grammar.
  int max_action() const;

 private:
  std::vector<Node> nodes_;
};

TranscriptGrammar build_grammar(std::span<const std::vector<int>> transcripts);

/// HMM state graph spanned by a grammar and a subaction space. Each tree
/// edge with action a expands into K_a states; arcs are self-loops,
/// within-action advances, and cross-action advances along tree edges.
class DecodingGraph {
 public:
  struct State {
    int node;       // prefix-tree node whose incoming edge this state belongs to
    int action;
    int ordinal;    // 0-based within the action
    int subaction;  // flat index in the subaction space
    int depth;      // 0-based instance position in the transcript
  };
  struct Arc {
    int from;
    double log_weight;
  };

  const std::vector<State>& states() const { return states_; }
  int num_states() const { return static_cast<int>(states_.size()); }
  /// Incoming arcs; the self-loop is always listed first.
  const std::vector<Arc>& incoming(int state) const { return incoming_.at(state); }
  const std::vector<int>& initial() const { return initial_; }
  bool accepting(int state) const { return accepting_.at(state) != 0; }
  const std::vector<int>& accepting_states() const { return accepting_list_; }
  const TranscriptGrammar& grammar() const { return grammar_; }

  /// Transcript spelled by the tree path ending at `state`.
  std::vector<int> transcript_at(int state) const;

  friend DecodingGraph build_graph(const TranscriptGrammar& grammar,
                                   const SubactionSpace& space,
                                   const TransitionModel& transitions);

 private:
  TranscriptGrammar grammar_;
  std::vector<State> states_;
  std::vector<std::vector<Arc>> incoming_;
  std::vector<int> initial_;
  std::vector<char> accepting_;
  std::vector<int> accepting_list_;
  std::vector<int> last_state_of_node_;
};

/// Throws DomainError if the grammar uses an action outside the space.
DecodingGraph build_graph(const TranscriptGrammar& grammar, const SubactionSpace& space,
                          const TransitionModel& transitions);

/// The extractor: collapses an alignment into the action sequence it
/// induces. A new instance starts when the action changes or when the
/// ordinal drops back to the first subaction from the last one. Actions
/// with a single subaction cannot express an immediate repeat. Throws
/// DomainError on any other non-monotone step.
std::vector<int> extract_actions(std::span<const int> states, const SubactionSpace& space);

}  // namespace fcseg
