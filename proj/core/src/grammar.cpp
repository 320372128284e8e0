#include "fcseg/grammar.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "fcseg/error.hpp"

namespace fcseg {

TranscriptGrammar::TranscriptGrammar() : nodes_(1) {}

void TranscriptGrammar::add(std::span<const int> transcript) {
  if (transcript.empty()) throw DomainError("grammar: empty transcript");
  int node = 0;
  for (int action : transcript) {
    if (action < 0) throw DomainError("grammar: negative action id");
    auto it = nodes_[node].children.find(action);
    if (it == nodes_[node].children.end()) {
      Node child;
      child.parent = node;
      child.action = action;
      child.depth = nodes_[node].depth + 1;
      nodes_.push_back(child);
      const int id = static_cast<int>(nodes_.size()) - 1;
      nodes_[node].children.emplace(action, id);
      node = id;
    } else {
      node = it->second;
    }
  }
  nodes_[node].accepting = true;
}

bool TranscriptGrammar::accepts(std::span<const int> transcript) const {
  int node = 0;
  for (int action : transcript) {
    auto it = nodes_[node].children.find(action);
    if (it == nodes_[node].children.end()) return false;
    node = it->second;
  }
  return node != 0 && nodes_[node].accepting;
}

int TranscriptGrammar::num_transcripts() const {
  return static_cast<int>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.accepting; }));
}

std::vector<int> TranscriptGrammar::path_to(int node) const {
  std::vector<int> actions;
  for (int n = node; n > 0; n = nodes_.at(n).parent) actions.push_back(nodes_[n].action);
  std::reverse(actions.begin(), actions.end());
  return actions;
}

std::vector<std::vector<int>> TranscriptGrammar::transcripts() const {
  std::vector<std::vector<int>> out;
  std::function<void(int)> visit = [&](int node) {
    if (nodes_[node].accepting) out.push_back(path_to(node));
    for (const auto& [action, child] : nodes_[node].children) visit(child);
  };
  visit(0);
  return out;
}

int TranscriptGrammar::max_action() const {
  int best = -1;
  for (const auto& node : nodes_) best = std::max(best, node.action);
  return best;
}

TranscriptGrammar build_grammar(std::span<const std::vector<int>> transcripts) {
  TranscriptGrammar grammar;
  for (const auto& transcript : transcripts) grammar.add(transcript);
  return grammar;
}

std::vector<int> DecodingGraph::transcript_at(int state) const {
  return grammar_.path_to(states_.at(state).node);
}

DecodingGraph build_graph(const TranscriptGrammar& grammar, const SubactionSpace& space,
                          const TransitionModel& transitions) {
  if (grammar.max_action() >= space.num_actions()) {
    throw DomainError("grammar uses action " + std::to_string(grammar.max_action()) +
                      " outside the subaction space");
  }
  if (transitions.num_states() != space.num_states()) {
    throw DomainError("transition model does not match the subaction space");
  }
  DecodingGraph graph;
  graph.grammar_ = grammar;
  const auto& nodes = grammar.nodes();
  graph.last_state_of_node_.assign(nodes.size(), -1);

  // Parents are created before children in the prefix tree, so a single
  // pass in node order numbers every predecessor below its successors.
  for (std::size_t id = 1; id < nodes.size(); ++id) {
    const auto& node = nodes[id];
    const int a = node.action;
    for (int k = 0; k < space.count(a); ++k) {
      const int index = graph.num_states();
      const int subaction = space.state(a, k);
      graph.states_.push_back({static_cast<int>(id), a, k, subaction, node.depth - 1});
      std::vector<DecodingGraph::Arc> arcs;
      arcs.push_back({index, transitions.log_self(subaction)});
      if (k > 0) {
        arcs.push_back({index - 1, transitions.log_advance(subaction - 1)});
      } else if (node.parent > 0) {
        const int from = graph.last_state_of_node_[node.parent];
        arcs.push_back({from, transitions.log_advance(graph.states_[from].subaction)});
      } else {
        graph.initial_.push_back(index);
      }
      graph.incoming_.push_back(std::move(arcs));
    }
    graph.last_state_of_node_[id] = graph.num_states() - 1;
  }
  graph.accepting_.assign(graph.states_.size(), 0);
  for (std::size_t id = 1; id < nodes.size(); ++id) {
    if (nodes[id].accepting) {
      const int last = graph.last_state_of_node_[id];
      graph.accepting_[last] = 1;
      graph.accepting_list_.push_back(last);
    }
  }
  std::sort(graph.accepting_list_.begin(), graph.accepting_list_.end());
  return graph;
}

std::vector<int> extract_actions(std::span<const int> states, const SubactionSpace& space) {
  if (states.empty()) throw DomainError("extract_actions: empty alignment");
  std::vector<int> actions;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const int s = states[t];
    if (s < 0 || s >= space.num_states()) throw DomainError("extract_actions: state out of range");
    const int a = space.action_of(s);
    const int k = space.ordinal_of(s);
    if (t == 0) {
      if (k != 0) throw DomainError("extract_actions: alignment must start at a first subaction");
      actions.push_back(a);
      continue;
    }
    const int prev = states[t - 1];
    const int prev_a = space.action_of(prev);
    const bool prev_last = space.is_last(prev);
    if (s == prev || (a == prev_a && s == prev + 1)) continue;
    if (k == 0 && prev_last) {
      actions.push_back(a);
      continue;
    }
    throw DomainError("extract_actions: non-monotone step at frame " + std::to_string(t));
  }
  if (!space.is_last(states.back())) {
    throw DomainError("extract_actions: alignment ends inside an action");
  }
  return actions;
}

}  // namespace fcseg
