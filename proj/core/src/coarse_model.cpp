#include "fcseg/coarse_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fcseg/error.hpp"

namespace fcseg {

SubactionSpace::SubactionSpace(std::vector<int> counts) : counts_(std::move(counts)) {
  offsets_.reserve(counts_.size());
  int offset = 0;
  for (std::size_t a = 0; a < counts_.size(); ++a) {
    if (counts_[a] < 1) throw DomainError("subaction count must be >= 1");
    offsets_.push_back(offset);
    for (int k = 0; k < counts_[a]; ++k) action_of_.push_back(static_cast<int>(a));
    offset += counts_[a];
  }
}

int SubactionSpace::state(int action, int ordinal) const {
  if (ordinal < 0 || ordinal >= count(action)) throw DomainError("subaction ordinal out of range");
  return offsets_[action] + ordinal;
}

int SubactionSpace::min_frames(std::span<const int> actions) const {
  int total = 0;
  for (int a : actions) total += count(a);
  return total;
}

std::vector<int> frame_actions(const Alignment& alignment, const SubactionSpace& space) {
  std::vector<int> actions;
  actions.reserve(alignment.states.size());
  for (int s : alignment.states) actions.push_back(space.action_of(s));
  return actions;
}

void check_alignment(const Alignment& alignment, std::span<const int> transcript,
                     const SubactionSpace& space) {
  const int T = alignment.num_frames();
  if (T == 0 || alignment.instances.size() != alignment.states.size()) {
    throw DomainError("alignment: empty or inconsistent lengths");
  }
  const int N = static_cast<int>(transcript.size());
  for (int t = 0; t < T; ++t) {
    const int s = alignment.states[t];
    const int n = alignment.instances[t];
    if (s < 0 || s >= space.num_states() || n < 0 || n >= N) {
      throw DomainError("alignment: index out of range at frame " + std::to_string(t));
    }
    if (space.action_of(s) != transcript[n]) {
      throw DomainError("alignment: frame " + std::to_string(t) + " disagrees with transcript");
    }
    const bool starts = t == 0 || alignment.instances[t - 1] != n;
    const bool ends = t == T - 1 || alignment.instances[t + 1] != n;
    if (starts) {
      if (n != (t == 0 ? 0 : alignment.instances[t - 1] + 1) || s != space.first(space.action_of(s))) {
        throw DomainError("alignment: bad instance start at frame " + std::to_string(t));
      }
    } else {
      const int step = s - alignment.states[t - 1];
      if (step != 0 && step != 1) {
        throw DomainError("alignment: non-monotone step at frame " + std::to_string(t));
      }
    }
    if (ends && s != space.last(space.action_of(s))) {
      throw DomainError("alignment: instance ends early at frame " + std::to_string(t));
    }
  }
  if (alignment.instances.back() != N - 1) throw DomainError("alignment: transcript not covered");
}

TransitionModel::TransitionModel(std::vector<double> self_probs) : self_(std::move(self_probs)) {
  for (double p : self_) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("transition probabilities must lie in (0, 1)");
  }
}

double TransitionModel::log_self(int state) const { return std::log(self(state)); }
double TransitionModel::log_advance(int state) const { return std::log1p(-self(state)); }

TransitionModel TransitionModel::uniform(int num_states) {
  return TransitionModel(std::vector<double>(num_states, 0.5));
}

int round_count(double value) {
  return std::max(1, static_cast<int>(std::floor(value + 0.5)));
}

SubactionSpace init_subaction_counts(const Dataset& dataset, int m) {
  if (m < 1) throw DomainError("frames per subaction must be >= 1");
  std::vector<int> instances(dataset.label_set.size(), 0);
  long long frames = 0;
  long long total_instances = 0;
  for (const auto& sample : dataset.samples) {
    frames += sample.num_frames();
    for (int a : dataset.action_ids(sample.transcript)) {
      ++instances[a];
      ++total_instances;
    }
  }
  for (std::size_t a = 0; a < instances.size(); ++a) {
    if (instances[a] == 0) {
      throw DomainError("action '" + dataset.label_set[a] + "' has no training instance");
    }
  }
  const int k = round_count(static_cast<double>(frames) / (static_cast<double>(total_instances) * m));
  return SubactionSpace(std::vector<int>(dataset.label_set.size(), k));
}

namespace {

std::vector<int> even_split(int total, int parts) {
  std::vector<int> out(parts, total / parts);
  for (int i = 0; i < total % parts; ++i) ++out[i];
  return out;
}

}  // namespace

Alignment alignment_from_spans(std::vector<int> spans, std::span<const int> transcript,
                               const SubactionSpace& space) {
  const int N = static_cast<int>(transcript.size());
  if (N == 0 || static_cast<int>(spans.size()) != N) {
    throw DomainError("alignment: need one span per transcript entry");
  }
  const int T = std::accumulate(spans.begin(), spans.end(), 0);
  if (T < space.min_frames(transcript)) {
    throw InfeasibleError(std::to_string(T) + " frames cannot host " +
                          std::to_string(space.min_frames(transcript)) + " subactions");
  }
  // Widen short spans, taking frames from the spans with the most slack
  // (earliest first on ties).
  for (int n = 0; n < N; ++n) {
    while (spans[n] < space.count(transcript[n])) {
      int donor = -1;
      int best_slack = 0;
      for (int j = 0; j < N; ++j) {
        const int slack = spans[j] - space.count(transcript[j]);
        if (slack > best_slack) {
          best_slack = slack;
          donor = j;
        }
      }
      --spans[donor];
      ++spans[n];
    }
  }
  Alignment alignment;
  alignment.states.reserve(T);
  alignment.instances.reserve(T);
  for (int n = 0; n < N; ++n) {
    const int a = transcript[n];
    const auto parts = even_split(spans[n], space.count(a));
    for (int k = 0; k < space.count(a); ++k) {
      for (int i = 0; i < parts[k]; ++i) {
        alignment.states.push_back(space.state(a, k));
        alignment.instances.push_back(n);
      }
    }
  }
  return alignment;
}

Alignment linear_alignment(int num_frames, std::span<const int> transcript,
                           const SubactionSpace& space) {
  if (transcript.empty()) throw DomainError("empty transcript");
  if (num_frames < space.min_frames(transcript)) {
    throw InfeasibleError(std::to_string(num_frames) + " frames cannot host " +
                          std::to_string(space.min_frames(transcript)) + " subactions");
  }
  return alignment_from_spans(even_split(num_frames, static_cast<int>(transcript.size())),
                              transcript, space);
}

InstanceSpans instance_spans(const Alignment& alignment, const SubactionSpace& space) {
  InstanceSpans out;
  for (int t = 0; t < alignment.num_frames(); ++t) {
    if (t == 0 || alignment.instances[t] != alignment.instances[t - 1]) {
      out.actions.push_back(space.action_of(alignment.states[t]));
      out.lengths.push_back(0);
    }
    ++out.lengths.back();
  }
  return out;
}

Alignment redistribute(const Alignment& alignment, const SubactionSpace& from,
                       const SubactionSpace& to) {
  auto spans = instance_spans(alignment, from);
  return alignment_from_spans(std::move(spans.lengths), spans.actions, to);
}

TransitionModel estimate_transitions(std::span<const Alignment> alignments,
                                     const SubactionSpace& space) {
  const int S = space.num_states();
  std::vector<double> stay(S, 0.0), advance(S, 0.0);
  for (const auto& alignment : alignments) {
    for (int t = 1; t < alignment.num_frames(); ++t) {
      if (alignment.instances[t] != alignment.instances[t - 1]) continue;
      const int prev = alignment.states[t - 1];
      const int cur = alignment.states[t];
      if (cur == prev) {
        stay[prev] += 1.0;
      } else if (cur == prev + 1) {
        advance[prev] += 1.0;
      } else {
        throw DomainError("transition estimation: non-monotone alignment");
      }
    }
  }
  std::vector<double> self(S);
  for (int s = 0; s < S; ++s) self[s] = (stay[s] + 1.0) / (stay[s] + advance[s] + 2.0);
  return TransitionModel(std::move(self));
}

Reestimate reestimate_space(std::span<const Alignment> alignments, const SubactionSpace& previous,
                            int m) {
  if (m < 1) throw DomainError("frames per subaction must be >= 1");
  const int A = previous.num_actions();
  std::vector<long long> frames(A, 0), instances(A, 0);
  for (const auto& alignment : alignments) {
    const auto spans = instance_spans(alignment, previous);
    for (std::size_t n = 0; n < spans.actions.size(); ++n) {
      frames[spans.actions[n]] += spans.lengths[n];
      ++instances[spans.actions[n]];
    }
  }
  Reestimate out;
  std::vector<int> counts(A);
  out.mean_lengths.assign(A, 0.0);
  for (int a = 0; a < A; ++a) {
    if (instances[a] == 0 || frames[a] == 0) {
      counts[a] = previous.count(a);
      out.unchanged.push_back(a);
      continue;
    }
    out.mean_lengths[a] = static_cast<double>(frames[a]) / static_cast<double>(instances[a]);
    counts[a] = round_count(out.mean_lengths[a] / m);
  }
  out.space = SubactionSpace(std::move(counts));
  return out;
}

SubactionSpace fit_to_lengths(const SubactionSpace& space,
                              std::span<const std::vector<int>> transcripts,
                              std::span<const int> lengths) {
  std::vector<int> counts = space.counts();
  for (std::size_t v = 0; v < transcripts.size(); ++v) {
    const auto& transcript = transcripts[v];
    auto required = [&] {
      int total = 0;
      for (int a : transcript) total += counts[a];
      return total;
    };
    while (required() > lengths[v]) {
      int victim = -1;
      for (int a : transcript) {
        if (counts[a] > 1 && (victim < 0 || counts[a] > counts[victim])) victim = a;
      }
      if (victim < 0) {
        throw InfeasibleError("video " + std::to_string(v) + " is shorter than its transcript");
      }
      --counts[victim];
    }
  }
  return SubactionSpace(std::move(counts));
}

std::string format_alignment(const Alignment& alignment, const SubactionSpace& space,
                             const std::vector<std::string>& label_set) {
  std::ostringstream os;
  for (int t = 0; t < alignment.num_frames(); ++t) {
    const int s = alignment.states[t];
    os << t << ',' << label_set.at(space.action_of(s)) << ',' << space.ordinal_of(s) + 1 << '\n';
  }
  return os.str();
}

void save_alignment(const std::filesystem::path& path, const Alignment& alignment,
                    const SubactionSpace& space, const std::vector<std::string>& label_set) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << format_alignment(alignment, space, label_set);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<AlignmentRow> parse_alignment_rows(const std::string& text) {
  std::vector<AlignmentRow> rows;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string frame, label, ordinal, extra;
    if (!std::getline(fields, frame, ',') || !std::getline(fields, label, ',') ||
        !std::getline(fields, ordinal, ',') || std::getline(fields, extra, ',')) {
      throw FormatError("alignment row '" + line + "' does not have three fields");
    }
    try {
      std::size_t used = 0;
      AlignmentRow row{std::stoi(frame, &used), label, 0};
      if (used != frame.size()) throw std::invalid_argument(frame);
      row.ordinal = std::stoi(ordinal, &used);
      if (used != ordinal.size()) throw std::invalid_argument(ordinal);
      if (row.frame != static_cast<int>(rows.size()) || row.ordinal < 1) {
        throw FormatError("alignment row '" + line + "' is out of sequence");
      }
      rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw FormatError("alignment row '" + line + "' has a non-integer field");
    }
  }
  return rows;
}

std::vector<AlignmentRow> load_alignment_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_alignment_rows(buffer.str());
}

}  // namespace fcseg
