#include "fcseg/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "fcseg/error.hpp"
#include "fcseg/grammar.hpp"
#include "fcseg/inference.hpp"
#include "parallel.hpp"

namespace fcseg {

void TrainConfig::validate() const {
  if (frames_per_subaction < 1) throw DomainError("m must be >= 1");
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0, 1)");
  if (max_iters < 1) throw DomainError("max_iters must be >= 1");
  if (hidden_dim < 1) throw DomainError("hidden size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw DomainError("learning rate must be > 0");
  }
  if (batch_size < 1 || passes_per_iteration < 1) {
    throw DomainError("batch size and passes per iteration must be >= 1");
  }
}

namespace {

std::vector<std::vector<int>> state_sequences(std::span<const Alignment> alignments) {
  std::vector<std::vector<int>> out;
  out.reserve(alignments.size());
  for (const auto& a : alignments) out.push_back(a.states);
  return out;
}

// Keeps a warm-started output layer meaningful when counts change: the
// j-th of K' new subactions inherits the output unit at the same relative
// position among the K old ones.
void remap_outputs(GruParams& params, const SubactionSpace& from, const SubactionSpace& to) {
  if (from == to) return;
  Eigen::MatrixXd w(params.hidden_dim(), to.num_states());
  Eigen::VectorXd b(to.num_states());
  for (int a = 0; a < to.num_actions(); ++a) {
    for (int j = 0; j < to.count(a); ++j) {
      const int old_ordinal = j * from.count(a) / to.count(a);
      const int src = from.state(a, old_ordinal);
      const int dst = to.state(a, j);
      w.col(dst) = params.w_out.col(src);
      b[dst] = params.b_out[src];
    }
  }
  params.w_out = std::move(w);
  params.b_out = std::move(b);
}

Model snapshot(const TrainerState& state) {
  Model model;
  model.label_set = state.label_set;
  model.space = state.space;
  model.params = state.params;
  model.prior = state.prior;
  model.transitions = state.transitions;
  model.grammar = build_grammar(state.transcripts);
  return model;
}

}  // namespace

TrainerState initialize(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.samples.empty()) throw DomainError("training set is empty");
  TrainerState state;
  state.label_set = dataset.label_set;
  state.space = init_subaction_counts(dataset, config.frames_per_subaction);
  for (const auto& sample : dataset.samples) {
    auto transcript = dataset.action_ids(sample.transcript);
    try {
      state.alignments.push_back(linear_alignment(sample.num_frames(), transcript, state.space));
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("video '" + sample.id + "': " + e.what(), sample.id);
    }
    state.transcripts.push_back(std::move(transcript));
  }
  state.transitions = estimate_transitions(state.alignments, state.space);
  state.prior = estimate_prior(state_sequences(state.alignments), state.space.num_states());
  state.params = GruParams::random(static_cast<int>(dataset.samples.front().features.cols()),
                                   config.hidden_dim, state.space.num_states(), config.seed);
  return state;
}

double action_change_rate(std::span<const Alignment> before, const SubactionSpace& before_space,
                          std::span<const Alignment> after, const SubactionSpace& after_space) {
  if (before.size() != after.size()) throw DomainError("change rate: video count mismatch");
  long long changed = 0;
  long long total = 0;
  for (std::size_t v = 0; v < before.size(); ++v) {
    if (before[v].num_frames() != after[v].num_frames()) {
      throw DomainError("change rate: frame count mismatch");
    }
    for (int t = 0; t < before[v].num_frames(); ++t) {
      changed += before_space.action_of(before[v].states[t]) !=
                 after_space.action_of(after[v].states[t]);
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(changed) / static_cast<double>(total);
}

TrainerState iterate(TrainerState state, const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.samples.size() != state.alignments.size()) {
    throw DomainError("trainer state does not match the dataset");
  }
  ++state.iteration;
  const int V = static_cast<int>(dataset.samples.size());

  // (1) Fit the fine model to the current alignment.
  if (!config.warm_start) {
    state.params = GruParams::random(state.params.input_dim(), config.hidden_dim,
                                     state.space.num_states(),
                                     config.seed + 104729ull * state.iteration);
  }
  std::vector<Chunk> chunks;
  for (int v = 0; v < V; ++v) {
    auto video_chunks = make_chunks(dataset.samples[v].features, state.alignments[v].states);
    chunks.insert(chunks.end(), video_chunks.begin(), video_chunks.end());
  }
  double loss = 0.0;
  for (int pass = 0; pass < config.passes_per_iteration; ++pass) {
    TrainOptions options{config.learning_rate, config.batch_size,
                         config.seed + 7919ull * state.iteration + pass};
    loss = train_pass(state.params, chunks, options);
  }
  state.trained = snapshot(state);
  state.trained_on = state.alignments;

  // (2) Realign every video to its own transcript.
  std::vector<Alignment> realigned(V);
  detail::parallel_for(static_cast<std::size_t>(V), [&](std::size_t v) {
    const auto& sample = dataset.samples[v];
    const ScoreMatrix scores = to_likelihood(posteriors(state.params, sample.features), state.prior);
    try {
      realigned[v] = align(scores, state.transcripts[v], state.space, state.transitions).alignment;
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("video '" + sample.id + "': " + e.what(), sample.id);
    }
  });
  const double change = action_change_rate(state.alignments, state.space, realigned, state.space);

  // (3) + (4) Re-estimate counts and spread the subactions evenly again.
  SubactionSpace next_space = state.space;
  if (config.reestimate) {
    const auto re = reestimate_space(realigned, state.space, config.frames_per_subaction);
    std::vector<int> lengths;
    for (const auto& sample : dataset.samples) lengths.push_back(sample.num_frames());
    next_space = fit_to_lengths(re.space, state.transcripts, lengths);
    for (auto& alignment : realigned) alignment = redistribute(alignment, state.space, next_space);
  }
  state.alignments = std::move(realigned);
  if (config.warm_start) remap_outputs(state.params, state.space, next_space);
  state.space = std::move(next_space);
  state.transitions = estimate_transitions(state.alignments, state.space);
  state.prior = estimate_prior(state_sequences(state.alignments), state.space.num_states());

  // (5) Frame change rate.
  state.change.push_back(change);
  state.log.push_back({state.iteration, loss, change, state.space.counts()});
  return state;
}

bool should_stop(std::span<const double> change, double theta) {
  if (change.size() < 2) return false;
  return std::abs(change[change.size() - 1] - change[change.size() - 2]) < theta;
}

FitResult fit(const Dataset& dataset, const TrainConfig& config, const ProgressCallback& progress) {
  TrainerState state = initialize(dataset, config);
  FitResult result;
  for (int i = 1; i <= config.max_iters; ++i) {
    state = iterate(std::move(state), dataset, config);
    if (i == 1) result.initial_model = *state.trained;
    if (progress) progress(state.log.back());
    if (should_stop(state.change, config.theta)) {
      result.stopped_at = i;
      break;
    }
  }
  // The network trained in the final round was fitted to the alignment of
  // the last iteration before the threshold was crossed.
  result.model = std::move(*state.trained);
  result.train_alignments = std::move(state.trained_on);
  result.log = std::move(state.log);
  return result;
}

std::string format_metrics_csv(std::span<const IterationLog> log) {
  std::ostringstream os;
  os << "iteration,mean_loss,change,counts\n";
  os << std::setprecision(10);
  for (const auto& entry : log) {
    os << entry.iteration << ',' << entry.mean_loss << ',' << entry.change << ',';
    for (std::size_t a = 0; a < entry.counts.size(); ++a) os << (a ? " " : "") << entry.counts[a];
    os << '\n';
  }
  return os.str();
}

std::string format_progress(const IterationLog& entry) {
  std::ostringstream os;
  os << "iteration " << entry.iteration << "  loss " << std::fixed << std::setprecision(4)
     << entry.mean_loss << "  change " << entry.change << "  K [";
  for (std::size_t a = 0; a < entry.counts.size(); ++a) os << (a ? " " : "") << entry.counts[a];
  os << "]";
  return os.str();
}

}  // namespace fcseg
