#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcseg/coarse_model.hpp"
#include "fcseg/corpus.hpp"
#include "fcseg/fine_model.hpp"
#include "fcseg/model.hpp"

namespace fcseg {

/// Stop threshold on the difference of consecutive frame change rates.
inline constexpr double kDefaultStopThreshold = 0.02;

struct TrainConfig {
  int frames_per_subaction = kDefaultFramesPerSubaction;
  double theta = kDefaultStopThreshold;
  int max_iters = 20;
  int hidden_dim = 64;
  double learning_rate = 0.01;
  int batch_size = 64;
  int passes_per_iteration = 2;
  /// Keep training the previous network instead of re-initializing it.
  bool warm_start = true;
  /// Re-estimate subaction counts after every realignment.
  bool reestimate = true;
  std::uint64_t seed = 1;

  void validate() const;
};

struct IterationLog {
  int iteration = 0;
  double mean_loss = 0.0;
  double change = 0.0;
  std::vector<int> counts;
};

struct TrainerState {
  int iteration = 0;
  std::vector<std::string> label_set;
  std::vector<std::vector<int>> transcripts;
  std::vector<Alignment> alignments;
  SubactionSpace space;
  GruParams params;
  Eigen::VectorXd prior;
  TransitionModel transitions;
  std::vector<double> change;
  std::vector<IterationLog> log;
  /// Network trained during the latest iterate() together with the space,
  /// prior, and transitions of the alignment it was trained on.
  std::optional<Model> trained;
  /// Alignment the `trained` network was fitted to.
  std::vector<Alignment> trained_on;
};

/// Linear alignment with a shared initial subaction count. Throws
/// InfeasibleError naming the first video that is too short.
TrainerState initialize(const Dataset& dataset, const TrainConfig& config);

/// One round: train on the current alignment, realign every video to its
/// transcript, record the action-level change rate, re-estimate counts,
/// redistribute subactions, and re-estimate transitions and prior.
TrainerState iterate(TrainerState state, const Dataset& dataset, const TrainConfig& config);

/// True iff at least two change values exist and the last two differ by
/// less than theta.
bool should_stop(std::span<const double> change, double theta);

/// Fraction of frames whose action differs between two alignment sets.
double action_change_rate(std::span<const Alignment> before, const SubactionSpace& before_space,
                          std::span<const Alignment> after, const SubactionSpace& after_space);

struct FitResult {
  /// Model of the last iteration before the stop threshold was crossed.
  Model model;
  /// Training alignment that model was trained on.
  std::vector<Alignment> train_alignments;
  /// Model trained on the initial linear alignment.
  Model initial_model;
  std::vector<IterationLog> log;
  /// Iteration at which should_stop fired, if it did.
  std::optional<int> stopped_at;
};

using ProgressCallback = std::function<void(const IterationLog&)>;

FitResult fit(const Dataset& dataset, const TrainConfig& config,
              const ProgressCallback& progress = {});

/// "iteration,mean_loss,change,counts" header plus one row per iteration;
/// counts are space-separated K_a values.
std::string format_metrics_csv(std::span<const IterationLog> log);
/// Human-readable progress line.
std::string format_progress(const IterationLog& entry);

}  // namespace fcseg
