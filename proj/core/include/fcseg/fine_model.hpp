#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fcseg/corpus.hpp"

namespace fcseg {

/// Frames of left context per chunk; a chunk covers x[t - 20, t].
inline constexpr int kChunkContext = 20;
/// Floor applied to probabilities before taking logarithms.
inline constexpr double kProbabilityFloor = 1e-10;

/// Single-layer GRU with a softmax output layer over all subactions.
///
///   z  = sigmoid(W_z x + U_z h + b_z)
///   r  = sigmoid(W_r x + U_r h + b_r)
///   c  = tanh(W_c x + U_c (r * h) + b_c)
///   h' = z * h + (1 - z) * c
///   p  = softmax(W_out^T h' + b_out)
struct GruParams {
  Eigen::MatrixXd w_update, w_reset, w_cand;  // H x D
  Eigen::MatrixXd u_update, u_reset, u_cand;  // H x H
  Eigen::VectorXd b_update, b_reset, b_cand;  // H
  Eigen::MatrixXd w_out;                      // H x S
  Eigen::VectorXd b_out;                      // S

  int input_dim() const { return static_cast<int>(w_update.cols()); }
  int hidden_dim() const { return static_cast<int>(w_update.rows()); }
  int num_outputs() const { return static_cast<int>(b_out.size()); }
  std::size_t num_parameters() const;

  static GruParams zeros(int input_dim, int hidden_dim, int num_outputs);
  /// Entries uniform in [-scale, scale].
  static GruParams random(int input_dim, int hidden_dim, int num_outputs,
                          std::uint64_t seed, double scale = 0.08);

  /// Throws DomainError on inconsistent shapes or non-finite entries.
  void validate() const;

  /// Calls f(name, tensor) for every parameter tensor in a fixed order.
  template <class F>
  void for_each(F&& f) {
    f("w_update", w_update); f("w_reset", w_reset); f("w_cand", w_cand);
    f("u_update", u_update); f("u_reset", u_reset); f("u_cand", u_cand);
    f("b_update", b_update); f("b_reset", b_reset); f("b_cand", b_cand);
    f("w_out", w_out); f("b_out", b_out);
  }
  template <class F>
  void for_each(F&& f) const {
    f("w_update", w_update); f("w_reset", w_reset); f("w_cand", w_cand);
    f("u_update", u_update); f("u_reset", u_reset); f("u_cand", u_cand);
    f("b_update", b_update); f("b_reset", b_reset); f("b_cand", b_cand);
    f("w_out", w_out); f("b_out", b_out);
  }

  friend bool operator==(const GruParams& a, const GruParams& b);
};

/// Training window ending at frame `last` of `video`. Non-owning: the video
/// must outlive the chunk.
struct Chunk {
  const FrameMatrix* video = nullptr;
  int last = 0;
  int target = 0;

  int first() const { return last >= kChunkContext ? last - kChunkContext : 0; }
  int length() const { return last - first() + 1; }
};

/// One chunk per frame, labeled with `targets[t]`.
std::vector<Chunk> make_chunks(const FrameMatrix& video, std::span<const int> targets);

/// Runs the recurrence over `window` from a zero hidden state and returns
/// the per-frame posteriors (rows sum to one).
Eigen::MatrixXd forward(const GruParams& params, const FrameMatrix& window);

/// Row t is the final output of forward() on the chunk ending at t.
Eigen::MatrixXd posteriors(const GruParams& params, const FrameMatrix& video);

/// Mean final-frame cross-entropy over `chunks`.
double evaluate_loss(const GruParams& params, std::span<const Chunk> chunks);

/// Gradient of the summed final-frame cross-entropy over `chunks`.
GruParams loss_gradient(const GruParams& params, std::span<const Chunk> chunks,
                        double* loss_sum = nullptr);

struct TrainOptions {
  double learning_rate = 0.01;
  int batch_size = 64;
  std::uint64_t seed = 1;
};

/// One shuffled pass of minibatch gradient descent on the mean
/// cross-entropy of each minibatch. Returns the mean loss over all chunks,
/// each measured before its minibatch update. Throws DivergenceError on a
/// non-finite loss.
double train_pass(GruParams& params, std::span<const Chunk> chunks,
                  const TrainOptions& options);

/// Add-one smoothed state frequencies.
Eigen::VectorXd estimate_prior(std::span<const std::vector<int>> labels, int num_states);

/// log(max(p(s|x), floor)) - log p(s).
Eigen::MatrixXd to_likelihood(const Eigen::MatrixXd& posteriors,
                              const Eigen::VectorXd& prior);

}  // namespace fcseg
