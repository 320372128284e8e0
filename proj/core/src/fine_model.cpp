#include "fcseg/fine_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fcseg/error.hpp"

namespace fcseg {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

std::size_t GruParams::num_parameters() const {
  std::size_t total = 0;
  for_each([&](const char*, const auto& tensor) { total += static_cast<std::size_t>(tensor.size()); });
  return total;
}

GruParams GruParams::zeros(int input_dim, int hidden_dim, int num_outputs) {
  if (input_dim < 1 || hidden_dim < 1 || num_outputs < 1) {
    throw DomainError("GRU dimensions must be >= 1");
  }
  GruParams p;
  p.w_update = p.w_reset = p.w_cand = MatrixXd::Zero(hidden_dim, input_dim);
  p.u_update = p.u_reset = p.u_cand = MatrixXd::Zero(hidden_dim, hidden_dim);
  p.b_update = p.b_reset = p.b_cand = VectorXd::Zero(hidden_dim);
  p.w_out = MatrixXd::Zero(hidden_dim, num_outputs);
  p.b_out = VectorXd::Zero(num_outputs);
  return p;
}

GruParams GruParams::random(int input_dim, int hidden_dim, int num_outputs, std::uint64_t seed,
                            double scale) {
  GruParams p = zeros(input_dim, hidden_dim, num_outputs);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  p.for_each([&](const char*, auto& tensor) {
    for (Eigen::Index i = 0; i < tensor.size(); ++i) tensor.data()[i] = dist(rng);
  });
  return p;
}

void GruParams::validate() const {
  const auto H = w_update.rows();
  const auto D = w_update.cols();
  const auto S = b_out.size();
  auto shape_ok = [&](const MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
    return m.rows() == rows && m.cols() == cols;
  };
  const bool ok = H > 0 && D > 0 && S > 0 && shape_ok(w_reset, H, D) && shape_ok(w_cand, H, D) &&
                  shape_ok(u_update, H, H) && shape_ok(u_reset, H, H) && shape_ok(u_cand, H, H) &&
                  b_update.size() == H && b_reset.size() == H && b_cand.size() == H &&
                  shape_ok(w_out, H, S);
  if (!ok) throw DomainError("GRU parameter shapes are inconsistent");
  for_each([](const char* name, const auto& tensor) {
    if (!tensor.allFinite()) throw DomainError(std::string("GRU parameter ") + name + " is not finite");
  });
}

bool operator==(const GruParams& a, const GruParams& b) {
  return a.w_update == b.w_update && a.w_reset == b.w_reset && a.w_cand == b.w_cand &&
         a.u_update == b.u_update && a.u_reset == b.u_reset && a.u_cand == b.u_cand &&
         a.b_update == b.b_update && a.b_reset == b.b_reset && a.b_cand == b.b_cand &&
         a.w_out == b.w_out && a.b_out == b.b_out;
}

std::vector<Chunk> make_chunks(const FrameMatrix& video, std::span<const int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != video.rows()) {
    throw DomainError("make_chunks: one target per frame required");
  }
  std::vector<Chunk> chunks;
  chunks.reserve(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    chunks.push_back({&video, static_cast<int>(t), targets[t]});
  }
  return chunks;
}

namespace {

// Chunks of one minibatch, right-aligned so that every chunk ends at the
// final step. Columns are inactive (mask 0) before their chunk starts.
struct Batch {
  int steps = 0;
  std::vector<MatrixXd> inputs;     // per step, D x B
  std::vector<RowVectorXd> masks;   // per step, 1 x B
};

Batch gather(std::span<const Chunk> chunks, int input_dim) {
  Batch batch;
  const int B = static_cast<int>(chunks.size());
  for (const auto& chunk : chunks) batch.steps = std::max(batch.steps, chunk.length());
  batch.inputs.assign(batch.steps, MatrixXd::Zero(input_dim, B));
  batch.masks.assign(batch.steps, RowVectorXd::Zero(B));
  for (int b = 0; b < B; ++b) {
    const Chunk& chunk = chunks[b];
    if (chunk.video == nullptr || chunk.video->cols() != input_dim) {
      throw DomainError("chunk feature dimension does not match the network");
    }
    if (chunk.last < 0 || chunk.last >= chunk.video->rows()) {
      throw DomainError("chunk end lies outside its video");
    }
    const int offset = batch.steps - chunk.length();
    for (int k = offset; k < batch.steps; ++k) {
      batch.inputs[k].col(b) = chunk.video->row(chunk.first() + k - offset).transpose();
      batch.masks[k](b) = 1.0;
    }
  }
  return batch;
}

MatrixXd sigmoid(const MatrixXd& x) {
  return (1.0 + (-x.array()).exp()).inverse().matrix();
}

struct StepCache {
  MatrixXd hidden_in, update, reset, cand;
};

struct GruStep {
  MatrixXd update, reset, cand, hidden;
};

GruStep step(const GruParams& p, const MatrixXd& x, const MatrixXd& h) {
  GruStep s;
  s.update = sigmoid((p.w_update * x + p.u_update * h).colwise() + p.b_update);
  s.reset = sigmoid((p.w_reset * x + p.u_reset * h).colwise() + p.b_reset);
  const MatrixXd gated = s.reset.cwiseProduct(h);
  s.cand = ((p.w_cand * x + p.u_cand * gated).colwise() + p.b_cand).array().tanh().matrix();
  s.hidden = (s.update.array() * h.array() + (1.0 - s.update.array()) * s.cand.array()).matrix();
  return s;
}

MatrixXd run(const GruParams& p, const Batch& batch, std::vector<StepCache>* cache) {
  const Eigen::Index B = batch.inputs.empty() ? 0 : batch.inputs.front().cols();
  MatrixXd h = MatrixXd::Zero(p.hidden_dim(), B);
  if (cache) cache->resize(batch.steps);
  for (int k = 0; k < batch.steps; ++k) {
    GruStep s = step(p, batch.inputs[k], h);
    MatrixXd next = (s.hidden.array().rowwise() * batch.masks[k].array()).matrix();
    if (cache) (*cache)[k] = {std::move(h), std::move(s.update), std::move(s.reset), std::move(s.cand)};
    h = std::move(next);
  }
  return h;
}

// Column-wise softmax of W_out^T h + b_out.
MatrixXd softmax_output(const GruParams& p, const MatrixXd& h) {
  MatrixXd logits = (p.w_out.transpose() * h).colwise() + p.b_out;
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    auto col = logits.col(b);
    col.array() = (col.array() - col.maxCoeff()).exp();
    col /= col.sum();
  }
  return logits;
}

void check_dims(const GruParams& params, const FrameMatrix& frames) {
  if (frames.rows() < 1) throw DomainError("empty frame window");
  if (frames.cols() != params.input_dim()) {
    throw DomainError("feature dimension " + std::to_string(frames.cols()) +
                      " does not match network input " + std::to_string(params.input_dim()));
  }
}

double log_prob(const MatrixXd& probs, Eigen::Index b, int target) {
  return std::log(std::max(probs(target, b), std::numeric_limits<double>::min()));
}

}  // namespace

MatrixXd forward(const GruParams& params, const FrameMatrix& window) {
  check_dims(params, window);
  const int L = static_cast<int>(window.rows());
  MatrixXd out(L, params.num_outputs());
  MatrixXd h = MatrixXd::Zero(params.hidden_dim(), 1);
  for (int t = 0; t < L; ++t) {
    h = step(params, window.row(t).transpose(), h).hidden;
    out.row(t) = softmax_output(params, h).transpose();
  }
  return out;
}

MatrixXd posteriors(const GruParams& params, const FrameMatrix& video) {
  check_dims(params, video);
  const int T = static_cast<int>(video.rows());
  MatrixXd out(T, params.num_outputs());
  constexpr int kBlock = 512;
  std::vector<Chunk> chunks;
  for (int begin = 0; begin < T; begin += kBlock) {
    const int end = std::min(T, begin + kBlock);
    chunks.clear();
    for (int t = begin; t < end; ++t) chunks.push_back({&video, t, 0});
    const MatrixXd h = run(params, gather(chunks, params.input_dim()), nullptr);
    out.middleRows(begin, end - begin) = softmax_output(params, h).transpose();
  }
  return out;
}

double evaluate_loss(const GruParams& params, std::span<const Chunk> chunks) {
  if (chunks.empty()) throw DomainError("evaluate_loss: no chunks");
  const MatrixXd h = run(params, gather(chunks, params.input_dim()), nullptr);
  const MatrixXd probs = softmax_output(params, h);
  double total = 0.0;
  for (std::size_t b = 0; b < chunks.size(); ++b) {
    total -= log_prob(probs, static_cast<Eigen::Index>(b), chunks[b].target);
  }
  return total / static_cast<double>(chunks.size());
}

GruParams loss_gradient(const GruParams& p, std::span<const Chunk> chunks, double* loss_sum) {
  if (chunks.empty()) throw DomainError("loss_gradient: no chunks");
  const int S = p.num_outputs();
  for (const auto& chunk : chunks) {
    if (chunk.target < 0 || chunk.target >= S) throw DomainError("chunk target out of range");
  }
  const Batch batch = gather(chunks, p.input_dim());
  std::vector<StepCache> cache;
  const MatrixXd h_final = run(p, batch, &cache);
  const MatrixXd probs = softmax_output(p, h_final);

  double loss = 0.0;
  MatrixXd d_logits = probs;
  for (std::size_t b = 0; b < chunks.size(); ++b) {
    const auto col = static_cast<Eigen::Index>(b);
    loss -= log_prob(probs, col, chunks[b].target);
    d_logits(chunks[b].target, col) -= 1.0;
  }
  if (loss_sum) *loss_sum = loss;

  GruParams g = GruParams::zeros(p.input_dim(), p.hidden_dim(), S);
  g.w_out = h_final * d_logits.transpose();
  g.b_out = d_logits.rowwise().sum();
  MatrixXd d_h = p.w_out * d_logits;

  for (int k = batch.steps - 1; k >= 0; --k) {
    const StepCache& c = cache[k];
    const MatrixXd& x = batch.inputs[k];
    const MatrixXd d_next = (d_h.array().rowwise() * batch.masks[k].array()).matrix();

    const MatrixXd d_update = d_next.cwiseProduct(c.hidden_in - c.cand);
    const MatrixXd d_cand = d_next.cwiseProduct((1.0 - c.update.array()).matrix());
    MatrixXd d_prev = d_next.cwiseProduct(c.update);

    const MatrixXd a_cand = d_cand.cwiseProduct((1.0 - c.cand.array().square()).matrix());
    const MatrixXd gated = c.reset.cwiseProduct(c.hidden_in);
    g.w_cand += a_cand * x.transpose();
    g.u_cand += a_cand * gated.transpose();
    g.b_cand += a_cand.rowwise().sum();
    const MatrixXd d_gated = p.u_cand.transpose() * a_cand;
    const MatrixXd d_reset = d_gated.cwiseProduct(c.hidden_in);
    d_prev += d_gated.cwiseProduct(c.reset);

    const MatrixXd a_reset =
        (d_reset.array() * c.reset.array() * (1.0 - c.reset.array())).matrix();
    g.w_reset += a_reset * x.transpose();
    g.u_reset += a_reset * c.hidden_in.transpose();
    g.b_reset += a_reset.rowwise().sum();
    d_prev += p.u_reset.transpose() * a_reset;

    const MatrixXd a_update =
        (d_update.array() * c.update.array() * (1.0 - c.update.array())).matrix();
    g.w_update += a_update * x.transpose();
    g.u_update += a_update * c.hidden_in.transpose();
    g.b_update += a_update.rowwise().sum();
    d_prev += p.u_update.transpose() * a_update;

    d_h = std::move(d_prev);
  }
  return g;
}

double train_pass(GruParams& params, std::span<const Chunk> chunks, const TrainOptions& options) {
  if (chunks.empty()) throw DomainError("train_pass: no chunks");
  if (!(options.learning_rate >= 0.0) || options.batch_size < 1) {
    throw DomainError("train_pass: invalid learning rate or batch size");
  }
  std::vector<std::size_t> order(chunks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);

  double total = 0.0;
  std::vector<Chunk> batch;
  for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
    const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(options.batch_size));
    batch.clear();
    for (std::size_t i = begin; i < end; ++i) batch.push_back(chunks[order[i]]);
    double loss = 0.0;
    const GruParams grad = loss_gradient(params, batch, &loss);
    if (!std::isfinite(loss)) throw DivergenceError("training loss became non-finite");
    total += loss;
    if (options.learning_rate > 0.0) {
      const double step = options.learning_rate / static_cast<double>(batch.size());
      auto apply = [&](auto& tensor, const auto& gradient) { tensor -= step * gradient; };
      apply(params.w_update, grad.w_update);
      apply(params.w_reset, grad.w_reset);
      apply(params.w_cand, grad.w_cand);
      apply(params.u_update, grad.u_update);
      apply(params.u_reset, grad.u_reset);
      apply(params.u_cand, grad.u_cand);
      apply(params.b_update, grad.b_update);
      apply(params.b_reset, grad.b_reset);
      apply(params.b_cand, grad.b_cand);
      apply(params.w_out, grad.w_out);
      apply(params.b_out, grad.b_out);
    }
  }
  return total / static_cast<double>(chunks.size());
}

VectorXd estimate_prior(std::span<const std::vector<int>> labels, int num_states) {
  if (num_states < 1) throw DomainError("estimate_prior: no states");
  if (labels.empty()) throw DomainError("estimate_prior: no labels");
  VectorXd counts = VectorXd::Ones(num_states);
  double total = num_states;
  for (const auto& sequence : labels) {
    for (int s : sequence) {
      if (s < 0 || s >= num_states) throw DomainError("estimate_prior: label out of range");
      counts[s] += 1.0;
      total += 1.0;
    }
  }
  return counts / total;
}

MatrixXd to_likelihood(const MatrixXd& post, const VectorXd& prior) {
  if (post.cols() != prior.size()) throw DomainError("to_likelihood: prior size mismatch");
  if ((prior.array() <= 0.0).any()) throw DomainError("to_likelihood: prior must be positive");
  const RowVectorXd log_prior = prior.array().log().matrix().transpose();
  MatrixXd scores = post.array().max(kProbabilityFloor).log().matrix();
  scores.rowwise() -= log_prior;
  return scores;
}

}  // namespace fcseg
