#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "fcseg/error.hpp"
#include "fcseg/fine_model.hpp"
#include "gradient_check.hpp"
#include "gru_oracle.hpp"

using namespace fcseg;

namespace {

FrameMatrix random_video(int T, int D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  FrameMatrix m(T, D);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST_SUITE("fine_model") {

TEST_CASE("zero parameters give uniform outputs") {
  const GruParams p = GruParams::zeros(3, 5, 4);
  const Eigen::MatrixXd out = forward(p, random_video(6, 3, 1));
  REQUIRE(out.rows() == 6);
  REQUIRE(out.cols() == 4);
  for (Eigen::Index i = 0; i < out.size(); ++i) CHECK(out.data()[i] == doctest::Approx(0.25));
}

TEST_CASE("rows sum to one") {
  const GruParams p = GruParams::random(4, 8, 7, 3, 2.0);
  const Eigen::MatrixXd out = forward(p, random_video(30, 4, 2) * 5.0);
  for (int t = 0; t < out.rows(); ++t) {
    CHECK(out.row(t).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.row(t).minCoeff() >= 0.0);
  }
}

TEST_CASE("hand-unrolled recurrence, H = 2, D = 2, S = 2, three frames") {
  GruParams p = GruParams::zeros(2, 2, 2);
  p.w_update << 0.5, -0.3, 0.2, 0.1;
  p.w_reset << -0.4, 0.6, 0.3, -0.2;
  p.w_cand << 0.7, 0.2, -0.5, 0.4;
  p.u_update << 0.1, 0.2, -0.3, 0.4;
  p.u_reset << 0.5, -0.1, 0.2, 0.3;
  p.u_cand << -0.6, 0.3, 0.2, 0.5;
  p.b_update << 0.05, -0.05;
  p.b_reset << 0.1, 0.0;
  p.b_cand << -0.1, 0.2;
  p.w_out << 1.0, -0.5, 0.3, 0.8;
  p.b_out << 0.1, -0.1;
  FrameMatrix x(3, 2);
  x << 1.0, 0.0,
       0.5, -1.0,
       -0.2, 0.3;

  double h0 = 0.0, h1 = 0.0;
  std::vector<std::array<double, 2>> expected;
  for (int t = 0; t < 3; ++t) {
    const double x0 = x(t, 0), x1 = x(t, 1);
    const double z0 = sig(0.5 * x0 - 0.3 * x1 + 0.1 * h0 + 0.2 * h1 + 0.05);
    const double z1 = sig(0.2 * x0 + 0.1 * x1 - 0.3 * h0 + 0.4 * h1 - 0.05);
    const double r0 = sig(-0.4 * x0 + 0.6 * x1 + 0.5 * h0 - 0.1 * h1 + 0.1);
    const double r1 = sig(0.3 * x0 - 0.2 * x1 + 0.2 * h0 + 0.3 * h1);
    const double c0 = std::tanh(0.7 * x0 + 0.2 * x1 - 0.6 * r0 * h0 + 0.3 * r1 * h1 - 0.1);
    const double c1 = std::tanh(-0.5 * x0 + 0.4 * x1 + 0.2 * r0 * h0 + 0.5 * r1 * h1 + 0.2);
    const double n0 = z0 * h0 + (1 - z0) * c0;
    const double n1 = z1 * h1 + (1 - z1) * c1;
    h0 = n0;
    h1 = n1;
    const double l0 = 1.0 * h0 + 0.3 * h1 + 0.1;
    const double l1 = -0.5 * h0 + 0.8 * h1 - 0.1;
    const double e0 = std::exp(l0), e1 = std::exp(l1);
    expected.push_back({e0 / (e0 + e1), e1 / (e0 + e1)});
  }
  const Eigen::MatrixXd out = forward(p, x);
  for (int t = 0; t < 3; ++t) {
    CHECK(out(t, 0) == doctest::Approx(expected[t][0]).epsilon(1e-12));
    CHECK(out(t, 1) == doctest::Approx(expected[t][1]).epsilon(1e-12));
  }
}

TEST_CASE("forward agrees with the scalar reference") {
  const GruParams p = GruParams::random(5, 6, 4, 9, 0.7);
  const FrameMatrix x = random_video(12, 5, 3);
  const auto ref = fcseg::testing::scalar_forward(p, x);
  const Eigen::MatrixXd out = forward(p, x);
  for (int t = 0; t < 12; ++t) {
    for (int s = 0; s < 4; ++s) CHECK(out(t, s) == doctest::Approx(ref[t][s]).epsilon(1e-12));
  }
}

TEST_CASE("dimension mismatch") {
  const GruParams p = GruParams::random(3, 4, 2, 1);
  CHECK_THROWS_AS(forward(p, random_video(4, 2, 1)), DomainError);
  CHECK_THROWS_AS(posteriors(p, random_video(4, 5, 1)), DomainError);
}

TEST_CASE("chunks cover at most 21 frames and truncate at the start") {
  const FrameMatrix video = random_video(30, 2, 4);
  std::vector<int> targets(30, 0);
  const auto chunks = make_chunks(video, targets);
  REQUIRE(chunks.size() == 30);
  CHECK(chunks[0].first() == 0);
  CHECK(chunks[0].length() == 1);
  CHECK(chunks[5].length() == 6);
  CHECK(chunks[20].length() == 21);
  CHECK(chunks[29].first() == 9);
  CHECK(chunks[29].length() == 21);
}

TEST_CASE("posteriors read the last output of each chunk") {
  const GruParams p = GruParams::random(3, 5, 4, 6, 0.5);
  const FrameMatrix video = random_video(40, 3, 7);
  const Eigen::MatrixXd post = posteriors(p, video);
  REQUIRE(post.rows() == 40);
  REQUIRE(post.cols() == 4);
  for (int t : {0, 1, 19, 20, 21, 39}) {
    const int first = std::max(0, t - kChunkContext);
    const Eigen::MatrixXd window = forward(p, video.middleRows(first, t - first + 1));
    for (int s = 0; s < 4; ++s) {
      CHECK(post(t, s) == doctest::Approx(window(window.rows() - 1, s)).epsilon(1e-12));
    }
  }
  const FrameMatrix one = video.topRows(1);
  CHECK(posteriors(p, one).isApprox(forward(p, one), 1e-14));
}

TEST_CASE("posteriors are local to the 21-frame window") {
  const GruParams p = GruParams::random(3, 6, 3, 8, 0.5);
  FrameMatrix video = random_video(100, 3, 9);
  const Eigen::MatrixXd before = posteriors(p, video);
  video.topRows(10).setConstant(42.0);
  const Eigen::MatrixXd after = posteriors(p, video);
  CHECK(after.row(30) == before.row(30));
  CHECK(after.row(99) == before.row(99));
  CHECK_FALSE(after.row(5) == before.row(5));
}

TEST_CASE("finite-difference gradient check") {
  SUBCASE("single 5-frame window, H = 4, D = 3, S = 3") {
    const auto report = fcseg::testing::standard_gradient_check();
    INFO(report.worst);
    CHECK(report.checked == 4 * 3 * 3 + 4 * 4 * 3 + 4 * 3 + 4 * 3 + 3);
    CHECK(report.max_relative_error < 1e-4);
  }
  SUBCASE("several chunks, including truncated ones") {
    const GruParams p = GruParams::random(2, 3, 4, 21, 0.6);
    const FrameMatrix video = random_video(25, 2, 22);
    std::vector<int> targets(25);
    for (int t = 0; t < 25; ++t) targets[t] = t % 4;
    const auto chunks = make_chunks(video, targets);
    const std::vector<Chunk> some{chunks[0], chunks[3], chunks[24]};
    const auto report = fcseg::testing::check_gradient(p, some, 1e-4);
    INFO(report.worst);
    CHECK(report.max_relative_error < 1e-4);
  }
}

TEST_CASE("repeated updates on one chunk do not increase its loss") {
  GruParams p = GruParams::random(3, 4, 3, 5);
  const FrameMatrix video = random_video(8, 3, 6);
  const Chunk chunk{&video, 7, 2};
  const std::span<const Chunk> one(&chunk, 1);
  double last = evaluate_loss(p, one);
  for (int step = 0; step < 50; ++step) {
    train_pass(p, one, {0.01, 64, 1});
    const double now = evaluate_loss(p, one);
    CHECK(now <= last + 1e-15);
    last = now;
  }
  CHECK(last < evaluate_loss(GruParams::random(3, 4, 3, 5), one));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  GruParams p = GruParams::random(3, 4, 3, 5);
  const GruParams before = p;
  const FrameMatrix video = random_video(30, 3, 6);
  std::vector<int> targets(30);
  for (int t = 0; t < 30; ++t) targets[t] = t / 10;
  const auto chunks = make_chunks(video, targets);
  const double loss = train_pass(p, chunks, {0.0, 7, 3});
  CHECK(p == before);
  CHECK(loss == doctest::Approx(evaluate_loss(before, chunks)).epsilon(1e-12));
}

TEST_CASE("training is deterministic per seed") {
  const FrameMatrix video = random_video(50, 3, 6);
  std::vector<int> targets(50);
  for (int t = 0; t < 50; ++t) targets[t] = t / 17;
  const auto chunks = make_chunks(video, targets);
  GruParams a = GruParams::random(3, 5, 3, 2);
  GruParams b = a;
  train_pass(a, chunks, {0.05, 8, 4});
  train_pass(b, chunks, {0.05, 8, 4});
  CHECK(a == b);
  GruParams c = GruParams::random(3, 5, 3, 2);
  train_pass(c, chunks, {0.05, 8, 5});
  CHECK_FALSE(a == c);
}

TEST_CASE("training fits a separable toy problem") {
  FrameMatrix video(60, 2);
  std::vector<int> targets(60);
  for (int t = 0; t < 60; ++t) {
    targets[t] = t < 30 ? 0 : 1;
    video(t, 0) = t < 30 ? 1.0 : -1.0;
    video(t, 1) = 0.5;
  }
  const auto chunks = make_chunks(video, targets);
  GruParams p = GruParams::random(2, 8, 2, 3);
  const double start = evaluate_loss(p, chunks);
  for (int pass = 0; pass < 40; ++pass) train_pass(p, chunks, {0.5, 16, static_cast<std::uint64_t>(pass)});
  CHECK(evaluate_loss(p, chunks) < 0.25 * start);
}

TEST_CASE("divergence is reported") {
  GruParams p = GruParams::random(2, 3, 2, 1);
  p.w_out(0, 0) = std::numeric_limits<double>::infinity();
  const FrameMatrix video = random_video(4, 2, 1);
  const std::vector<int> targets{0, 1, 0, 1};
  const auto chunks = make_chunks(video, targets);
  CHECK_THROWS_AS(train_pass(p, chunks, {0.1, 2, 1}), DivergenceError);
}

TEST_CASE("prior estimates") {
  SUBCASE("A1 A1 A2 with S = 2") {
    const std::vector<std::vector<int>> labels{{0, 0, 1}};
    const Eigen::VectorXd prior = estimate_prior(labels, 2);
    CHECK(prior[0] == doctest::Approx(3.0 / 5.0));
    CHECK(prior[1] == doctest::Approx(2.0 / 5.0));
  }
  SUBCASE("uniform labeling") {
    const std::vector<std::vector<int>> labels{{0, 1, 2}, {2, 1, 0}};
    const Eigen::VectorXd prior = estimate_prior(labels, 3);
    for (int s = 0; s < 3; ++s) CHECK(prior[s] == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("unseen state") {
    const std::vector<std::vector<int>> labels{{0, 0, 0, 0}};
    const Eigen::VectorXd prior = estimate_prior(labels, 3);
    CHECK(prior[2] == doctest::Approx(1.0 / 7.0));
    CHECK(prior.sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("likelihood conversion") {
  SUBCASE("uniform prior keeps the argmax") {
    Eigen::MatrixXd post(1, 2);
    post << 0.6, 0.4;
    const Eigen::VectorXd prior = Eigen::VectorXd::Constant(2, 0.5);
    const Eigen::MatrixXd scores = to_likelihood(post, prior);
    CHECK(scores(0, 0) == doctest::Approx(std::log(1.2)));
    CHECK(scores(0, 1) == doctest::Approx(std::log(0.8)));
  }
  SUBCASE("zero posterior is floored") {
    Eigen::MatrixXd post(1, 2);
    post << 1.0, 0.0;
    const Eigen::VectorXd prior = Eigen::VectorXd::Constant(2, 0.5);
    const Eigen::MatrixXd scores = to_likelihood(post, prior);
    CHECK(std::isfinite(scores(0, 1)));
    CHECK(scores(0, 1) == doctest::Approx(std::log(kProbabilityFloor) - std::log(0.5)));
  }
  SUBCASE("doubling a prior lowers its scores by log 2") {
    const GruParams p = GruParams::random(2, 3, 3, 4);
    const Eigen::MatrixXd post = posteriors(p, random_video(10, 2, 4));
    Eigen::VectorXd prior(3);
    prior << 0.2, 0.3, 0.5;
    Eigen::VectorXd doubled = prior;
    doubled[0] = 0.4;
    const Eigen::MatrixXd a = to_likelihood(post, prior);
    const Eigen::MatrixXd b = to_likelihood(post, doubled);
    for (int t = 0; t < 10; ++t) {
      CHECK(a(t, 0) - b(t, 0) == doctest::Approx(std::log(2.0)));
      CHECK(a(t, 1) == b(t, 1));
    }
  }
  SUBCASE("uniform prior argmax invariance on random posteriors") {
    const GruParams p = GruParams::random(2, 3, 5, 4, 1.0);
    const Eigen::MatrixXd post = posteriors(p, random_video(25, 2, 5));
    const Eigen::MatrixXd scores = to_likelihood(post, Eigen::VectorXd::Constant(5, 0.2));
    for (int t = 0; t < 25; ++t) {
      Eigen::Index i = 0, j = 0;
      post.row(t).maxCoeff(&i);
      scores.row(t).maxCoeff(&j);
      CHECK(i == j);
    }
  }
  SUBCASE("non-positive prior") {
    CHECK_THROWS_AS(to_likelihood(Eigen::MatrixXd::Constant(1, 2, 0.5), Eigen::Vector2d(1.0, 0.0)),
                    DomainError);
  }
}

TEST_CASE("parameter validation") {
  GruParams p = GruParams::random(2, 3, 2, 1);
  p.validate();
  CHECK(p.num_parameters() == 3 * (3 * 2 + 3 * 3 + 3) + 3 * 2 + 2);
  p.b_cand[1] = std::nan("");
  CHECK_THROWS_AS(p.validate(), DomainError);
  GruParams q = GruParams::random(2, 3, 2, 1);
  q.u_reset.resize(2, 3);
  CHECK_THROWS_AS(q.validate(), DomainError);
  const GruParams r = GruParams::random(2, 3, 2, 1);
  CHECK(r.w_update.cwiseAbs().maxCoeff() <= 0.08);
}

}  // TEST_SUITE
