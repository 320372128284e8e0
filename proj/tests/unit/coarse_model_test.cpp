#include <doctest.h>

#include <random>

#include "fcseg/coarse_model.hpp"
#include "fcseg/error.hpp"
#include "fcseg/grammar.hpp"
#include "test_support.hpp"

using namespace fcseg;
using fcseg::testing::states_of;

namespace {

constexpr int A = 0;
constexpr int B = 1;
constexpr int C = 2;

Dataset dataset_of(const std::vector<std::pair<int, Transcript>>& videos,
                   std::vector<std::string> labels) {
  Dataset d;
  d.label_set = std::move(labels);
  int n = 0;
  for (const auto& [frames, transcript] : videos) {
    VideoSample s;
    s.id = "v" + std::to_string(n++);
    s.features = FrameMatrix::Zero(frames, 1);
    s.transcript = transcript;
    d.samples.push_back(std::move(s));
  }
  return d;
}

/// Alignment with explicit instance spans given as (action, frames per
/// subaction) lists.
Alignment build(const SubactionSpace& space,
                const std::vector<std::pair<int, std::vector<int>>>& instances) {
  Alignment out;
  for (std::size_t n = 0; n < instances.size(); ++n) {
    const auto& [a, frames] = instances[n];
    for (int k = 0; k < static_cast<int>(frames.size()); ++k) {
      for (int i = 0; i < frames[k]; ++i) {
        out.states.push_back(space.state(a, k));
        out.instances.push_back(static_cast<int>(n));
      }
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("coarse_model") {

TEST_CASE("flat indices are contiguous per action") {
  const SubactionSpace space({2, 1, 3});
  CHECK(space.num_states() == 6);
  CHECK(space.first(A) == 0);
  CHECK(space.first(B) == 2);
  CHECK(space.first(C) == 3);
  CHECK(space.last(C) == 5);
  CHECK(space.state(C, 1) == 4);
  CHECK(space.action_of(4) == C);
  CHECK(space.ordinal_of(4) == 1);
  CHECK(space.is_last(1));
  CHECK_FALSE(space.is_last(3));
  const std::vector<int> tr{A, C, A};
  CHECK(space.min_frames(tr) == 7);
  CHECK_THROWS_AS(SubactionSpace({1, 0}), DomainError);
  CHECK_THROWS_AS(space.state(B, 1), DomainError);
}

TEST_CASE("initial counts use corpus-wide frames over instances") {
  SUBCASE("300 frames, 3 instances, m = 10") {
    const auto d = dataset_of({{300, {"A", "B", "C"}}}, {"A", "B", "C"});
    CHECK(init_subaction_counts(d, 10).counts() == std::vector<int>{10, 10, 10});
  }
  SUBCASE("pooled over videos") {
    const auto d = dataset_of({{100, {"A", "B"}}, {200, {"A"}}}, {"A", "B"});
    CHECK(init_subaction_counts(d, 10).counts() == std::vector<int>{10, 10});
  }
  SUBCASE("floor of one") {
    const auto d = dataset_of({{12, {"A", "B", "C"}}}, {"A", "B", "C"});
    CHECK(init_subaction_counts(d, 10).counts() == std::vector<int>{1, 1, 1});
  }
  SUBCASE("half rounds up") {
    const auto d = dataset_of({{50, {"A", "B"}}}, {"A", "B"});
    CHECK(init_subaction_counts(d, 10).counts() == std::vector<int>{3, 3});
  }
  SUBCASE("unused action") {
    const auto d = dataset_of({{50, {"A"}}}, {"A", "B"});
    CHECK_THROWS_AS(init_subaction_counts(d, 10), DomainError);
  }
  SUBCASE("default m") { CHECK(kDefaultFramesPerSubaction == 10); }
}

TEST_CASE("linear alignment examples") {
  SUBCASE("equal split of two actions") {
    const SubactionSpace space({1, 1});
    const std::vector<int> tr{A, B};
    CHECK(linear_alignment(6, tr, space).states ==
          states_of(space, {{A, 1}, {A, 1}, {A, 1}, {B, 1}, {B, 1}, {B, 1}}));
  }
  SUBCASE("equal split across subactions") {
    const SubactionSpace space({2});
    const std::vector<int> tr{A};
    CHECK(linear_alignment(4, tr, space).states == states_of(space, {{A, 1}, {A, 1}, {A, 2}, {A, 2}}));
  }
  SUBCASE("remainders go to the earliest parts") {
    // 5 frames over 2 instances -> (3, 2); 3 frames over 2 subactions -> (2, 1).
    const SubactionSpace space({2, 2});
    const std::vector<int> tr{A, B};
    const Alignment a = linear_alignment(5, tr, space);
    CHECK(a.states == states_of(space, {{A, 1}, {A, 1}, {A, 2}, {B, 1}, {B, 2}}));
    CHECK(a.instances == std::vector<int>{0, 0, 0, 1, 1});
  }
  SUBCASE("infeasible") {
    const SubactionSpace space({2, 2});
    const std::vector<int> tr{A, B};
    CHECK_THROWS_AS(linear_alignment(3, tr, space), InfeasibleError);
  }
  SUBCASE("short spans borrow frames") {
    const SubactionSpace space({1, 4});
    const std::vector<int> tr{A, B};
    const Alignment a = linear_alignment(6, tr, space);
    check_alignment(a, tr, space);
    CHECK(a.states == states_of(space, {{A, 1}, {A, 1}, {B, 1}, {B, 2}, {B, 3}, {B, 4}}));
  }
}

TEST_CASE("linear alignment collapses back to its transcript") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int actions = 1 + static_cast<int>(rng() % 4);
    std::vector<int> counts(actions);
    for (int& k : counts) k = 1 + static_cast<int>(rng() % 4);
    const SubactionSpace space(counts);
    std::vector<int> tr(1 + rng() % 5);
    for (int& a : tr) a = static_cast<int>(rng() % actions);
    const int T = space.min_frames(tr) + static_cast<int>(rng() % 30);
    const Alignment alignment = linear_alignment(T, tr, space);
    REQUIRE(alignment.num_frames() == T);
    check_alignment(alignment, tr, space);
    std::vector<int> from_instances;
    for (int t = 0; t < T; ++t) {
      if (t == 0 || alignment.instances[t] != alignment.instances[t - 1]) {
        from_instances.push_back(space.action_of(alignment.states[t]));
      }
    }
    CHECK(from_instances == tr);
    // Repeats of single-subaction actions are invisible to the extractor.
    bool ambiguous = false;
    for (std::size_t n = 1; n < tr.size(); ++n) ambiguous |= tr[n] == tr[n - 1] && counts[tr[n]] == 1;
    if (!ambiguous) CHECK(extract_actions(alignment.states, space) == tr);
  }
}

TEST_CASE("check_alignment rejects broken alignments") {
  const SubactionSpace space({2, 1});
  const std::vector<int> tr{A, B};
  Alignment ok = build(space, {{A, {1, 1}}, {B, {2}}});
  check_alignment(ok, tr, space);
  SUBCASE("skipped subaction") {
    Alignment bad = build(space, {{A, {1, 0}}, {B, {3}}});
    bad.states[1] = space.state(B, 0);
    CHECK_THROWS_AS(check_alignment(bad, tr, space), DomainError);
  }
  SUBCASE("instance ends early") {
    Alignment bad = ok;
    bad.states[1] = space.state(A, 0);
    CHECK_THROWS_AS(check_alignment(bad, tr, space), DomainError);
  }
  SUBCASE("wrong transcript") {
    const std::vector<int> other{B, A};
    CHECK_THROWS_AS(check_alignment(ok, other, space), DomainError);
  }
}

TEST_CASE("transition estimates") {
  SUBCASE("A1 A1 A2") {
    const SubactionSpace space({2});
    const std::vector<Alignment> al{build(space, {{A, {2, 1}}})};
    const auto tm = estimate_transitions(al, space);
    CHECK(tm.self(0) == doctest::Approx(0.5));
    CHECK(tm.self(1) == doctest::Approx(0.5));
    CHECK(tm.self(0) + tm.advance(0) == doctest::Approx(1.0));
  }
  SUBCASE("self-loops only") {
    const SubactionSpace space({1});
    const std::vector<Alignment> al{build(space, {{A, {8}}})};
    CHECK(estimate_transitions(al, space).self(0) == doctest::Approx(8.0 / 9.0));
  }
  SUBCASE("cross-instance pairs are ignored") {
    const SubactionSpace space({1, 1});
    const std::vector<Alignment> al{build(space, {{A, {1}}, {B, {1}}})};
    const auto tm = estimate_transitions(al, space);
    CHECK(tm.self(0) == doctest::Approx(0.5));
    CHECK(tm.self(1) == doctest::Approx(0.5));
  }
  SUBCASE("probabilities lie strictly inside (0, 1)") {
    const SubactionSpace space({3, 2});
    const std::vector<Alignment> al{build(space, {{A, {5, 1, 9}}, {B, {1, 1}}}),
                                    build(space, {{B, {4, 4}}, {A, {1, 2, 3}}})};
    const auto tm = estimate_transitions(al, space);
    for (int s = 0; s < space.num_states(); ++s) {
      CHECK(tm.self(s) > 0.0);
      CHECK(tm.self(s) < 1.0);
      CHECK(tm.log_self(s) == doctest::Approx(std::log(tm.self(s))));
      CHECK(tm.log_advance(s) == doctest::Approx(std::log(1.0 - tm.self(s))));
    }
  }
}

TEST_CASE("reestimated counts") {
  SUBCASE("120 frames over 2 instances, m = 10") {
    const SubactionSpace space({3});
    const std::vector<Alignment> al{build(space, {{A, {20, 20, 10}}}),
                                    build(space, {{A, {30, 30, 10}}})};
    const auto re = reestimate_space(al, space, 10);
    CHECK(re.mean_lengths[A] == doctest::Approx(60.0));
    CHECK(re.space.counts() == std::vector<int>{6});
  }
  SUBCASE("short action keeps one subaction") {
    const SubactionSpace space({2});
    const std::vector<Alignment> al{build(space, {{A, {2, 2}}})};
    CHECK(reestimate_space(al, space, 10).space.counts() == std::vector<int>{1});
  }
  SUBCASE("exact multiples") {
    const SubactionSpace space({1, 1});
    const std::vector<Alignment> al{build(space, {{A, {30}}, {B, {70}}}),
                                    build(space, {{B, {70}}, {A, {30}}})};
    CHECK(reestimate_space(al, space, 10).space.counts() == std::vector<int>{3, 7});
  }
  SUBCASE("scaling every span scales the mean length") {
    const SubactionSpace space({1, 1});
    const std::vector<Alignment> base{build(space, {{A, {13}}, {B, {7}}}),
                                      build(space, {{A, {21}}})};
    const std::vector<Alignment> tripled{build(space, {{A, {39}}, {B, {21}}}),
                                         build(space, {{A, {63}}})};
    const auto r1 = reestimate_space(base, space, 10);
    const auto r3 = reestimate_space(tripled, space, 10);
    CHECK(r3.mean_lengths[A] == doctest::Approx(3 * r1.mean_lengths[A]));
    CHECK(r3.mean_lengths[B] == doctest::Approx(3 * r1.mean_lengths[B]));
  }
  SUBCASE("unaligned action keeps its previous count") {
    const SubactionSpace space({1, 4});
    const std::vector<Alignment> al{build(space, {{A, {25}}})};
    const auto re = reestimate_space(al, space, 10);
    CHECK(re.space.counts() == std::vector<int>{3, 4});
    CHECK(re.unchanged == std::vector<int>{B});
  }
}

TEST_CASE("round half up with floor one") {
  CHECK(round_count(2.5) == 3);
  CHECK(round_count(2.49) == 2);
  CHECK(round_count(0.2) == 1);
  CHECK(round_count(0.0) == 1);
}

TEST_CASE("fit_to_lengths lowers the largest count of a short video") {
  const SubactionSpace space({3, 6});
  const std::vector<std::vector<int>> trs{{A, B}, {B}};
  SUBCASE("already feasible") {
    const std::vector<int> lengths{9, 6};
    CHECK(fit_to_lengths(space, trs, lengths) == space);
  }
  SUBCASE("one video too short") {
    const std::vector<int> lengths{7, 40};
    CHECK(fit_to_lengths(space, trs, lengths).counts() == std::vector<int>{3, 4});
  }
  SUBCASE("impossible") {
    const std::vector<int> lengths{1, 40};
    CHECK_THROWS_AS(fit_to_lengths(space, trs, lengths), InfeasibleError);
  }
}

TEST_CASE("redistribute keeps instance spans") {
  const SubactionSpace from({2, 1});
  const SubactionSpace to({3, 2});
  const Alignment a = build(from, {{A, {1, 6}}, {B, {5}}});
  const Alignment r = redistribute(a, from, to);
  CHECK(r.instances == a.instances);
  CHECK(r.states == states_of(to, {{A, 1}, {A, 1}, {A, 1}, {A, 2}, {A, 2}, {A, 3}, {A, 3},
                                   {B, 1}, {B, 1}, {B, 1}, {B, 2}, {B, 2}}));
  const std::vector<int> tr{A, B};
  check_alignment(r, tr, to);
}

TEST_CASE("alignment file rows") {
  const SubactionSpace space({2, 1});
  const Alignment a = build(space, {{A, {1, 2}}, {B, {1}}});
  const std::vector<std::string> labels{"pour", "stir"};
  const std::string text = format_alignment(a, space, labels);
  CHECK(text == "0,pour,1\n1,pour,2\n2,pour,2\n3,stir,1\n");
  const auto rows = parse_alignment_rows(text);
  REQUIRE(rows.size() == 4);
  CHECK(rows[2].frame == 2);
  CHECK(rows[2].label == "pour");
  CHECK(rows[2].ordinal == 2);

  fcseg::testing::TempDir dir;
  save_alignment(dir / "a.csv", a, space, labels);
  CHECK(load_alignment_rows(dir / "a.csv").size() == 4);

  CHECK_THROWS_AS(parse_alignment_rows("0,pour\n"), FormatError);
  CHECK_THROWS_AS(parse_alignment_rows("0,pour,x\n"), FormatError);
  CHECK_THROWS_AS(parse_alignment_rows("1,pour,1\n"), FormatError);
}

}  // TEST_SUITE
