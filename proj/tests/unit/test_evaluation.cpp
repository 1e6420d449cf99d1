#include <doctest.h>

#include <algorithm>
#include <random>

#include "chickcall/errors.hpp"
#include "chickcall/evaluation.hpp"
#include "common/oracles.hpp"
#include "common/synth.hpp"

using namespace chickcall;

namespace {

std::vector<double> random_times(std::mt19937_64& rng, std::size_t max_n, double span) {
    std::vector<double> times(static_cast<std::size_t>(synth::uniform01(rng) * (max_n + 1)));
    for (auto& t : times) t = synth::uniform01(rng) * span;
    std::sort(times.begin(), times.end());
    return times;
}

}  // namespace

TEST_CASE("match_onsets: identical lists are all TP") {
    const std::vector<double> events = {0.5, 1.0, 2.25, 7.5};
    const auto m = match_onsets(events, events, 0.05);
    CHECK(m.tp == 4);
    CHECK(m.fp == 0);
    CHECK(m.fn_ == 0);
    CHECK(m.matched_pairs.size() == m.tp);
}

TEST_CASE("match_onsets: worked small cases") {
    SUBCASE("one hit one miss each side") {
        const auto m = match_onsets({1.03, 2.2}, {1.0, 2.0}, 0.05);
        CHECK(m.tp == 1);
        CHECK(m.fp == 1);
        CHECK(m.fn_ == 1);
        const auto scores = prf(m);
        CHECK(scores.precision == doctest::Approx(0.5));
        CHECK(scores.recall == doctest::Approx(0.5));
        CHECK(scores.f1 == doctest::Approx(0.5));
    }

    SUBCASE("duplicate detection counts as FP") {
        const auto m = match_onsets({0.96, 1.04}, {1.0}, 0.05);
        CHECK(m.tp == 1);
        CHECK(m.fp == 1);
        CHECK(m.fn_ == 0);
    }

    SUBCASE("unsorted input throws") {
        CHECK_THROWS_AS(match_onsets({2.0, 1.0}, {1.0}, 0.05), Error);
        CHECK_THROWS_AS(match_onsets({1.0}, {3.0, 2.0}, 0.05), Error);
    }
}

TEST_CASE("match_onsets equals exhaustive maximum matching (property)") {
    std::mt19937_64 rng(424242);
    for (int trial = 0; trial < 500; ++trial) {
        const auto ref = random_times(rng, 8, 2.0);
        const auto pred = random_times(rng, 8, 2.0);
        const double tol = 0.02 + 0.2 * synth::uniform01(rng);
        const auto greedy = match_onsets(pred, ref, tol);
        const auto exhaustive = oracles::max_matching(ref, pred, tol);
        CHECK(greedy.tp == exhaustive);
        CHECK(greedy.tp + greedy.fn_ == ref.size());
        CHECK(greedy.tp + greedy.fp == pred.size());
    }
}

TEST_CASE("match_onsets symmetry: swapping sides swaps fp and fn") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_times(rng, 6, 1.0);
        const auto b = random_times(rng, 6, 1.0);
        const auto ab = match_onsets(a, b, 0.05);
        const auto ba = match_onsets(b, a, 0.05);
        CHECK(ab.tp == ba.tp);
        CHECK(ab.fp == ba.fn_);
        CHECK(ab.fn_ == ba.fp);
    }
}

TEST_CASE("match_onsets: far events do not change tp") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        auto ref = random_times(rng, 6, 1.0);
        auto pred = random_times(rng, 6, 1.0);
        const double tol = 0.05;
        const auto base = match_onsets(pred, ref, tol);
        pred.push_back(100.0 + synth::uniform01(rng));  // far from everything
        const auto with_far = match_onsets(pred, ref, tol);
        CHECK(with_far.tp == base.tp);
        CHECK(with_far.fp == base.fp + 1);
    }
}

TEST_CASE("match_offsets: adaptive tolerance with onset anchors") {
    SUBCASE("300 ms call gets a 150 ms window") {
        const std::vector<CallSegment> ref = {{1.0, 1.3, "f"}};
        const std::vector<CallSegment> pred = {{1.0, 1.44, "f"}};
        const auto m = match_offsets(pred, ref, 0.1, 0.05);
        CHECK(m.tp == 1);
        CHECK(m.fp == 0);
        CHECK(m.fn_ == 0);
    }

    SUBCASE("80 ms call keeps the fixed 100 ms window") {
        const std::vector<CallSegment> ref = {{1.0, 1.08, "f"}};
        const std::vector<CallSegment> pred = {{1.0, 1.17, "f"}};
        const auto m = match_offsets(pred, ref, 0.1, 0.05);
        CHECK(m.tp == 1);
    }

    SUBCASE("just beyond the adaptive window is a miss") {
        const std::vector<CallSegment> ref = {{1.0, 1.3, "f"}};
        const std::vector<CallSegment> pred = {{1.0, 1.46, "f"}};
        const auto m = match_offsets(pred, ref, 0.1, 0.05);
        CHECK(m.tp == 0);
        CHECK(m.fp == 1);
        CHECK(m.fn_ == 1);
    }

    SUBCASE("prediction without an onset anchor is FP") {
        const std::vector<CallSegment> ref = {{1.0, 1.2, "f"}};
        const std::vector<CallSegment> pred = {{2.0, 2.2, "f"}};
        const auto m = match_offsets(pred, ref, 0.1, 0.05);
        CHECK(m.tp == 0);
        CHECK(m.fp == 1);
        CHECK(m.fn_ == 1);
    }
}

TEST_CASE("prf formulas") {
    SUBCASE("tp=9 fp=1 fn=9") {
        MatchResult m;
        m.tp = 9;
        m.fp = 1;
        m.fn_ = 9;
        const auto s = prf(m);
        CHECK(s.precision == doctest::Approx(0.9));
        CHECK(s.recall == doctest::Approx(0.5));
        CHECK(s.f1 == doctest::Approx(0.6428571428571429));
    }
    SUBCASE("all-zero convention") {
        const auto s = prf(MatchResult{});
        CHECK(s.precision == 0.0);
        CHECK(s.recall == 0.0);
        CHECK(s.f1 == 0.0);
    }
    SUBCASE("perfect detection") {
        MatchResult m;
        m.tp = 17;
        const auto s = prf(m);
        CHECK(s.precision == 1.0);
        CHECK(s.recall == 1.0);
        CHECK(s.f1 == 1.0);
    }
}

TEST_CASE("weighted_aggregate") {
    SUBCASE("call-count weighting") {
        std::map<std::string, PrfScores> scores = {{"A", {0.8, 0.8, 0.8}},
                                                   {"B", {0.4, 0.4, 0.4}}};
        std::map<std::string, std::size_t> weights = {{"A", 300}, {"B", 100}};
        const auto w = weighted_aggregate(scores, weights);
        CHECK(w.f1 == doctest::Approx(0.7));
        CHECK(w.precision == doctest::Approx(0.7));
    }
    SUBCASE("single file is the identity") {
        std::map<std::string, PrfScores> scores = {{"A", {0.81, 0.62, 0.7}}};
        const auto w = weighted_aggregate(scores, {{"A", 42}});
        CHECK(w.precision == doctest::Approx(0.81));
        CHECK(w.recall == doctest::Approx(0.62));
        CHECK(w.f1 == doctest::Approx(0.7));
    }
    SUBCASE("equal weights give the arithmetic mean") {
        std::map<std::string, PrfScores> scores = {
            {"A", {1.0, 0.0, 0.0}}, {"B", {0.0, 1.0, 0.0}}, {"C", {0.5, 0.5, 0.9}}};
        const auto w = weighted_aggregate(scores, {{"A", 5}, {"B", 5}, {"C", 5}});
        CHECK(w.precision == doctest::Approx(0.5));
        CHECK(w.recall == doctest::Approx(0.5));
        CHECK(w.f1 == doctest::Approx(0.3));
    }
    SUBCASE("all-zero weights throw") {
        std::map<std::string, PrfScores> scores = {{"A", {1, 1, 1}}};
        CHECK_THROWS_AS(weighted_aggregate(scores, {{"A", 0}}), Error);
    }
}

TEST_CASE("evaluate_segments: hand-computed two-file aggregate") {
    // File a: ref 2 calls, both onsets hit, offsets one hit one miss.
    // File b: ref 1 call, onset missed entirely.
    std::vector<CallSegment> ref = {{1.0, 1.2, "a"}, {2.0, 2.3, "a"}, {5.0, 5.1, "b"}};
    std::vector<CallSegment> pred = {{1.01, 1.25, "a"}, {2.02, 2.8, "a"}, {7.0, 7.1, "b"}};
    const auto report = evaluate_segments(pred, ref, EvalTolerances{});

    CHECK(report.per_file.at("a").onset.f1 == doctest::Approx(1.0));
    CHECK(report.per_file.at("a").offset.precision == doctest::Approx(0.5));
    CHECK(report.per_file.at("b").onset.f1 == doctest::Approx(0.0));
    // Weights: a=2, b=1 -> weighted onset F1 = (2*1 + 1*0)/3.
    CHECK(report.weighted_onset.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(report.weighted_offset.f1 == doctest::Approx((2.0 * 0.5 + 0.0) / 3.0));
}
