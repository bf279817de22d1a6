#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "oca/error.hpp"
#include "oca/mixture.hpp"
#include "oracles.hpp"

using namespace oca;

namespace {

LabelSet dog_labels() {
    return LabelSet{"dog", {{"dog", {}, Tier::Seen}}, {{"bird", {}, Tier::Seen}, {"boat", {}, Tier::Seen}, {"person", {}, Tier::Seen}}};
}

Box box(std::vector<double> scores) { return Box{{0, 0, 10, 10}, std::move(scores)}; }

double pairwise_max_gap(const std::vector<double>& v) {
    double best = 0.0;
    for (double a : v)
        for (double b : v) best = std::max(best, std::abs(a - b));
    return best;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected oca::Error");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("box_scores") {
    const auto labels = dog_labels();
    const ScoreConfig diff{Method::MaxLogitDiff, 1.0};

    BoxScoreSet one{"img", {"dog", "bird", "boat", "person"}, {box({0.9, 0.1, 0.1, 0.1})}, std::nullopt};
    const auto s = box_scores(one, labels, diff);
    REQUIRE(s.size() == 1);
    CHECK(std::abs(s[0] + 0.8) <= 1e-15);

    BoxScoreSet sym{"img", {"dog", "bird", "boat", "person"}, {box({0.5, 0.5, 0.5, 0.5})}, std::nullopt};
    CHECK(box_scores(sym, labels, diff)[0] == 0.0);

    // label_order need not match label-set order.
    BoxScoreSet shuffled{"img", {"person", "dog", "boat", "bird"}, {box({0.1, 0.9, 0.1, 0.3})}, std::nullopt};
    CHECK(std::abs(box_scores(shuffled, labels, diff)[0] + 0.6) <= 1e-15);
}

TEST_CASE("box_scores: each box matches the naive per-box pipeline") {
    std::mt19937_64 rng(9);
    const auto labels = dog_labels();
    for (int trial = 0; trial < 30; ++trial) {
        BoxScoreSet set{"img", {"dog", "bird", "boat", "person"}, {}, std::nullopt};
        for (int b = 0; b < 3; ++b) set.boxes.push_back(box(oracle::uniform_vector(rng, 4, 0.0, 1.0)));
        for (Method m : kAllMethods) {
            const auto s = box_scores(set, labels, {m, 1.0});
            for (int b = 0; b < 3; ++b) {
                const auto& row = set.boxes[b].scores;
                const std::vector<double> in = {row[0]}, out = {row[1], row[2], row[3]};
                double expect = 0.0;
                switch (m) {
                    case Method::NegMaxProb: expect = oracle::neg_max_prob(in); break;
                    case Method::SumOutProb: expect = oracle::sum_out_prob(in, out); break;
                    case Method::MaxOutProb: expect = oracle::max_out_prob(in, out); break;
                    case Method::NegMaxInProb: expect = oracle::neg_max_in_prob(in, out); break;
                    case Method::MaxLogitDiff: expect = oracle::max_logit_diff(in, out); break;
                }
                CHECK(std::abs(s[b] - expect) <= 1e-12);
            }
        }
    }
}

TEST_CASE("box_scores: label order mismatch") {
    const auto labels = dog_labels();
    const ScoreConfig diff{Method::MaxLogitDiff, 1.0};
    BoxScoreSet missing{"img", {"dog", "bird", "boat"}, {box({1, 0, 0})}, std::nullopt};
    CHECK(code_of([&] { box_scores(missing, labels, diff); }) == ErrorCode::LabelOrderMismatch);
    BoxScoreSet extra{"img", {"dog", "bird", "boat", "person", "car"}, {box({1, 0, 0, 0, 0})}, std::nullopt};
    CHECK(code_of([&] { box_scores(extra, labels, diff); }) == ErrorCode::LabelOrderMismatch);
    BoxScoreSet ragged{"img", {"dog", "bird", "boat", "person"}, {box({1, 0})}, std::nullopt};
    CHECK(code_of([&] { box_scores(ragged, labels, diff); }) == ErrorCode::BadBox);
    BoxScoreSet flat{"img", {"dog", "bird", "boat", "person"}, {Box{{5, 5, 5, 9}, {1, 0, 0, 0}}}, std::nullopt};
    CHECK(code_of([&] { box_scores(flat, labels, diff); }) == ErrorCode::BadBox);
}

TEST_CASE("mixture_score") {
    CHECK(std::abs(mixture_score(std::vector<double>{0.7, -0.6}) - 1.3) <= 1e-15);
    CHECK(mixture_score(std::vector<double>{0.4, 0.4, 0.4}) == 0.0);
    CHECK(code_of([] { mixture_score(std::vector<double>{0.4}); }) == ErrorCode::TooFewBoxes);
    CHECK(code_of([] { mixture_score(std::vector<double>{}); }) == ErrorCode::TooFewBoxes);

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        auto v = oracle::uniform_vector(rng, 2 + rng() % 12, -3.0, 3.0);
        const double g = mixture_score(v);
        CHECK(g == pairwise_max_gap(v));
        CHECK(g >= 0.0);
        std::shuffle(v.begin(), v.end(), rng);
        CHECK(mixture_score(v) == g);
        // A box inside [min, max] leaves g alone.
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        v.push_back(0.5 * (*lo + *hi));
        CHECK(mixture_score(v) == g);
        const double s = v[0];
        CHECK(mixture_score(std::vector<double>{s, s}) == 0.0);
    }
}

TEST_CASE("mixture: constant shift of every label logit leaves max_logit_diff boxes unchanged") {
    std::mt19937_64 rng(21);
    const auto labels = dog_labels();
    for (int trial = 0; trial < 50; ++trial) {
        BoxScoreSet set{"img", {"dog", "bird", "boat", "person"}, {}, std::nullopt};
        // Confidences on a 1/1024 grid, so adding the shift is exact.
        for (int b = 0; b < 4; ++b) {
            std::vector<double> row(4);
            for (double& x : row) x = static_cast<double>(rng() % 1024) / 1024.0;
            set.boxes.push_back(box(row));
        }
        const double shift = static_cast<double>(rng() % 4096) / 64.0 - 32.0;
        auto shifted = set;
        for (auto& b : shifted.boxes)
            for (double& x : b.scores) x += shift;
        const ScoreConfig diff{Method::MaxLogitDiff, 1.0};
        const auto a = score_mixture(set, labels, diff);
        const auto c = score_mixture(shifted, labels, diff);
        CHECK(a.per_box_scores == c.per_box_scores);
        CHECK(*a.g == *c.g);
    }
}

TEST_CASE("score_mixture: g only with two or more boxes") {
    const auto labels = dog_labels();
    const ScoreConfig diff{Method::MaxLogitDiff, 1.0};
    BoxScoreSet none{"empty", {"dog", "bird", "boat", "person"}, {}, std::nullopt};
    CHECK_FALSE(score_mixture(none, labels, diff).g.has_value());
    BoxScoreSet single{"single", {"dog", "bird", "boat", "person"}, {box({1, 0, 0, 0})}, std::nullopt};
    CHECK_FALSE(score_mixture(single, labels, diff).g.has_value());
    BoxScoreSet two{"two", {"dog", "bird", "boat", "person"}, {box({2, 0, 0, 0}), box({0, 2, 0, 0})},
                    std::vector<double>{1, 0, 0, 0}};
    const auto r = score_mixture(two, labels, diff);
    CHECK(r.g == std::optional<double>(4.0));
    CHECK(r.image_score == std::optional<double>(-1.0));
}

TEST_CASE("box-score NDJSON round trip") {
    const std::string line =
        R"({"image_id":"a","label_order":["dog","bird"],"boxes":[{"bbox":[0,0,5,5],"scores":[0.5,0.25]}]})";
    std::istringstream in(line + "\n");
    const auto sets = read_box_scores(in);
    REQUIRE(sets.size() == 1);
    CHECK(sets[0].boxes[0].scores == std::vector<double>{0.5, 0.25});
    std::ostringstream out;
    write_box_scores(out, sets);
    CHECK(out.str() == line + "\n");

    std::istringstream bad(R"({"image_id":"a","label_order":["dog"],"boxes":[{"bbox":[0,0,5],"scores":[1]}]})");
    CHECK(code_of([&] { read_box_scores(bad); }) == ErrorCode::BadBox);
}
