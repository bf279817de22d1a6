#include <doctest.h>

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "oca/error.hpp"
#include "oca/eval.hpp"
#include "oca/scoring.hpp"
#include "oca/synth.hpp"
#include "oracles.hpp"

using namespace oca;

namespace {

double norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

std::vector<std::uint32_t> bits(std::span<const float> v) {
    std::vector<std::uint32_t> out;
    for (float x : v) out.push_back(std::bit_cast<std::uint32_t>(x));
    return out;
}

synth::SynthConfig two_class(double kappa, std::vector<double> a = {}, std::vector<double> b = {}) {
    synth::SynthConfig cfg;
    cfg.dim = 8;
    cfg.seed = 42;
    cfg.classes = {{"dog", std::move(a), kappa, 40, "seen_in"}, {"cat", std::move(b), kappa, 40, "seen_out"}};
    return cfg;
}

double seen_auroc(const synth::SynthConfig& cfg) {
    const auto stores = synth::generate(cfg);
    const auto labels = embed_labels(synth::label_set(cfg), store_lookup(stores.texts));
    const std::vector<ScoreConfig> cfgs = {{Method::MaxLogitDiff, 1.0}};
    const auto records = score_store(stores.images, labels, cfgs);
    const std::vector<EvalTask> tasks = {{"seen", {"seen_out"}, {"seen_in"}, Method::MaxLogitDiff}};
    return run_tasks(records, tasks).tasks[0].auroc;
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

TEST_CASE("Rng: reference sequence") {
    // splitmix64 from seed 0 (published reference values).
    std::uint64_t state = 0;
    CHECK(synth::splitmix64(state) == 0xE220A8397B1DCDAFULL);
    CHECK(synth::splitmix64(state) == 0x6E789E6AA1B965F4ULL);

    synth::Rng a(7), b(7), c(8);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    CHECK(a.next() != c.next());

    synth::Rng u(1);
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        const double g = u.gaussian();
        sum += g;
        sum2 += g * g;
    }
    CHECK(std::abs(sum / 20000) < 0.05);
    CHECK(std::abs(sum2 / 20000 - 1.0) < 0.05);
    for (int i = 0; i < 1000; ++i) CHECK(u.below(3) < 3);
}

TEST_CASE("generate: unit norms, metadata and determinism") {
    const auto cfg = two_class(20.0);
    const auto s1 = synth::generate(cfg);
    const auto s2 = synth::generate(cfg);
    CHECK(s1.images.size() == 80);
    CHECK(s1.texts.size() == 2);
    CHECK(s1.texts.id(0) == "dog");
    CHECK(s1.images.id(41) == "cat/1");
    CHECK(s1.images.meta(41).split == std::optional<std::string>("seen_out"));
    for (std::size_t i = 0; i < s1.images.size(); ++i) CHECK(std::abs(norm(s1.images.row(i)) - 1.0) <= 1e-7);
    CHECK(bits(s1.images.payload()) == bits(s2.images.payload()));
    CHECK(bits(s1.texts.payload()) == bits(s2.texts.payload()));

    auto other = cfg;
    other.seed = 43;
    CHECK(bits(synth::generate(other).images.payload()) != bits(s1.images.payload()));
}

TEST_CASE("generate: zero-noise limit reproduces the anchor") {
    const auto stores = synth::generate(two_class(1e9));
    for (std::size_t i = 0; i < stores.images.size(); ++i) {
        const auto anchor = stores.texts.row(i < 40 ? 0 : 1);
        const auto img = stores.images.row(i);
        for (std::size_t d = 0; d < 8; ++d) CHECK(std::abs(img[d] - anchor[d]) <= 1e-4);
    }
}

TEST_CASE("generate: antipodal anchors separate perfectly") {
    std::vector<double> a(8, 0.0), b(8, 0.0);
    a[0] = 1.0;
    b[0] = -1.0;
    CHECK(seen_auroc(two_class(50.0, a, b)) == 1.0);
}

TEST_CASE("property: wider anchor separation never lowers seen AUROC") {
    double previous = 0.0;
    for (double degrees : {5.0, 10.0, 20.0, 35.0, 60.0}) {
        const double th = degrees * std::numbers::pi / 180.0;
        std::vector<double> a(8, 0.0), b(8, 0.0);
        a[0] = 1.0;
        b[0] = std::cos(th);
        b[1] = std::sin(th);
        const double v = seen_auroc(two_class(3.0, a, b));
        CHECK(v >= previous);
        previous = v;
    }
    CHECK(previous > 0.9);
}

TEST_CASE("generate_boxes") {
    synth::BoxConfig cfg;
    cfg.seed = 5;
    cfg.in_labels = {"dog"};
    cfg.out_labels = {"bird", "boat"};
    cfg.pure_in = 10;
    cfg.pure_out = 10;
    cfg.mixed = 10;
    const auto corpus = synth::generate_boxes(cfg);
    REQUIRE(corpus.sets.size() == 30);
    REQUIRE(corpus.truth.size() == 30);

    const auto labels = synth::label_set(cfg);
    const ScoreConfig diff{Method::MaxLogitDiff, 1.0};
    for (std::size_t i = 0; i < corpus.sets.size(); ++i) {
        const auto& set = corpus.sets[i];
        CHECK(set.boxes.size() >= 2);
        CHECK(set.boxes.size() <= 4);
        const auto r = score_mixture(set, labels, diff);
        if (corpus.truth[i].second == MixtureTruth::Mixed) {
            CHECK(*r.g >= 2.0);
        } else {
            CHECK(*r.g == 0.0);  // zero jitter: identical boxes
        }
    }

    const auto again = synth::generate_boxes(cfg);
    std::ostringstream x, y;
    write_box_scores(x, corpus.sets);
    write_box_scores(y, again.sets);
    CHECK(x.str() == y.str());

    auto bad = cfg;
    bad.out_labels = {"dog"};
    CHECK(code_of([&] { synth::generate_boxes(bad); }) == ErrorCode::BadConfig);
}

TEST_CASE("config validation") {
    CHECK(code_of([] { synth::parse_config(nlohmann::json::parse(R"({"dim":1,"classes":[{"name":"a"}]})")); }) ==
          ErrorCode::BadConfig);
    CHECK(code_of([] {
              synth::parse_config(nlohmann::json::parse(R"({"dim":4,"classes":[{"name":"a","kappa":0}]})"));
          }) == ErrorCode::BadConfig);
    CHECK(code_of([] {
              synth::parse_config(nlohmann::json::parse(R"({"dim":4,"classes":[{"name":"a","count":0}]})"));
          }) == ErrorCode::BadConfig);
    CHECK(code_of([] {
              synth::parse_config(nlohmann::json::parse(R"({"dim":2,"classes":[{"name":"a","anchor":[1,2,3]}]})"));
          }) == ErrorCode::BadConfig);
    CHECK(code_of([] {
              synth::parse_config(nlohmann::json::parse(R"({"dim":2,"classes":[{"name":"a","anchor":"vmf"}]})"));
          }) == ErrorCode::BadConfig);

    const auto cfg = synth::parse_config(nlohmann::json::parse(R"({
        "dim": 4, "seed": 9,
        "classes": [{"name": "a", "anchor": [1, 0, 0, 0], "kappa": 10, "count": 3, "split": "seen_in"},
                    {"name": "b", "count": 2, "split": "near_out"},
                    {"name": "c", "split": "holdout"}],
        "boxes": {"in_labels": ["a"], "out_labels": ["b"], "mixed": 2}
    })"));
    CHECK(cfg.classes[0].anchor.size() == 4);
    CHECK(cfg.boxes->seed == 9);
    const auto ls = synth::label_set(cfg);
    CHECK(ls.in_classes.size() == 1);
    REQUIRE(ls.out_classes.size() == 1);
    CHECK(ls.out_classes[0].tier == Tier::Near);
}
