#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "oca/error.hpp"
#include "oca/labelset.hpp"
#include "oracles.hpp"

using namespace oca;

namespace {

EmbeddingVector unit(std::vector<double> v) { return normalize(std::span<const double>(v)); }

TextLookup map_lookup(const std::map<std::string, EmbeddingVector>& m) {
    return [&m](const std::string& key) -> std::optional<EmbeddingVector> {
        auto it = m.find(key);
        if (it == m.end()) return std::nullopt;
        return it->second;
    };
}

bool has(const std::vector<Violation>& vs, Violation::Kind k) {
    return std::any_of(vs.begin(), vs.end(), [k](const Violation& v) { return v.kind == k; });
}

}  // namespace

TEST_CASE("class_embedding: bare name when there are no prompts") {
    std::map<std::string, EmbeddingVector> texts = {{"dog", unit({0.6, 0.8})}};
    const auto v = class_embedding(ClassSpec{"dog", {}, Tier::Seen}, map_lookup(texts));
    CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("class_embedding: symmetric mean is renormalized") {
    std::map<std::string, EmbeddingVector> texts = {{"a photo of a dog", unit({1, 0})},
                                                    {"a drawing of a dog", unit({0, 1})}};
    const ClassSpec spec{"dog", {"a photo of a {}", "a drawing of a {}"}, Tier::Seen};
    const auto v = class_embedding(spec, map_lookup(texts));
    CHECK(v[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    CHECK(v[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
}

TEST_CASE("class_embedding: missing prompt is named in the error") {
    std::map<std::string, EmbeddingVector> texts = {{"a photo of a dog", unit({1, 0})}};
    const ClassSpec spec{"dog", {"a photo of a {}", "a sketch of a {}"}, Tier::Seen};
    try {
        class_embedding(spec, map_lookup(texts));
        FAIL("expected MissingTextEmbedding");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingTextEmbedding);
        CHECK(std::string(e.what()).find("a sketch of a dog") != std::string::npos);
    }
}

TEST_CASE("class_embedding: 80-prompt ensemble matches naive accumulate/divide/normalize") {
    std::mt19937_64 rng(80);
    for (int trial = 0; trial < 10; ++trial) {
        std::map<std::string, EmbeddingVector> texts;
        std::vector<std::vector<double>> raw;
        ClassSpec spec{"husky", {}, Tier::Seen};
        for (int p = 0; p < 80; ++p) {
            const std::string tmpl = "template " + std::to_string(p) + " of a {}";
            spec.prompts.push_back(tmpl);
            raw.push_back(oracle::random_unit(rng, 32));
            texts.emplace(expand_prompt(tmpl, "husky"), unit(raw.back()));
        }
        const auto v = class_embedding(spec, map_lookup(texts));

        std::vector<double> acc(32, 0.0);
        for (const auto& r : raw) {
            const auto n = oracle::naive_normalize(r);
            for (int k = 0; k < 32; ++k) acc[k] += n[k];
        }
        for (double& x : acc) x /= 80.0;
        const auto expect = oracle::naive_normalize(acc);
        for (int k = 0; k < 32; ++k) CHECK(std::abs(v[k] - expect[k]) <= 1e-12);

        double n2 = 0.0;
        for (double x : v.values()) n2 += x * x;
        CHECK(std::abs(std::sqrt(n2) - 1.0) <= 1e-7);

        // Shuffled prompt order gives the same class embedding.
        auto shuffled = spec;
        std::shuffle(shuffled.prompts.begin(), shuffled.prompts.end(), rng);
        const auto w = class_embedding(shuffled, map_lookup(texts));
        for (int k = 0; k < 32; ++k) CHECK(std::abs(v[k] - w[k]) <= 1e-12);
    }
}

TEST_CASE("expand_prompt substitutes the first placeholder only") {
    CHECK(expand_prompt("a photo of a {}", "dog") == "a photo of a dog");
    CHECK(expand_prompt("a photo of a {} running", "dog") == "a photo of a dog running");
    CHECK(expand_prompt("no placeholder", "dog") == "no placeholder");
    CHECK(ClassSpec{"dog", {}, Tier::Seen}.expanded_prompts() == std::vector<std::string>{"dog"});
}

TEST_CASE("halves_split") {
    using V = std::vector<std::string>;
    CHECK(halves_split(V{"a", "b", "c", "d"}) == std::pair{V{"a", "b"}, V{"c", "d"}});
    CHECK(halves_split(V{"a", "b", "c"}) == std::pair{V{"a", "b"}, V{"c"}});
    CHECK(halves_split(V{"a"}) == std::pair{V{"a"}, V{}});

    V dogs;
    for (int i = 0; i < 118; ++i) dogs.push_back("dog" + std::to_string(i));
    const auto [first, second] = halves_split(dogs);
    CHECK(first.size() == 59);
    CHECK(second.size() == 59);
    V joined = first;
    joined.insert(joined.end(), second.begin(), second.end());
    CHECK(joined == dogs);
    CHECK(halves_split(dogs) == halves_split(dogs));
}

TEST_CASE("validate") {
    LabelSet ok{"ok", {{"dog", {}, Tier::Seen}}, {{"cat", {}, Tier::Seen}}};
    CHECK(validate(ok).empty());

    LabelSet overlap{"overlap", {{"dog", {}, Tier::Seen}}, {{"dog", {}, Tier::Seen}}};
    CHECK(has(validate(overlap), Violation::Kind::InOutOverlap));

    LabelSet empty_in{"empty", {}, {{"cat", {}, Tier::Seen}}};
    CHECK(has(validate(empty_in), Violation::Kind::EmptyIn));

    LabelSet only_unseen_in{"u", {{"dog", {}, Tier::Unseen}}, {{"cat", {}, Tier::Seen}}};
    CHECK(has(validate(only_unseen_in), Violation::Kind::EmptyIn));

    LabelSet no_out{"no-out", {{"dog", {}, Tier::Seen}}, {}};
    const auto v = validate(no_out);
    CHECK(v.size() == 1);
    CHECK(has(v, Violation::Kind::EmptyOut));

    LabelSet dup{"dup", {{"dog", {}, Tier::Seen}, {"dog", {}, Tier::Unseen}}, {{"cat", {}, Tier::Seen}}};
    CHECK(has(validate(dup), Violation::Kind::DuplicateName));

    LabelSet prompts{"p", {{"dog", {"{} and {}"}, Tier::Seen}}, {{"cat", {}, Tier::Seen}}};
    CHECK(has(validate(prompts), Violation::Kind::BadPrompt));

    // Hierarchy levels may coexist: identity is the exact string.
    LabelSet levels{"levels", {{"terrier", {}, Tier::Seen}, {"Boston terrier", {}, Tier::Seen}},
                    {{"cat", {}, Tier::Seen}}};
    CHECK(validate(levels).empty());
}

TEST_CASE("label config parsing, tiers and split spec") {
    const auto j = nlohmann::json::parse(R"({
        "name": "dogs",
        "in": [{"name": "husky", "prompts": ["a photo of a {}"], "tier": "seen"},
               {"name": "pug", "tier": "unseen"}],
        "out": [{"name": "cat"}, {"name": "wolf", "tier": "near"}, {"name": "violin", "tier": "unseen"}]
    })");
    const auto ls = parse_label_config(j);
    CHECK(ls.name == "dogs");
    REQUIRE(ls.in_classes.size() == 2);
    CHECK(ls.in_classes[0].prompts == std::vector<std::string>{"a photo of a {}"});
    CHECK(ls.scoring_in().size() == 1);
    CHECK(ls.scoring_out().size() == 2);  // seen + near

    const auto s = split_spec(ls);
    CHECK(s.seen_in == std::vector<std::string>{"husky"});
    CHECK(s.unseen_in == std::vector<std::string>{"pug"});
    CHECK(s.seen_out == std::vector<std::string>{"cat"});
    CHECK(s.near_out == std::vector<std::string>{"wolf"});
    CHECK(s.unseen_out == std::vector<std::string>{"violin"});

    CHECK(parse_label_config(nlohmann::json::parse(to_json(ls).dump())).in_classes[1].tier == Tier::Unseen);

    const auto near_in = nlohmann::json::parse(R"({"name":"x","in":[{"name":"a","tier":"near"}],"out":[]})");
    try {
        parse_label_config(near_in);
        FAIL("near tier on the in side must be rejected");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadLabelConfig);
    }
}
