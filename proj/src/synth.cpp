#include "oca/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "oca/error.hpp"

namespace oca::synth {

namespace {

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::vector<double> gaussian_vector(Rng& rng, std::size_t dim, double scale) {
    std::vector<double> v(dim);
    for (double& x : v) x = scale * rng.gaussian();
    return v;
}

void bad(const std::string& what) { throw Error(ErrorCode::BadConfig, what); }

std::vector<double> box_pattern(Rng& rng, std::size_t n_labels, std::size_t own, const BoxConfig& cfg, double jitter) {
    std::vector<double> row(n_labels, cfg.base);
    row[own] += cfg.margin;
    if (jitter > 0.0)
        for (double& x : row) x += jitter * rng.gaussian();
    return row;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
    for (auto& word : s_) word = splitmix64(seed);
}

std::uint64_t Rng::next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection keeps the result unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return x % n;
}

// ---------------------------------------------------------------------------

void check(const SynthConfig& cfg) {
    if (!cfg.classes.empty() && cfg.dim < 2) bad("dim must be >= 2");
    std::set<std::string> names;
    for (const auto& c : cfg.classes) {
        if (c.name.empty()) bad("class with empty name");
        if (!names.insert(c.name).second) bad("class '" + c.name + "' listed twice");
        if (c.count < 1) bad("class '" + c.name + "': count must be >= 1");
        if (!(c.kappa > 0.0) || !std::isfinite(c.kappa)) bad("class '" + c.name + "': kappa must be > 0");
        if (!c.anchor.empty()) {
            if (c.anchor.size() != cfg.dim) bad("class '" + c.name + "': anchor length != dim");
            double n2 = 0.0;
            for (double x : c.anchor) {
                if (!std::isfinite(x)) bad("class '" + c.name + "': non-finite anchor");
                n2 += x * x;
            }
            if (!(n2 > 0.0)) bad("class '" + c.name + "': zero anchor");
        }
    }
    if (cfg.boxes) {
        const auto& b = *cfg.boxes;
        if (b.in_labels.empty() || b.out_labels.empty()) bad("boxes: need in_labels and out_labels");
        std::set<std::string> labels(b.in_labels.begin(), b.in_labels.end());
        labels.insert(b.out_labels.begin(), b.out_labels.end());
        if (labels.size() != b.in_labels.size() + b.out_labels.size()) bad("boxes: label names must be unique");
        if (b.pure_in < 0 || b.pure_out < 0 || b.mixed < 0) bad("boxes: image counts must be >= 0");
        if (b.boxes_min < 1 || b.boxes_max < b.boxes_min) bad("boxes: need 1 <= boxes_min <= boxes_max");
        if (b.mixed > 0 && b.boxes_max < 2) bad("boxes: mixed images need boxes_max >= 2");
        if (!(b.margin >= 0.0) || !(b.jitter >= 0.0) || !(b.image_jitter >= 0.0)) {
            bad("boxes: margin, jitter and image_jitter must be >= 0");
        }
    }
}

SynthConfig parse_config(const nlohmann::json& j) {
    SynthConfig cfg;
    try {
        cfg.dim = j.value("dim", 0u);
        cfg.seed = j.value("seed", std::uint64_t{0});
        for (const auto& jc : j.value("classes", nlohmann::json::array())) {
            ClassConfig c;
            c.name = jc.at("name").get<std::string>();
            const auto anchor = jc.value("anchor", nlohmann::json("random_unit"));
            if (anchor.is_array()) {
                c.anchor = anchor.get<std::vector<double>>();
            } else if (anchor != "random_unit") {
                bad("class '" + c.name + "': anchor must be \"random_unit\" or a vector");
            }
            c.kappa = jc.value("kappa", 20.0);
            c.count = jc.value("count", 1);
            c.split = jc.value("split", std::string{});
            cfg.classes.push_back(std::move(c));
        }
        if (j.contains("boxes")) {
            const auto& jb = j["boxes"];
            BoxConfig b;
            b.seed = jb.value("seed", cfg.seed);
            b.in_labels = jb.at("in_labels").get<std::vector<std::string>>();
            b.out_labels = jb.at("out_labels").get<std::vector<std::string>>();
            b.pure_in = jb.value("pure_in", 0);
            b.pure_out = jb.value("pure_out", 0);
            b.mixed = jb.value("mixed", 0);
            b.boxes_min = jb.value("boxes_min", b.boxes_min);
            b.boxes_max = jb.value("boxes_max", b.boxes_max);
            b.margin = jb.value("margin", b.margin);
            b.base = jb.value("base", b.base);
            b.jitter = jb.value("jitter", b.jitter);
            b.image_jitter = jb.value("image_jitter", b.image_jitter);
            cfg.boxes = std::move(b);
        }
    } catch (const nlohmann::json::exception& e) {
        bad(e.what());
    }
    check(cfg);
    return cfg;
}

SynthConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) bad("cannot open " + path.string());
    try {
        return parse_config(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::BadConfig, path.string() + ": " + e.what());
    }
}

SynthStores generate(const SynthConfig& cfg) {
    check(cfg);
    if (cfg.classes.empty()) bad("no classes to generate");
    Rng rng(cfg.seed);

    std::vector<EmbeddingVector> anchors;
    anchors.reserve(cfg.classes.size());
    for (const auto& c : cfg.classes) {
        if (c.anchor.empty()) {
            anchors.push_back(normalize(std::span<const double>(gaussian_vector(rng, cfg.dim, 1.0))));
        } else {
            anchors.push_back(normalize(std::span<const double>(c.anchor)));
        }
    }

    EmbeddingStore::Builder images(cfg.dim);
    EmbeddingStore::Builder texts(cfg.dim);
    for (std::size_t k = 0; k < cfg.classes.size(); ++k) {
        const auto& c = cfg.classes[k];
        texts.add(c.name, anchors[k], RecordMeta{c.name, c.split, nlohmann::json::object()});
        for (int i = 0; i < c.count; ++i) {
            auto v = gaussian_vector(rng, cfg.dim, 1.0 / c.kappa);
            for (std::size_t d = 0; d < cfg.dim; ++d) v[d] += anchors[k][d];
            images.add(c.name + "/" + std::to_string(i), normalize(std::span<const double>(v)),
                       RecordMeta{c.name, c.split, nlohmann::json::object()});
        }
    }
    return {std::move(images).build(), std::move(texts).build()};
}

SynthBoxes generate_boxes(const BoxConfig& cfg) {
    SynthConfig wrapper;
    wrapper.boxes = cfg;
    check(wrapper);

    Rng rng(cfg.seed);
    std::vector<std::string> label_order = cfg.in_labels;
    label_order.insert(label_order.end(), cfg.out_labels.begin(), cfg.out_labels.end());
    const std::size_t n_in = cfg.in_labels.size();
    const std::size_t n_out = cfg.out_labels.size();

    auto pick = [&](bool in_side) {
        return in_side ? rng.below(n_in) : n_in + rng.below(n_out);
    };
    auto random_bbox = [&] {
        const double x0 = 600.0 * rng.uniform();
        const double y0 = 440.0 * rng.uniform();
        return std::array<double, 4>{x0, y0, x0 + 16.0 + 200.0 * rng.uniform(), y0 + 16.0 + 200.0 * rng.uniform()};
    };

    SynthBoxes out;
    auto emit = [&](MixtureTruth truth, int count) {
        for (int i = 0; i < count; ++i) {
            BoxScoreSet set;
            set.image_id = std::string(to_string(truth)) + "-" + std::to_string(i);
            set.label_order = label_order;
            const int lo = truth == MixtureTruth::Mixed ? std::max(2, cfg.boxes_min) : cfg.boxes_min;
            const auto k = static_cast<std::size_t>(lo + static_cast<int>(rng.below(cfg.boxes_max - lo + 1)));

            std::vector<std::size_t> owners(k);
            if (truth == MixtureTruth::Mixed) {
                owners[0] = pick(true);
                owners[1] = pick(false);
                for (std::size_t b = 2; b < k; ++b) owners[b] = pick(rng.below(2) == 0);
            } else {
                const std::size_t own = pick(truth == MixtureTruth::PureIn);
                std::fill(owners.begin(), owners.end(), own);
            }
            for (std::size_t owner : owners) {
                set.boxes.push_back(Box{random_bbox(), box_pattern(rng, label_order.size(), owner, cfg, cfg.jitter)});
            }
            // owners[0] is the in-domain object for mixed images.
            set.image_scores = box_pattern(rng, label_order.size(), owners[0], cfg, cfg.image_jitter);
            out.truth.emplace_back(set.image_id, truth);
            out.sets.push_back(std::move(set));
        }
    };
    emit(MixtureTruth::PureIn, cfg.pure_in);
    emit(MixtureTruth::PureOut, cfg.pure_out);
    emit(MixtureTruth::Mixed, cfg.mixed);
    return out;
}

LabelSet label_set(const SynthConfig& cfg, const std::string& name) {
    LabelSet ls;
    ls.name = name;
    for (const auto& c : cfg.classes) {
        if (c.split == "seen_in") ls.in_classes.push_back({c.name, {}, Tier::Seen});
        else if (c.split == "unseen_in") ls.in_classes.push_back({c.name, {}, Tier::Unseen});
        else if (c.split == "seen_out") ls.out_classes.push_back({c.name, {}, Tier::Seen});
        else if (c.split == "unseen_out") ls.out_classes.push_back({c.name, {}, Tier::Unseen});
        else if (c.split == "near_out") ls.out_classes.push_back({c.name, {}, Tier::Near});
    }
    return ls;
}

LabelSet label_set(const BoxConfig& cfg, const std::string& name) {
    LabelSet ls;
    ls.name = name;
    for (const auto& n : cfg.in_labels) ls.in_classes.push_back({n, {}, Tier::Seen});
    for (const auto& n : cfg.out_labels) ls.out_classes.push_back({n, {}, Tier::Seen});
    return ls;
}

}  // namespace oca::synth
