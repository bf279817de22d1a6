#include "oca/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "oca/error.hpp"

namespace oca {

namespace {

void check_finite(std::span<const double> v, const std::string& what) {
    for (double x : v)
        if (!std::isfinite(x)) throw Error(ErrorCode::BadBox, what + " has a non-finite value");
}

std::string json_list(std::span<const double> v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += format_double(v[i]);
    }
    return s + "]";
}

}  // namespace

void check(const BoxScoreSet& set) {
    const auto n = set.label_order.size();
    for (std::size_t i = 0; i < set.boxes.size(); ++i) {
        const auto& b = set.boxes[i];
        const std::string where = "image '" + set.image_id + "' box " + std::to_string(i);
        if (b.scores.size() != n) {
            throw Error(ErrorCode::BadBox, where + " has " + std::to_string(b.scores.size()) + " scores for " +
                                               std::to_string(n) + " labels");
        }
        check_finite(b.scores, where);
        check_finite(b.bbox, where + " bbox");
        if (!(b.bbox[0] < b.bbox[2]) || !(b.bbox[1] < b.bbox[3])) {
            throw Error(ErrorCode::BadBox, where + " is degenerate (need x0<x1, y0<y1)");
        }
    }
    if (set.image_scores) {
        if (set.image_scores->size() != n) {
            throw Error(ErrorCode::BadBox, "image '" + set.image_id + "' image_scores misaligned with label_order");
        }
        check_finite(*set.image_scores, "image '" + set.image_id + "' image_scores");
    }
}

JointLogits split_logits(std::span<const double> row, const std::vector<std::string>& label_order,
                         const LabelSet& labels) {
    if (row.size() != label_order.size()) {
        throw Error(ErrorCode::LabelOrderMismatch, "logit row and label_order differ in length");
    }
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < label_order.size(); ++i) {
        if (!position.emplace(label_order[i], i).second) {
            throw Error(ErrorCode::LabelOrderMismatch, "label '" + label_order[i] + "' repeated");
        }
    }
    JointLogits jl;
    std::size_t used = 0;
    auto take = [&](const std::vector<const ClassSpec*>& side, std::vector<double>& dst) {
        for (const ClassSpec* c : side) {
            auto it = position.find(c->name);
            if (it == position.end()) {
                throw Error(ErrorCode::LabelOrderMismatch, "label set class '" + c->name + "' not in label_order");
            }
            dst.push_back(row[it->second]);
            ++used;
        }
    };
    take(labels.scoring_in(), jl.in_logits);
    take(labels.scoring_out(), jl.out_logits);
    if (used != label_order.size()) {
        throw Error(ErrorCode::LabelOrderMismatch, "label_order has labels outside the scoring label set");
    }
    return jl;
}

std::vector<double> box_scores(const BoxScoreSet& set, const LabelSet& labels, const ScoreConfig& cfg) {
    check(set);
    std::vector<double> out;
    out.reserve(set.boxes.size());
    for (const auto& b : set.boxes) out.push_back(score(split_logits(b.scores, set.label_order, labels), cfg));
    return out;
}

double mixture_score(std::span<const double> per_box) {
    if (per_box.size() < 2) {
        throw Error(ErrorCode::TooFewBoxes, "mixture score needs >= 2 boxes, got " + std::to_string(per_box.size()));
    }
    const auto [lo, hi] = std::minmax_element(per_box.begin(), per_box.end());
    return *hi - *lo;
}

std::string_view to_string(MixtureTruth t) noexcept {
    switch (t) {
        case MixtureTruth::PureIn: return "pure_in";
        case MixtureTruth::PureOut: return "pure_out";
        case MixtureTruth::Mixed: return "mixed";
    }
    return "mixed";
}

MixtureTruth parse_truth(std::string_view s) {
    if (s == "pure_in") return MixtureTruth::PureIn;
    if (s == "pure_out") return MixtureTruth::PureOut;
    if (s == "mixed") return MixtureTruth::Mixed;
    throw Error(ErrorCode::UnlabeledImage, "unknown truth label '" + std::string(s) + "'");
}

MixtureResult score_mixture(const BoxScoreSet& set, const LabelSet& labels, const ScoreConfig& cfg) {
    MixtureResult r;
    r.image_id = set.image_id;
    try {
        r.per_box_scores = box_scores(set, labels, cfg);
        if (r.per_box_scores.size() >= 2) r.g = mixture_score(r.per_box_scores);
        if (set.image_scores) r.image_score = score(split_logits(*set.image_scores, set.label_order, labels), cfg);
    } catch (const Error& e) {
        throw Error(e.code(), "image '" + set.image_id + "': " + e.what());
    }
    return r;
}

std::vector<BoxScoreSet> read_box_scores(std::istream& in) {
    std::vector<BoxScoreSet> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            BoxScoreSet set;
            set.image_id = j.at("image_id").get<std::string>();
            set.label_order = j.at("label_order").get<std::vector<std::string>>();
            for (const auto& jb : j.at("boxes")) {
                Box b;
                const auto bbox = jb.at("bbox").get<std::vector<double>>();
                if (bbox.size() != 4) throw Error(ErrorCode::BadBox, "bbox needs 4 coordinates");
                std::copy(bbox.begin(), bbox.end(), b.bbox.begin());
                b.scores = jb.at("scores").get<std::vector<double>>();
                set.boxes.push_back(std::move(b));
            }
            if (j.contains("image_scores") && !j["image_scores"].is_null()) {
                set.image_scores = j["image_scores"].get<std::vector<double>>();
            }
            check(set);
            out.push_back(std::move(set));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::BadBox, "box-score line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_box_scores(std::ostream& out, std::span<const BoxScoreSet> sets) {
    for (const auto& set : sets) {
        out << "{\"image_id\":" << nlohmann::json(set.image_id).dump()
            << ",\"label_order\":" << nlohmann::json(set.label_order).dump() << ",\"boxes\":[";
        for (std::size_t i = 0; i < set.boxes.size(); ++i) {
            if (i) out << ',';
            out << "{\"bbox\":" << json_list(set.boxes[i].bbox) << ",\"scores\":" << json_list(set.boxes[i].scores)
                << '}';
        }
        out << ']';
        if (set.image_scores) out << ",\"image_scores\":" << json_list(*set.image_scores);
        out << "}\n";
    }
}

void write_mixture_results(std::ostream& out, std::span<const MixtureResult> results, const ScoreConfig& cfg) {
    for (const auto& r : results) {
        out << "{\"image_id\":" << nlohmann::json(r.image_id).dump() << ",\"method\":\"" << to_string(cfg.method)
            << "\",\"per_box\":" << json_list(r.per_box_scores)
            << ",\"g\":" << (r.g ? format_double(*r.g) : std::string("null"));
        if (r.image_score) out << ",\"image_score\":" << format_double(*r.image_score);
        out << "}\n";
    }
}

}  // namespace oca
