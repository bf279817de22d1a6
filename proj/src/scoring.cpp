#include "oca/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "oca/error.hpp"
#include "parallel.hpp"

namespace oca {

namespace {

void require_in(const JointLogits& jl) {
    if (jl.in_logits.empty()) throw Error(ErrorCode::EmptyInSet, "no in-domain logits");
}

void require_both(const JointLogits& jl) {
    require_in(jl);
    if (jl.out_logits.empty()) throw Error(ErrorCode::EmptyOutSet, "no OOD logits");
}

std::vector<double> scaled(std::span<const double> w, double temperature) {
    std::vector<double> out(w.begin(), w.end());
    for (double& x : out) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "non-finite logit");
        x /= temperature;
    }
    return out;
}

// First index wins on ties.
std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

double max_of(std::span<const double> v) { return v[argmax(v)]; }

// Softmax over in u out, shifted by the joint max. Probabilities are exp(w - shift) / total.
struct JointSoftmax {
    std::vector<double> in;
    std::vector<double> out;
    double shift = 0.0;
    double total = 0.0;

    JointSoftmax(const JointLogits& jl, double temperature)
        : in(scaled(jl.in_logits, temperature)), out(scaled(jl.out_logits, temperature)) {
        shift = max_of(in);
        if (!out.empty()) shift = std::max(shift, max_of(out));
        for (double w : in) total += std::exp(w - shift);
        for (double w : out) total += std::exp(w - shift);
    }

    double prob(double w) const { return std::exp(w - shift) / total; }
};

}  // namespace

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::NegMaxProb: return "neg_max_prob";
        case Method::SumOutProb: return "sum_out_prob";
        case Method::MaxOutProb: return "max_out_prob";
        case Method::NegMaxInProb: return "neg_max_in_prob";
        case Method::MaxLogitDiff: return "max_logit_diff";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (Method m : kAllMethods)
        if (to_string(m) == name) return m;
    throw Error(ErrorCode::UnknownMethod, "'" + std::string(name) + "'");
}

bool uses_out_set(Method m) noexcept { return m != Method::NegMaxProb; }

void check(const ScoreConfig& cfg) {
    if (!std::isfinite(cfg.temperature) || !(cfg.temperature > 0.0)) {
        throw Error(ErrorCode::BadTemperature, "temperature must be finite and > 0, got " + format_double(cfg.temperature));
    }
}

double score_neg_max_prob(const JointLogits& jl, const ScoreConfig& cfg) {
    require_in(jl);
    check(cfg);
    const JointSoftmax sm(JointLogits{jl.in_logits, {}}, cfg.temperature);
    return -sm.prob(max_of(sm.in));
}

double score_sum_out_prob(const JointLogits& jl, const ScoreConfig& cfg) {
    require_both(jl);
    check(cfg);
    const JointSoftmax sm(jl, cfg.temperature);
    double mass = 0.0;
    for (double w : sm.out) mass += std::exp(w - sm.shift);
    return mass / sm.total;
}

double score_max_out_prob(const JointLogits& jl, const ScoreConfig& cfg) {
    require_both(jl);
    check(cfg);
    const JointSoftmax sm(jl, cfg.temperature);
    return sm.prob(max_of(sm.out));
}

double score_neg_max_in_prob(const JointLogits& jl, const ScoreConfig& cfg) {
    require_both(jl);
    check(cfg);
    const JointSoftmax sm(jl, cfg.temperature);
    return -sm.prob(max_of(sm.in));
}

double score_max_logit_diff(const JointLogits& jl, const ScoreConfig& cfg) {
    require_both(jl);
    check(cfg);
    const auto in = scaled(jl.in_logits, cfg.temperature);
    const auto out = scaled(jl.out_logits, cfg.temperature);
    return max_of(out) - max_of(in);
}

double score(const JointLogits& jl, const ScoreConfig& cfg) {
    switch (cfg.method) {
        case Method::NegMaxProb: return score_neg_max_prob(jl, cfg);
        case Method::SumOutProb: return score_sum_out_prob(jl, cfg);
        case Method::MaxOutProb: return score_max_out_prob(jl, cfg);
        case Method::NegMaxInProb: return score_neg_max_in_prob(jl, cfg);
        case Method::MaxLogitDiff: return score_max_logit_diff(jl, cfg);
    }
    throw Error(ErrorCode::UnknownMethod, "unhandled method");
}

IdentityResidual identity_residual(const JointLogits& jl, const ScoreConfig& cfg) {
    IdentityResidual res;
    res.lhs = -std::log(-score_neg_max_in_prob(jl, cfg));

    const auto in = scaled(jl.in_logits, cfg.temperature);
    const auto out = scaled(jl.out_logits, cfg.temperature);
    const std::size_t q = argmax(out);
    double r = 0.0;
    for (double w : in) r += std::exp(w - out[q]);
    for (std::size_t l = 0; l < out.size(); ++l)
        if (l != q) r += std::exp(out[l] - out[q]);
    res.r = r;
    res.rhs = score_max_logit_diff(jl, cfg) + std::log1p(r);
    return res;
}

// ---------------------------------------------------------------------------

LabelEmbeddings embed_labels(const LabelSet& labels, const TextLookup& lookup) {
    LabelEmbeddings out;
    for (const ClassSpec* c : labels.scoring_in()) {
        out.in_names.push_back(c->name);
        out.in.push_back(class_embedding(*c, lookup));
    }
    for (const ClassSpec* c : labels.scoring_out()) {
        out.out_names.push_back(c->name);
        out.out.push_back(class_embedding(*c, lookup));
    }
    return out;
}

JointLogits joint_logits(const EmbeddingVector& img, const LabelEmbeddings& labels) {
    JointLogits jl;
    jl.in_logits = logits(img, labels.in, labels.in_names).values;
    jl.out_logits = logits(img, labels.out, labels.out_names).values;
    return jl;
}

std::optional<double> ScoredRecord::find(Method m) const {
    for (const auto& [method, value] : scores)
        if (method == m) return value;
    return std::nullopt;
}

ScoredRecord score_record(std::string id, std::string split, const EmbeddingVector& img,
                          const LabelEmbeddings& labels, std::span<const ScoreConfig> cfgs) {
    ScoredRecord rec{std::move(id), std::move(split), {}};
    try {
        const JointLogits jl = joint_logits(img, labels);
        for (const auto& cfg : cfgs) {
            const double s = score(jl, cfg);
            if (!std::isfinite(s)) throw Error(ErrorCode::NonFinite, std::string(to_string(cfg.method)) + " score");
            rec.scores.emplace_back(cfg.method, s);
        }
    } catch (const Error& e) {
        throw Error(e.code(), "record '" + rec.id + "': " + e.what());
    }
    return rec;
}

std::vector<ScoredRecord> score_store(const EmbeddingStore& images, const LabelEmbeddings& labels,
                                      std::span<const ScoreConfig> cfgs, std::size_t threads) {
    std::vector<ScoredRecord> out(images.size());
    detail::parallel_for(images.size(), threads, [&](std::size_t i) {
        const auto& meta = images.meta(i);
        out[i] = score_record(images.id(i), meta.split.value_or(""), images.vector(i), labels, cfgs);
    });
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_scores(std::ostream& out, std::span<const ScoredRecord> records) {
    for (const auto& rec : records) {
        out << "{\"id\":" << nlohmann::json(rec.id).dump() << ",\"split\":" << nlohmann::json(rec.split).dump()
            << ",\"scores\":{";
        for (std::size_t k = 0; k < rec.scores.size(); ++k) {
            if (k) out << ',';
            out << '"' << to_string(rec.scores[k].first) << "\":" << format_double(rec.scores[k].second);
        }
        out << "}}\n";
    }
}

std::vector<ScoredRecord> read_scores(std::istream& in) {
    std::vector<ScoredRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::ordered_json::parse(line);
            ScoredRecord rec;
            rec.id = j.at("id").get<std::string>();
            rec.split = j.contains("split") && j["split"].is_string() ? j["split"].get<std::string>() : "";
            for (const auto& [name, value] : j.at("scores").items()) {
                const double v = value.get<double>();
                if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "score " + name);
                rec.scores.emplace_back(parse_method(name), v);
            }
            out.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MissingScore, "scores line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace oca
