#include "oca/labelset.hpp"

#include <fstream>
#include <set>
#include <unordered_set>

#include "oca/error.hpp"

namespace oca {

namespace {

Tier parse_tier(const std::string& s, bool in_side, const std::string& cls) {
    if (s == "seen") return Tier::Seen;
    if (s == "unseen") return Tier::Unseen;
    if (s == "near" && !in_side) return Tier::Near;
    throw Error(ErrorCode::BadLabelConfig,
                "class '" + cls + "' has tier '" + s + "' not allowed on the " + (in_side ? "in" : "out") + " side");
}

std::vector<ClassSpec> parse_side(const nlohmann::json& arr, bool in_side) {
    if (!arr.is_array()) {
        throw Error(ErrorCode::BadLabelConfig, std::string("'") + (in_side ? "in" : "out") + "' must be an array");
    }
    std::vector<ClassSpec> out;
    for (const auto& item : arr) {
        ClassSpec spec;
        if (item.is_string()) {
            spec.name = item.get<std::string>();
        } else if (item.is_object() && item.contains("name") && item["name"].is_string()) {
            spec.name = item["name"].get<std::string>();
            if (item.contains("prompts")) {
                if (!item["prompts"].is_array()) {
                    throw Error(ErrorCode::BadLabelConfig, "prompts of '" + spec.name + "' must be an array");
                }
                for (const auto& p : item["prompts"]) {
                    if (!p.is_string()) {
                        throw Error(ErrorCode::BadLabelConfig, "non-string prompt in '" + spec.name + "'");
                    }
                    spec.prompts.push_back(p.get<std::string>());
                }
            }
            if (item.contains("tier")) spec.tier = parse_tier(item["tier"].get<std::string>(), in_side, spec.name);
        } else {
            throw Error(ErrorCode::BadLabelConfig, "class entry needs a string 'name'");
        }
        out.push_back(std::move(spec));
    }
    return out;
}

std::size_t count_placeholders(const std::string& s) {
    std::size_t n = 0;
    for (auto pos = s.find("{}"); pos != std::string::npos; pos = s.find("{}", pos + 2)) ++n;
    return n;
}

}  // namespace

std::string_view to_string(Tier tier) noexcept {
    switch (tier) {
        case Tier::Seen: return "seen";
        case Tier::Unseen: return "unseen";
        case Tier::Near: return "near";
    }
    return "seen";
}

std::string_view to_string(Violation::Kind kind) noexcept {
    switch (kind) {
        case Violation::Kind::EmptyIn: return "empty_in";
        case Violation::Kind::EmptyOut: return "empty_out";
        case Violation::Kind::DuplicateName: return "duplicate_name";
        case Violation::Kind::InOutOverlap: return "in_out_overlap";
        case Violation::Kind::BadPrompt: return "bad_prompt";
    }
    return "unknown";
}

std::string expand_prompt(const std::string& tmpl, const std::string& name) {
    const auto pos = tmpl.find("{}");
    if (pos == std::string::npos) return tmpl;
    std::string out = tmpl;
    out.replace(pos, 2, name);
    return out;
}

std::vector<std::string> ClassSpec::expanded_prompts() const {
    if (prompts.empty()) return {name};
    std::vector<std::string> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(expand_prompt(p, name));
    return out;
}

std::vector<const ClassSpec*> LabelSet::scoring_in() const {
    std::vector<const ClassSpec*> out;
    for (const auto& c : in_classes)
        if (c.tier == Tier::Seen) out.push_back(&c);
    return out;
}

std::vector<const ClassSpec*> LabelSet::scoring_out() const {
    std::vector<const ClassSpec*> out;
    for (const auto& c : out_classes)
        if (c.tier != Tier::Unseen) out.push_back(&c);
    return out;
}

SplitSpec split_spec(const LabelSet& labels) {
    SplitSpec s;
    for (const auto& c : labels.in_classes) (c.tier == Tier::Seen ? s.seen_in : s.unseen_in).push_back(c.name);
    for (const auto& c : labels.out_classes) {
        switch (c.tier) {
            case Tier::Seen: s.seen_out.push_back(c.name); break;
            case Tier::Unseen: s.unseen_out.push_back(c.name); break;
            case Tier::Near: s.near_out.push_back(c.name); break;
        }
    }
    return s;
}

TextLookup store_lookup(const EmbeddingStore& texts) {
    return [&texts](const std::string& key) -> std::optional<EmbeddingVector> {
        if (auto i = texts.find(key)) return texts.vector(*i);
        return std::nullopt;
    };
}

EmbeddingVector class_embedding(const ClassSpec& spec, const TextLookup& lookup) {
    std::vector<double> sum;
    const auto prompts = spec.expanded_prompts();
    for (const auto& p : prompts) {
        auto v = lookup(p);
        if (!v) {
            throw Error(ErrorCode::MissingTextEmbedding,
                        "no text embedding for '" + p + "' (class '" + spec.name + "')");
        }
        if (sum.empty()) sum.assign(v->size(), 0.0);
        if (v->size() != sum.size()) {
            throw Error(ErrorCode::DimensionMismatch, "prompt '" + p + "' of class '" + spec.name + "'");
        }
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += (*v)[k];
    }
    const auto n = static_cast<double>(prompts.size());
    for (double& x : sum) x /= n;
    return normalize(std::span<const double>(sum));
}

std::pair<std::vector<std::string>, std::vector<std::string>> halves_split(
    const std::vector<std::string>& class_names) {
    const auto cut = static_cast<std::ptrdiff_t>((class_names.size() + 1) / 2);
    return {{class_names.begin(), class_names.begin() + cut}, {class_names.begin() + cut, class_names.end()}};
}

std::vector<Violation> validate(const LabelSet& labels) {
    std::vector<Violation> out;
    if (labels.scoring_in().empty()) {
        out.push_back({Violation::Kind::EmptyIn, "no seen in-domain classes"});
    }
    if (labels.scoring_out().empty()) {
        out.push_back({Violation::Kind::EmptyOut, "no seen or near OOD classes"});
    }
    auto check_side = [&](const std::vector<ClassSpec>& side, const char* which, std::set<std::string>& names) {
        for (const auto& c : side) {
            if (!names.insert(c.name).second) {
                out.push_back({Violation::Kind::DuplicateName, std::string(which) + ": '" + c.name + "'"});
            }
            for (const auto& p : c.prompts) {
                if (count_placeholders(p) > 1) {
                    out.push_back({Violation::Kind::BadPrompt, "'" + c.name + "': '" + p + "' has more than one {}"});
                }
            }
        }
    };
    std::set<std::string> in_names, out_names;
    check_side(labels.in_classes, "in", in_names);
    check_side(labels.out_classes, "out", out_names);
    for (const auto& n : in_names) {
        if (out_names.count(n)) out.push_back({Violation::Kind::InOutOverlap, "'" + n + "' is both in and out"});
    }
    return out;
}

LabelSet parse_label_config(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::BadLabelConfig, "label config must be a JSON object");
    LabelSet ls;
    ls.name = j.value("name", std::string{});
    ls.in_classes = parse_side(j.value("in", nlohmann::json::array()), true);
    ls.out_classes = parse_side(j.value("out", nlohmann::json::array()), false);
    return ls;
}

LabelSet load_label_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::BadLabelConfig, "cannot open " + path.string());
    try {
        return parse_label_config(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadLabelConfig, path.string() + ": " + e.what());
    }
}

nlohmann::ordered_json to_json(const LabelSet& labels) {
    auto side = [](const std::vector<ClassSpec>& classes) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& c : classes) {
            nlohmann::ordered_json item;
            item["name"] = c.name;
            item["prompts"] = c.prompts;
            item["tier"] = std::string(to_string(c.tier));
            arr.push_back(std::move(item));
        }
        return arr;
    };
    nlohmann::ordered_json j;
    j["name"] = labels.name;
    j["in"] = side(labels.in_classes);
    j["out"] = side(labels.out_classes);
    return j;
}

}  // namespace oca
