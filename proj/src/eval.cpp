#include "oca/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "oca/error.hpp"

namespace oca {

double auroc(std::span<const double> ood_scores, std::span<const double> in_scores) {
    if (ood_scores.empty() || in_scores.empty()) {
        throw Error(ErrorCode::EmptyList, "auroc needs at least one OOD and one in-domain score");
    }
    struct Item {
        double score;
        bool ood;
    };
    std::vector<Item> items;
    items.reserve(ood_scores.size() + in_scores.size());
    for (double s : ood_scores) items.push_back({s, true});
    for (double s : in_scores) items.push_back({s, false});
    for (const auto& it : items)
        if (!std::isfinite(it.score)) throw Error(ErrorCode::NonFinite, "auroc input");
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

    // Twice the OOD rank sum, using midranks for tie groups: a group spanning
    // 1-based ranks [lo, hi] gives each member rank (lo + hi) / 2.
    std::int64_t twice_rank_sum = 0;
    for (std::size_t i = 0; i < items.size();) {
        std::size_t j = i;
        std::int64_t ood_in_group = 0;
        while (j < items.size() && items[j].score == items[i].score) {
            ood_in_group += items[j].ood ? 1 : 0;
            ++j;
        }
        twice_rank_sum += ood_in_group * static_cast<std::int64_t>((i + 1) + j);
        i = j;
    }
    const auto n = static_cast<std::int64_t>(ood_scores.size());
    const auto m = static_cast<std::int64_t>(in_scores.size());
    const std::int64_t twice_u = twice_rank_sum - n * (n + 1);
    const double u = static_cast<double>(twice_u) / 2.0;
    return u / (static_cast<double>(n) * static_cast<double>(m));
}

namespace {

std::vector<std::string> split_list(const nlohmann::json& v, const std::string& task) {
    if (v.is_string()) return {v.get<std::string>()};
    if (v.is_array() && !v.empty()) {
        std::vector<std::string> out;
        for (const auto& s : v) {
            if (!s.is_string()) throw Error(ErrorCode::BadTask, "task '" + task + "': split tags must be strings");
            out.push_back(s.get<std::string>());
        }
        return out;
    }
    throw Error(ErrorCode::BadTask, "task '" + task + "': split must be a string or non-empty array");
}

TaskResult evaluate(const std::string& name, Method method, std::span<const double> pos, std::span<const double> neg) {
    return TaskResult{name, method, auroc(pos, neg), pos.size(), neg.size()};
}

}  // namespace

EvalReport run_tasks(std::span<const ScoredRecord> records, std::span<const EvalTask> tasks) {
    EvalReport report;
    for (const auto& r : records) ++report.split_counts[r.split];

    for (const auto& task : tasks) {
        auto collect = [&](const std::vector<std::string>& splits) {
            for (const auto& s : splits) {
                if (!report.split_counts.count(s)) {
                    throw Error(ErrorCode::UnknownSplit, "task '" + task.name + "' names split '" + s +
                                                             "' that no record carries");
                }
            }
            std::vector<double> out;
            for (const auto& r : records) {
                if (std::find(splits.begin(), splits.end(), r.split) == splits.end()) continue;
                auto v = r.find(task.method);
                if (!v) {
                    throw Error(ErrorCode::MissingScore, "record '" + r.id + "' has no " +
                                                             std::string(to_string(task.method)) + " score");
                }
                out.push_back(*v);
            }
            return out;
        };
        const auto pos = collect(task.positive);
        const auto neg = collect(task.negative);
        report.tasks.push_back(evaluate(task.name, task.method, pos, neg));
    }
    return report;
}

std::vector<EvalTask> parse_tasks(const nlohmann::json& j) {
    const auto& arr = j.is_object() && j.contains("tasks") ? j["tasks"] : j;
    if (!arr.is_array()) throw Error(ErrorCode::BadTask, "tasks must be an array");
    std::vector<EvalTask> out;
    for (const auto& t : arr) {
        if (!t.is_object()) throw Error(ErrorCode::BadTask, "task entries must be objects");
        EvalTask task;
        task.name = t.value("name", std::string{});
        if (!t.contains("positive") || !t.contains("negative")) {
            throw Error(ErrorCode::BadTask, "task '" + task.name + "' needs 'positive' and 'negative'");
        }
        task.positive = split_list(t["positive"], task.name);
        task.negative = split_list(t["negative"], task.name);
        for (const auto& p : task.positive) {
            if (std::find(task.negative.begin(), task.negative.end(), p) != task.negative.end()) {
                throw Error(ErrorCode::BadTask, "task '" + task.name + "': split '" + p + "' on both sides");
            }
        }
        // A task without a method, or with a list, expands to one task per method.
        std::vector<Method> methods;
        if (!t.contains("method")) {
            methods.assign(kAllMethods.begin(), kAllMethods.end());
        } else if (t["method"].is_array()) {
            for (const auto& m : t["method"]) methods.push_back(parse_method(m.get<std::string>()));
        } else if (t["method"].is_string()) {
            methods.push_back(parse_method(t["method"].get<std::string>()));
        } else {
            throw Error(ErrorCode::BadTask, "task '" + task.name + "': bad method");
        }
        for (Method m : methods) {
            task.method = m;
            out.push_back(task);
        }
    }
    return out;
}

EvalReport mixture_eval(std::span<const MixtureResult> results, const TruthMap& truth, Method method) {
    EvalReport report;
    std::vector<double> g_in, g_out, g_mixed, s_in, s_out, s_mixed;
    bool have_single = !results.empty();
    for (const auto& r : results) {
        auto it = truth.find(r.image_id);
        if (it == truth.end()) throw Error(ErrorCode::UnlabeledImage, "no ground truth for image '" + r.image_id + "'");
        ++report.split_counts[std::string(to_string(it->second))];
        auto push = [&](std::vector<double>& in, std::vector<double>& out, std::vector<double>& mixed, double v) {
            switch (it->second) {
                case MixtureTruth::PureIn: in.push_back(v); break;
                case MixtureTruth::PureOut: out.push_back(v); break;
                case MixtureTruth::Mixed: mixed.push_back(v); break;
            }
        };
        if (r.g) push(g_in, g_out, g_mixed, *r.g);
        if (r.image_score) {
            push(s_in, s_out, s_mixed, *r.image_score);
        } else {
            have_single = false;
        }
    }
    report.tasks.push_back(evaluate("g:pure_in_vs_mix", method, g_mixed, g_in));
    report.tasks.push_back(evaluate("g:pure_out_vs_mix", method, g_mixed, g_out));
    if (have_single) {
        report.tasks.push_back(evaluate("single:pure_in_vs_mix", method, s_mixed, s_in));
        report.tasks.push_back(evaluate("single:pure_out_vs_mix", method, s_mixed, s_out));
    }
    return report;
}

TruthMap read_truth(std::istream& in) {
    TruthMap out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            out[j.at("image_id").get<std::string>()] = parse_truth(j.at("truth").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::UnlabeledImage, "truth line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_truth(std::ostream& out, std::span<const std::pair<std::string, MixtureTruth>> truth) {
    for (const auto& [id, t] : truth) {
        out << "{\"image_id\":" << nlohmann::json(id).dump() << ",\"truth\":\"" << to_string(t) << "\"}\n";
    }
}

nlohmann::ordered_json to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["tasks"] = nlohmann::ordered_json::array();
    for (const auto& t : report.tasks) {
        nlohmann::ordered_json row;
        row["name"] = t.name;
        row["method"] = std::string(to_string(t.method));
        row["auroc"] = t.auroc;
        row["n_pos"] = t.n_pos;
        row["n_neg"] = t.n_neg;
        j["tasks"].push_back(std::move(row));
    }
    j["counts"] = nlohmann::ordered_json::object();
    for (const auto& [split, n] : report.split_counts) j["counts"][split] = n;
    j["config"] = report.config;
    return j;
}

std::string to_markdown(const EvalReport& report) {
    std::vector<std::string> columns;
    std::vector<Method> rows;
    for (const auto& t : report.tasks) {
        if (std::find(columns.begin(), columns.end(), t.name) == columns.end()) columns.push_back(t.name);
        if (std::find(rows.begin(), rows.end(), t.method) == rows.end()) rows.push_back(t.method);
    }
    std::string md = "| method |";
    for (const auto& c : columns) md += " " + c + " |";
    md += "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) md += "---|";
    md += '\n';
    for (Method m : rows) {
        md += "| " + std::string(to_string(m)) + " |";
        for (const auto& c : columns) {
            auto it = std::find_if(report.tasks.begin(), report.tasks.end(),
                                   [&](const TaskResult& t) { return t.method == m && t.name == c; });
            if (it == report.tasks.end()) {
                md += " - |";
            } else {
                char buf[32];
                std::snprintf(buf, sizeof buf, " %.4f |", it->auroc);
                md += buf;
            }
        }
        md += '\n';
    }
    return md;
}

}  // namespace oca
