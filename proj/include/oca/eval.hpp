#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "oca/mixture.hpp"
#include "oca/scoring.hpp"

namespace oca {

/// Mann-Whitney AUROC with ties credited 0.5: the probability that a random
/// OOD score exceeds a random in-domain score. O((n+m) log(n+m)).
/// Throws EmptyList if either side is empty and NonFinite on NaN/Inf.
double auroc(std::span<const double> ood_scores, std::span<const double> in_scores);

/// Records whose split is in `positive` are OOD (score-high), `negative` in-domain.
struct EvalTask {
    std::string name;
    std::vector<std::string> positive;
    std::vector<std::string> negative;
    Method method = Method::MaxLogitDiff;
};

struct TaskResult {
    std::string name;
    Method method = Method::MaxLogitDiff;
    double auroc = 0.0;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

struct EvalReport {
    std::vector<TaskResult> tasks;
    std::map<std::string, std::size_t> split_counts;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

/// Throws UnknownSplit when a task names a split no record carries and
/// MissingScore when a selected record lacks the task's method.
EvalReport run_tasks(std::span<const ScoredRecord> records, std::span<const EvalTask> tasks);

std::vector<EvalTask> parse_tasks(const nlohmann::json& j);

using TruthMap = std::unordered_map<std::string, MixtureTruth>;

/// AUROC of g (and of the whole-image score, when present) with mixed images as
/// the positive class against pure_in and against pure_out. Images without g
/// are not mixture candidates and are left out of the g tasks.
EvalReport mixture_eval(std::span<const MixtureResult> results, const TruthMap& truth, Method method);

TruthMap read_truth(std::istream& in);
void write_truth(std::ostream& out, std::span<const std::pair<std::string, MixtureTruth>> truth);

nlohmann::ordered_json to_json(const EvalReport& report);
/// One row per method, one column per task name.
std::string to_markdown(const EvalReport& report);

}  // namespace oca
