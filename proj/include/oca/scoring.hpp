#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oca/embedding.hpp"
#include "oca/labelset.hpp"

namespace oca {

/// The five OOD scores. Every one is oriented so that higher means more OOD.
enum class Method {
    NegMaxProb,    ///< -max_{c in C_in} softmax over C_in only
    SumOutProb,    ///< sum over C_out of softmax over C_in u C_out
    MaxOutProb,    ///< max over C_out of softmax over C_in u C_out
    NegMaxInProb,  ///< -max over C_in of softmax over C_in u C_out
    MaxLogitDiff,  ///< max_{C_out} w - max_{C_in} w
};

inline constexpr std::array<Method, 5> kAllMethods = {Method::NegMaxProb, Method::SumOutProb, Method::MaxOutProb,
                                                      Method::NegMaxInProb, Method::MaxLogitDiff};

std::string_view to_string(Method m) noexcept;
/// Throws UnknownMethod.
Method parse_method(std::string_view name);
bool uses_out_set(Method m) noexcept;

struct ScoreConfig {
    Method method = Method::MaxLogitDiff;
    /// Logits are divided by this before any score is taken.
    double temperature = 1.0;
};

/// Throws BadTemperature unless temperature is finite and > 0.
void check(const ScoreConfig& cfg);

/// Logits over C_in and C_out, each in label-set order.
struct JointLogits {
    std::vector<double> in_logits;
    std::vector<double> out_logits;
};

double score_neg_max_prob(const JointLogits& jl, const ScoreConfig& cfg);
double score_sum_out_prob(const JointLogits& jl, const ScoreConfig& cfg);
double score_max_out_prob(const JointLogits& jl, const ScoreConfig& cfg);
double score_neg_max_in_prob(const JointLogits& jl, const ScoreConfig& cfg);
double score_max_logit_diff(const JointLogits& jl, const ScoreConfig& cfg);

/// Dispatches on cfg.method.
double score(const JointLogits& jl, const ScoreConfig& cfg);

/// Both sides of  -log max_{C_in} p(c | C_in u C_out) = S_max_logit_diff + log(1 + r),
/// where r is the probability mass outside the top OOD label relative to it.
struct IdentityResidual {
    double lhs = 0.0;
    double rhs = 0.0;
    double r = 0.0;
};

IdentityResidual identity_residual(const JointLogits& jl, const ScoreConfig& cfg);

/// Class embeddings for the scoring label set (seen in, seen/near out).
struct LabelEmbeddings {
    std::vector<std::string> in_names;
    std::vector<EmbeddingVector> in;
    std::vector<std::string> out_names;
    std::vector<EmbeddingVector> out;
};

LabelEmbeddings embed_labels(const LabelSet& labels, const TextLookup& lookup);

JointLogits joint_logits(const EmbeddingVector& img, const LabelEmbeddings& labels);

struct ScoredRecord {
    std::string id;
    std::string split;
    /// In the order the methods were requested.
    std::vector<std::pair<Method, double>> scores;

    std::optional<double> find(Method m) const;
};

ScoredRecord score_record(std::string id, std::string split, const EmbeddingVector& img,
                          const LabelEmbeddings& labels, std::span<const ScoreConfig> cfgs);

/// Scores every image in the store. Work is split across `threads` workers but
/// results are always returned in store order.
std::vector<ScoredRecord> score_store(const EmbeddingStore& images, const LabelEmbeddings& labels,
                                      std::span<const ScoreConfig> cfgs, std::size_t threads = 1);

/// `%.17g`: enough digits to round-trip any double.
std::string format_double(double v);

void write_scores(std::ostream& out, std::span<const ScoredRecord> records);
std::vector<ScoredRecord> read_scores(std::istream& in);

}  // namespace oca
