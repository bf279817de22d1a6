#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oca/embedding.hpp"

namespace oca {

/// Role of a class inside a label config. Unseen classes never enter the
/// scoring label set; they only tag evaluation splits.
enum class Tier { Seen, Unseen, Near };

std::string_view to_string(Tier tier) noexcept;

struct ClassSpec {
    std::string name;
    /// Templates with at most one `{}` placeholder. Empty means the bare name.
    std::vector<std::string> prompts;
    Tier tier = Tier::Seen;

    /// Prompt strings with the class name substituted, or {name} when there are no prompts.
    std::vector<std::string> expanded_prompts() const;
};

struct LabelSet {
    std::string name;
    std::vector<ClassSpec> in_classes;
    std::vector<ClassSpec> out_classes;

    /// C_in: in-side classes used for scoring (tier seen).
    std::vector<const ClassSpec*> scoring_in() const;
    /// C_out: out-side classes used for scoring (tier seen or near).
    std::vector<const ClassSpec*> scoring_out() const;
};

/// Class-name partition used at evaluation time.
struct SplitSpec {
    std::vector<std::string> seen_in;
    std::vector<std::string> unseen_in;
    std::vector<std::string> seen_out;
    std::vector<std::string> unseen_out;
    std::vector<std::string> near_out;
};

SplitSpec split_spec(const LabelSet& labels);

/// Fills a `{}` placeholder with `name`; templates without one are returned unchanged.
std::string expand_prompt(const std::string& tmpl, const std::string& name);

using TextLookup = std::function<std::optional<EmbeddingVector>(const std::string&)>;

/// Lookup over a text store keyed by exact prompt string.
TextLookup store_lookup(const EmbeddingStore& texts);

/// Mean of the prompt embeddings, renormalized to unit length.
/// Throws MissingTextEmbedding naming the first prompt string not found.
EmbeddingVector class_embedding(const ClassSpec& spec, const TextLookup& lookup);

/// Split at ceil(n/2); the first half is never the smaller one.
std::pair<std::vector<std::string>, std::vector<std::string>> halves_split(
    const std::vector<std::string>& class_names);

struct Violation {
    enum class Kind { EmptyIn, EmptyOut, DuplicateName, InOutOverlap, BadPrompt };
    Kind kind;
    std::string detail;
};

std::string_view to_string(Violation::Kind kind) noexcept;

/// Structural problems in a label set. An empty result means the set is usable.
std::vector<Violation> validate(const LabelSet& labels);

LabelSet parse_label_config(const nlohmann::json& j);
LabelSet load_label_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const LabelSet& labels);

}  // namespace oca
