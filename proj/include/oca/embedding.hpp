#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace oca {

/// Unit-norm embedding in double precision. The only ways to obtain one are
/// normalize() and the store accessor, so the unit-norm invariant always holds.
class EmbeddingVector {
public:
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    friend EmbeddingVector normalize(std::span<const double> raw);
    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}

    std::vector<double> values_;
};

/// Scales `raw` to unit L2 norm.
/// Throws ZeroNorm when the norm is <= 1e-12 and NonFinite on NaN/Inf input.
EmbeddingVector normalize(std::span<const double> raw);
EmbeddingVector normalize(std::span<const float> raw);

/// Similarities of one image against an ordered list of class embeddings.
struct LogitRow {
    std::vector<double> values;
    std::vector<std::string> class_order;
};

double dot(std::span<const double> a, std::span<const double> b);

/// values[j] = img . classes[j]. Throws DimensionMismatch on any size disagreement.
LogitRow logits(const EmbeddingVector& img, std::span<const EmbeddingVector> classes,
                std::vector<std::string> class_order);

struct RecordMeta {
    std::string class_name;
    std::optional<std::string> split;
    nlohmann::json extra = nlohmann::json::object();
};

/// Immutable collection of float32 embeddings with per-record metadata.
/// Built through EmbeddingStore::Builder or load_store().
class EmbeddingStore {
public:
    class Builder {
    public:
        explicit Builder(std::uint32_t dim);
        Builder& add(std::string id, std::span<const float> values, RecordMeta meta = {});
        Builder& add(std::string id, const EmbeddingVector& v, RecordMeta meta = {});
        Builder& renormalized(bool flag);
        EmbeddingStore build() &&;

    private:
        std::uint32_t dim_;
        std::vector<std::string> ids_;
        std::vector<float> payload_;
        std::vector<RecordMeta> meta_;
        std::unordered_map<std::string, std::size_t> index_;
        bool renormalized_ = false;
    };

    std::uint32_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }

    const std::string& id(std::size_t i) const { return ids_.at(i); }
    const RecordMeta& meta(std::size_t i) const { return meta_.at(i); }
    std::span<const float> row(std::size_t i) const;
    std::span<const float> payload() const noexcept { return payload_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    /// Row i widened to double and normalized.
    EmbeddingVector vector(std::size_t i) const;
    std::optional<std::size_t> find(const std::string& id) const;

    /// True when every row has unit norm within 1e-4.
    bool all_unit() const;
    /// Set when load_store had to normalize at least one row.
    bool renormalized() const noexcept { return renormalized_; }

private:
    EmbeddingStore() = default;

    std::uint32_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<float> payload_;
    std::vector<RecordMeta> meta_;
    std::unordered_map<std::string, std::size_t> index_;
    bool renormalized_ = false;
};

/// `images.oceb` -> `images.meta.jsonl`
std::filesystem::path sidecar_path(const std::filesystem::path& store_path);

struct LoadOptions {
    /// Normalize rows when the manifest says normalized=false or a row is off
    /// the unit sphere by more than 1e-4. Disable to read the payload verbatim.
    bool normalize = true;
};

EmbeddingStore load_store(const std::filesystem::path& path, LoadOptions options = {});
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);

inline constexpr std::uint32_t kOcebVersion = 1;
inline constexpr std::size_t kOcebHeaderBytes = 20;

}  // namespace oca
