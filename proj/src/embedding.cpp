#include "oca/embedding.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "oca/error.hpp"

namespace oca {

namespace {

constexpr std::array<char, 4> kMagic = {'O', 'C', 'E', 'B'};
constexpr double kUnitTolerance = 1e-4;

double squared_norm(std::span<const float> v) {
    double acc = 0.0;
    for (float x : v) acc += static_cast<double>(x) * static_cast<double>(x);
    return acc;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

EmbeddingVector normalize(std::span<const double> raw) {
    if (raw.empty()) throw Error(ErrorCode::ZeroNorm, "empty vector");
    double acc = 0.0;
    for (double x : raw) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "vector has NaN/Inf component");
        acc += x * x;
    }
    const double norm = std::sqrt(acc);
    if (!(norm > 1e-12)) throw Error(ErrorCode::ZeroNorm, "vector norm <= 1e-12");
    std::vector<double> out(raw.begin(), raw.end());
    for (double& x : out) x /= norm;
    return EmbeddingVector(std::move(out));
}

EmbeddingVector normalize(std::span<const float> raw) {
    std::vector<double> wide(raw.begin(), raw.end());
    return normalize(std::span<const double>(wide));
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

LogitRow logits(const EmbeddingVector& img, std::span<const EmbeddingVector> classes,
                std::vector<std::string> class_order) {
    if (classes.size() != class_order.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "class_order has " + std::to_string(class_order.size()) + " names for " +
                        std::to_string(classes.size()) + " class vectors");
    }
    LogitRow row;
    row.values.reserve(classes.size());
    for (const auto& c : classes) row.values.push_back(dot(img.values(), c.values()));
    row.class_order = std::move(class_order);
    return row;
}

// ---------------------------------------------------------------------------
// EmbeddingStore

EmbeddingStore::Builder::Builder(std::uint32_t dim) : dim_(dim) {
    if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "store dim must be >= 1");
}

EmbeddingStore::Builder& EmbeddingStore::Builder::add(std::string id, std::span<const float> values,
                                                      RecordMeta meta) {
    if (values.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch, "record '" + id + "' has length " +
                                                      std::to_string(values.size()) + ", store dim " +
                                                      std::to_string(dim_));
    }
    for (float x : values) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "record '" + id + "'");
    }
    if (!index_.emplace(id, ids_.size()).second) {
        throw Error(ErrorCode::DuplicateId, "record id '" + id + "' appears twice");
    }
    ids_.push_back(std::move(id));
    payload_.insert(payload_.end(), values.begin(), values.end());
    meta_.push_back(std::move(meta));
    return *this;
}

EmbeddingStore::Builder& EmbeddingStore::Builder::add(std::string id, const EmbeddingVector& v,
                                                      RecordMeta meta) {
    std::vector<float> narrow(v.values().begin(), v.values().end());
    return add(std::move(id), std::span<const float>(narrow), std::move(meta));
}

EmbeddingStore::Builder& EmbeddingStore::Builder::renormalized(bool flag) {
    renormalized_ = flag;
    return *this;
}

EmbeddingStore EmbeddingStore::Builder::build() && {
    EmbeddingStore store;
    store.dim_ = dim_;
    store.ids_ = std::move(ids_);
    store.payload_ = std::move(payload_);
    store.meta_ = std::move(meta_);
    store.index_ = std::move(index_);
    store.renormalized_ = renormalized_;
    return store;
}

std::span<const float> EmbeddingStore::row(std::size_t i) const {
    if (i >= ids_.size()) throw std::out_of_range("EmbeddingStore::row");
    return std::span<const float>(payload_).subspan(i * dim_, dim_);
}

EmbeddingVector EmbeddingStore::vector(std::size_t i) const { return normalize(row(i)); }

std::optional<std::size_t> EmbeddingStore::find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool EmbeddingStore::all_unit() const {
    for (std::size_t i = 0; i < size(); ++i) {
        if (std::abs(std::sqrt(squared_norm(row(i))) - 1.0) > kUnitTolerance) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// OCEB v1 interchange

std::filesystem::path sidecar_path(const std::filesystem::path& store_path) {
    auto p = store_path;
    p.replace_extension(".meta.jsonl");
    return p;
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
    std::string bin;
    bin.reserve(kOcebHeaderBytes + store.payload().size() * 4);
    bin.append(kMagic.begin(), kMagic.end());
    put_u32(bin, kOcebVersion);
    put_u32(bin, store.dim());
    put_u64(bin, store.size());
    for (float x : store.payload()) put_u32(bin, std::bit_cast<std::uint32_t>(x));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(bin.data(), static_cast<std::streamsize>(bin.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());

    const auto side = sidecar_path(path);
    std::ofstream meta(side, std::ios::binary | std::ios::trunc);
    if (!meta) throw Error(ErrorCode::Io, "cannot write " + side.string());
    nlohmann::ordered_json manifest;
    manifest["_manifest"]["normalized"] = store.all_unit();
    meta << manifest.dump() << '\n';
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& m = store.meta(i);
        nlohmann::ordered_json line;
        line["id"] = store.id(i);
        line["class"] = m.class_name;
        line["split"] = m.split ? nlohmann::ordered_json(*m.split) : nlohmann::ordered_json(nullptr);
        line["extra"] = m.extra.is_object() ? m.extra : nlohmann::json::object();
        meta << line.dump() << '\n';
    }
    if (!meta) throw Error(ErrorCode::Io, "short write to " + side.string());
}

EmbeddingStore load_store(const std::filesystem::path& path, LoadOptions options) {
    const std::string bin = read_file(path);
    const auto* bytes = reinterpret_cast<const unsigned char*>(bin.data());
    if (bin.size() < 4 || !std::equal(kMagic.begin(), kMagic.end(), bin.begin())) {
        throw Error(ErrorCode::BadMagic, path.string() + " is not an OCEB file");
    }
    if (bin.size() < kOcebHeaderBytes) {
        throw Error(ErrorCode::TruncatedPayload, path.string() + ": header cut short");
    }
    const std::uint32_t version = get_u32(bytes + 4);
    if (version != kOcebVersion) {
        throw Error(ErrorCode::VersionUnsupported, "OCEB version " + std::to_string(version));
    }
    const std::uint32_t dim = get_u32(bytes + 8);
    const std::uint64_t count = get_u64(bytes + 12);
    if (dim == 0) throw Error(ErrorCode::DimensionMismatch, path.string() + ": dim 0");

    const std::uint64_t available = (bin.size() - kOcebHeaderBytes) / 4;
    if (count > available / dim || (bin.size() - kOcebHeaderBytes) != count * dim * 4) {
        throw Error(ErrorCode::TruncatedPayload,
                    path.string() + ": header declares " + std::to_string(count) + "x" +
                        std::to_string(dim) + " floats, file holds " +
                        std::to_string(bin.size() - kOcebHeaderBytes) + " payload bytes");
    }

    std::vector<float> payload(count * dim);
    for (std::size_t i = 0; i < payload.size(); ++i) {
        payload[i] = std::bit_cast<float>(get_u32(bytes + kOcebHeaderBytes + 4 * i));
    }

    // Sidecar: manifest line, then one record per payload row.
    const auto side = sidecar_path(path);
    std::istringstream lines(read_file(side));
    std::string line;
    bool manifest_normalized = true;
    std::vector<RecordMeta> metas;
    std::vector<std::string> ids;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::BadSidecar, side.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (j.contains("_manifest")) {
            manifest_normalized = j["_manifest"].value("normalized", true);
            continue;
        }
        if (!j.contains("id") || !j["id"].is_string()) {
            throw Error(ErrorCode::BadSidecar, side.string() + ":" + std::to_string(lineno) + ": missing id");
        }
        RecordMeta m;
        if (j.contains("class") && j["class"].is_string()) m.class_name = j["class"].get<std::string>();
        if (j.contains("split") && j["split"].is_string()) m.split = j["split"].get<std::string>();
        if (j.contains("extra") && j["extra"].is_object()) m.extra = j["extra"];
        ids.push_back(j["id"].get<std::string>());
        metas.push_back(std::move(m));
    }
    if (ids.size() != count) {
        throw Error(ErrorCode::BadSidecar, side.string() + " lists " + std::to_string(ids.size()) +
                                               " records, payload has " + std::to_string(count));
    }

    bool renormalized = false;
    EmbeddingStore::Builder builder(dim);
    for (std::size_t i = 0; i < count; ++i) {
        std::span<float> row(payload.data() + i * dim, dim);
        for (float x : row) {
            if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "record '" + ids[i] + "'");
        }
        if (options.normalize) {
            const double norm = std::sqrt(squared_norm(row));
            if (!manifest_normalized || std::abs(norm - 1.0) > kUnitTolerance) {
                const auto unit = normalize(std::span<const float>(row));
                for (std::size_t k = 0; k < dim; ++k) row[k] = static_cast<float>(unit[k]);
                renormalized = true;
            }
        }
        builder.add(std::move(ids[i]), std::span<const float>(row), std::move(metas[i]));
    }
    return std::move(builder.renormalized(renormalized)).build();
}

}  // namespace oca
