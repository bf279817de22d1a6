#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oca/embedding.hpp"
#include "oca/labelset.hpp"
#include "oca/mixture.hpp"

namespace oca::synth {

/// xoshiro256** seeded through splitmix64. The output sequence is fixed for a
/// given seed on every platform; nothing here touches std:: distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Standard normal via Box-Muller; consumes two uniforms, keeps the cosine branch.
    double gaussian();
    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

private:
    std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

struct ClassConfig {
    std::string name;
    /// Empty: draw a random unit anchor. Otherwise the anchor direction (length dim).
    std::vector<double> anchor;
    double kappa = 20.0;
    int count = 1;
    std::string split;
};

struct BoxConfig {
    std::uint64_t seed = 0;
    std::vector<std::string> in_labels;
    std::vector<std::string> out_labels;
    int pure_in = 0;
    int pure_out = 0;
    int mixed = 0;
    int boxes_min = 2;
    int boxes_max = 4;
    /// Gap between the box's own label and every other label.
    double margin = 2.0;
    double base = 0.0;
    /// Std-dev of per-label noise on box logits.
    double jitter = 0.0;
    /// Std-dev of per-label noise on the whole-image logits.
    double image_jitter = 0.05;
};

struct SynthConfig {
    std::uint32_t dim = 0;
    std::uint64_t seed = 0;
    std::vector<ClassConfig> classes;
    std::optional<BoxConfig> boxes;
};

/// Throws BadConfig describing the first problem found.
void check(const SynthConfig& cfg);
SynthConfig parse_config(const nlohmann::json& j);
SynthConfig load_config(const std::filesystem::path& path);

struct SynthStores {
    EmbeddingStore images;
    /// One anchor per class, keyed by class name.
    EmbeddingStore texts;
};

/// All anchors are drawn first, in class order, then each class's images as
/// normalize(anchor + N(0, 1/kappa) per coordinate).
SynthStores generate(const SynthConfig& cfg);

struct SynthBoxes {
    std::vector<BoxScoreSet> sets;
    std::vector<std::pair<std::string, MixtureTruth>> truth;
};

/// Pure images repeat one class's logit pattern on every box; mixed images
/// carry at least one in-domain and one OOD box. The whole-image logits follow
/// the image's in-domain object when it has one.
SynthBoxes generate_boxes(const BoxConfig& cfg);

/// Label config matching the class splits: seen_in/unseen_in on the in side,
/// seen_out/unseen_out/near_out on the out side. Other split tags are skipped.
LabelSet label_set(const SynthConfig& cfg, const std::string& name = "synthetic");

/// Label config for the box corpus (all labels seen).
LabelSet label_set(const BoxConfig& cfg, const std::string& name = "synthetic-boxes");

}  // namespace oca::synth
