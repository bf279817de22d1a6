#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oca/labelset.hpp"
#include "oca/scoring.hpp"

namespace oca {

struct Box {
    std::array<double, 4> bbox{};  ///< x0, y0, x1, y1 in pixels
    std::vector<double> scores;    ///< detector confidence per label, aligned with label_order
};

/// Detector output for one image. Confidences are used directly as logits.
struct BoxScoreSet {
    std::string image_id;
    std::vector<std::string> label_order;
    std::vector<Box> boxes;
    /// Whole-image logits over label_order, when the producer supplies them.
    std::optional<std::vector<double>> image_scores;
};

/// Throws BadBox on degenerate boxes, misaligned score vectors or non-finite values.
void check(const BoxScoreSet& set);

/// Splits a logit row aligned with `label_order` into the label set's C_in and
/// C_out. Throws LabelOrderMismatch unless label_order covers exactly the
/// scoring classes of `labels`.
JointLogits split_logits(std::span<const double> row, const std::vector<std::string>& label_order,
                         const LabelSet& labels);

/// One OOD score per box, in box order.
std::vector<double> box_scores(const BoxScoreSet& set, const LabelSet& labels, const ScoreConfig& cfg);

/// max - min over the per-box scores. Throws TooFewBoxes below two boxes.
double mixture_score(std::span<const double> per_box);

enum class MixtureTruth { PureIn, PureOut, Mixed };

std::string_view to_string(MixtureTruth t) noexcept;
MixtureTruth parse_truth(std::string_view s);

struct MixtureResult {
    std::string image_id;
    std::vector<double> per_box_scores;
    /// Absent for images with fewer than two boxes.
    std::optional<double> g;
    /// Score of the whole-image logits, when the input carried them.
    std::optional<double> image_score;
};

MixtureResult score_mixture(const BoxScoreSet& set, const LabelSet& labels, const ScoreConfig& cfg);

std::vector<BoxScoreSet> read_box_scores(std::istream& in);
void write_box_scores(std::ostream& out, std::span<const BoxScoreSet> sets);
void write_mixture_results(std::ostream& out, std::span<const MixtureResult> results, const ScoreConfig& cfg);

}  // namespace oca
