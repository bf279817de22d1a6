#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oca {

enum class ErrorCode {
    // embedding-core
    ZeroNorm,
    NonFinite,
    DimensionMismatch,
    BadMagic,
    VersionUnsupported,
    TruncatedPayload,
    DuplicateId,
    BadSidecar,
    Io,
    // labelset
    MissingTextEmbedding,
    BadLabelConfig,
    // scoring
    EmptyInSet,
    EmptyOutSet,
    BadTemperature,
    UnknownMethod,
    // mixture
    LabelOrderMismatch,
    TooFewBoxes,
    BadBox,
    // eval
    EmptyList,
    UnknownSplit,
    MissingScore,
    UnlabeledImage,
    BadTask,
    // synth
    BadConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for errors caused by malformed configuration rather than bad data.
/// The CLI maps these to exit code 2; everything else is exit code 3.
bool is_config_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace oca
