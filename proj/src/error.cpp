#include "oca/error.hpp"

namespace oca {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ZeroNorm: return "ZeroNorm";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::VersionUnsupported: return "VersionUnsupported";
        case ErrorCode::TruncatedPayload: return "TruncatedPayload";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::BadSidecar: return "BadSidecar";
        case ErrorCode::Io: return "Io";
        case ErrorCode::MissingTextEmbedding: return "MissingTextEmbedding";
        case ErrorCode::BadLabelConfig: return "BadLabelConfig";
        case ErrorCode::EmptyInSet: return "EmptyInSet";
        case ErrorCode::EmptyOutSet: return "EmptyOutSet";
        case ErrorCode::BadTemperature: return "BadTemperature";
        case ErrorCode::UnknownMethod: return "UnknownMethod";
        case ErrorCode::LabelOrderMismatch: return "LabelOrderMismatch";
        case ErrorCode::TooFewBoxes: return "TooFewBoxes";
        case ErrorCode::BadBox: return "BadBox";
        case ErrorCode::EmptyList: return "EmptyList";
        case ErrorCode::UnknownSplit: return "UnknownSplit";
        case ErrorCode::MissingScore: return "MissingScore";
        case ErrorCode::UnlabeledImage: return "UnlabeledImage";
        case ErrorCode::BadTask: return "BadTask";
        case ErrorCode::BadConfig: return "BadConfig";
    }
    return "Unknown";
}

bool is_config_error(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::BadLabelConfig:
        case ErrorCode::BadTemperature:
        case ErrorCode::UnknownMethod:
        case ErrorCode::BadTask:
        case ErrorCode::BadConfig:
            return true;
        default:
            return false;
    }
}

}  // namespace oca
