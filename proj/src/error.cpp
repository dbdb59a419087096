#include "stratkit/error.hpp"

namespace stratkit {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::MissingColumn: return "MissingColumn";
        case Errc::TypeMismatch: return "TypeMismatch";
        case Errc::DuplicateUnitId: return "DuplicateUnitId";
        case Errc::EmptyDataset: return "EmptyDataset";
        case Errc::InvalidSchema: return "InvalidSchema";
        case Errc::TextTooLong: return "TextTooLong";
        case Errc::InvalidContext: return "InvalidContext";
        case Errc::UnboundPlaceholder: return "UnboundPlaceholder";
        case Errc::MissingPredictionBlock: return "MissingPredictionBlock";
        case Errc::MalformedNumber: return "MalformedNumber";
        case Errc::WrongLineCount: return "WrongLineCount";
        case Errc::BackendUnavailable: return "BackendUnavailable";
        case Errc::ParseFailure: return "ParseFailure";
        case Errc::PredictionFailed: return "PredictionFailed";
        case Errc::InvalidProbability: return "InvalidProbability";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::DegenerateVariance: return "DegenerateVariance";
        case Errc::BlockTooLarge: return "BlockTooLarge";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::OddCount: return "OddCount";
        case Errc::NonFiniteCost: return "NonFiniteCost";
        case Errc::InvalidLambda: return "InvalidLambda";
        case Errc::NonIntegralAllocation: return "NonIntegralAllocation";
        case Errc::EmptyArm: return "EmptyArm";
        case Errc::RankDeficient: return "RankDeficient";
        case Errc::NotPairedDesign: return "NotPairedDesign";
        case Errc::TooFewPairs: return "TooFewPairs";
        case Errc::DegenerateDenominator: return "DegenerateDenominator";
        case Errc::EmptyReport: return "EmptyReport";
        case Errc::IoFailure: return "IoFailure";
        case Errc::ConfigError: return "ConfigError";
        case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace stratkit
