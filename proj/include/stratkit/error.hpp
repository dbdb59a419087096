#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stratkit {

enum class Errc {
    // ingestion
    MissingColumn,
    TypeMismatch,
    DuplicateUnitId,
    EmptyDataset,
    InvalidSchema,
    TextTooLong,
    // prompt / predictor
    InvalidContext,
    UnboundPlaceholder,
    MissingPredictionBlock,
    MalformedNumber,
    WrongLineCount,
    BackendUnavailable,
    ParseFailure,
    PredictionFailed,
    // scoring / stratification / randomization
    InvalidProbability,
    LengthMismatch,
    DegenerateVariance,
    BlockTooLarge,
    DimensionMismatch,
    OddCount,
    NonFiniteCost,
    InvalidLambda,
    NonIntegralAllocation,
    // estimation
    EmptyArm,
    RankDeficient,
    NotPairedDesign,
    TooFewPairs,
    DegenerateDenominator,
    // harness / cli
    EmptyReport,
    IoFailure,
    ConfigError,
    InvalidArgument,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library. `subject` carries the offending
/// name (column, unit id, placeholder) when there is one.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, std::string subject = {})
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          subject_(std::move(subject)) {}

    Errc code() const noexcept { return code_; }
    const std::string& subject() const noexcept { return subject_; }

private:
    Errc code_;
    std::string subject_;
};

}  // namespace stratkit
