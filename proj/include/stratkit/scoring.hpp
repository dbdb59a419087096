#pragma once

#include <span>
#include <string>
#include <vector>

#include "stratkit/predictor.hpp"

namespace stratkit {

struct ScoredUnit {
    std::string unit_id;
    double g_hat = 0.0;
    double y0_hat = 0.0;
    double y1_hat = 0.0;

    friend bool operator==(const ScoredUnit&, const ScoredUnit&) = default;
};

/// y1_hat + y0_hat.
double prognostic_score(const PredictionPair& pair) noexcept;

/// y1_hat / p + y0_hat / (1 - p); p must lie strictly inside (0, 1).
double weighted_prognostic_score(const PredictionPair& pair, double p);

/// Uses the plain score at p = 0.5 and the weighted variant otherwise.
std::vector<ScoredUnit> score_predictions(std::span<const PredictionPair> pairs,
                                          double p = 0.5);

struct ScoreDiagnostics {
    double pearson = 0.0;
    double spearman = 0.0;
    double r_squared = 0.0;  // reference regressed on g_hat
};

/// Evaluation-only comparison of scores against a known or imputed reference.
ScoreDiagnostics score_quality(std::span<const ScoredUnit> scores,
                               std::span<const double> reference);
ScoreDiagnostics score_quality(std::span<const double> scores, std::span<const double> reference);

/// unit_id,y0_hat,y1_hat,g_hat
std::string scores_to_csv(std::span<const ScoredUnit> scores, const std::string& header_comment);
std::vector<ScoredUnit> scores_from_csv(std::string_view text);

}  // namespace stratkit
