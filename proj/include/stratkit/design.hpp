#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratkit/estimation.hpp"
#include "stratkit/randomization.hpp"
#include "stratkit/stratification.hpp"

namespace stratkit {

enum class DesignMethod {
    Simple,           // complete randomization, difference in means
    Regression,       // complete randomization, OLS adjustment with HC2
    Categorical,      // complete randomization within category labels
    SortedPair,       // adjacent pairs on g_hat
    SortedBlock,      // adjacent blocks of k on g_hat
    MahalanobisPair,  // min-cost pairs on squared Mahalanobis distance
    HybridPair,       // min-cost pairs on the score/Mahalanobis blend
};

struct DesignSpec {
    std::string label;
    DesignMethod method = DesignMethod::Simple;
    std::size_t block_size = 2;
    std::optional<double> lambda;
    double ridge_epsilon = 1e-8;

    /// "simple", "regression", "categorical", "sorted-pair", "sorted-block-<k>",
    /// "mahalanobis-pair", "hybrid-pair" (optionally "hybrid-pair-<lambda>").
    static DesignSpec parse(const std::string& name);

    bool uses_scores() const noexcept;
    bool uses_covariates() const noexcept;
    bool is_pair_design() const noexcept;
};

/// Everything a design may look at. Outcomes are deliberately absent.
struct DesignInput {
    std::span<const double> g_hat;
    const CovariateMatrix* covariates = nullptr;
    std::span<const int> categories;
    std::size_t n = 0;

    /// sha256 over the bytes of g_hat, covariates and categories.
    std::string fingerprint() const;
};

struct Design {
    StratumSet strata;
    AssignmentSet assignment;
    std::string input_fingerprint;
    std::optional<double> lambda_used;
    std::vector<std::string> warnings;
};

/// Forms strata for the spec. Pair designs with odd n set the unit with
/// median g_hat aside (the last unit when there are no scores). Matched
/// pairs are renumbered in order of their mean g_hat.
StratumSet form_strata(const DesignSpec& spec, const DesignInput& input,
                       std::optional<double>* lambda_used = nullptr,
                       std::vector<std::string>* warnings = nullptr, int threads = 1);

Design run_design(const DesignSpec& spec, const DesignInput& input, double p, std::uint64_t seed,
                  int threads = 1);

/// Estimator paired with each design: difference in means for simple,
/// HC2 OLS for regression, stratified for blocks and categories, and the
/// matched-pair variance for pairs (Neyman when fewer than 4 pairs).
EstimateReport estimate_design(const DesignSpec& spec, const Design& design,
                               std::span<const double> y, const CovariateMatrix* covariates);

}  // namespace stratkit
