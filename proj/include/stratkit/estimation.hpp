#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stratkit/stratification.hpp"

namespace stratkit {

struct EstimateReport {
    double tau_hat = 0.0;
    double se_hat = 0.0;
    std::string estimator_tag;
    std::size_t n_used = 0;
};

/// mean(Y | D=1) - mean(Y | D=0) with the Neyman standard error
/// sqrt(s1^2/n1 + s0^2/n0). An arm of one unit contributes zero variance.
EstimateReport difference_in_means(std::span<const double> y, std::span<const int> d);

/// OLS of Y on [1, D, covariates]; tau is the D coefficient and the
/// standard error is HC2. Covariate columns collinear with earlier columns
/// are dropped (reported through `warnings` when given).
EstimateReport ols_adjusted_estimate(std::span<const double> y, std::span<const int> d,
                                     const Eigen::MatrixXd& covariates,
                                     std::vector<std::string>* warnings = nullptr);

/// Block-weighted estimate sum_s (n_s/n) tau_s with the stratified Neyman
/// standard error. Falls back to the pooled Neyman error when some stratum
/// has fewer than two units in an arm.
EstimateReport stratified_estimate(const StratumSet& strata, std::span<const double> y,
                                   std::span<const int> d);

struct PairedVariance {
    double varsigma_sq = 0.0;  // asymptotic variance of sqrt(K) (tau_hat - tau)
    double se = 0.0;           // sqrt(varsigma_sq / K)
    double rho_hat = 0.0;
    double mu1 = 0.0;
    double mu0 = 0.0;
    double sigma1_sq = 0.0;
    double sigma0_sq = 0.0;
    std::size_t pairs = 0;
};

/// Matched-pair variance
///   varsigma^2 = s1^2 + s0^2 - rho/2 + (mu1 + mu0)^2 / 2
/// where rho averages products of outcome sums of adjacent pairs
/// (pairs 2j and 2j+1 in the given stratum order, an odd last pair skipped).
/// Strata must all be pairs with one treated unit each, listed in score
/// order; the leftover unit is ignored. Needs at least 4 pairs.
PairedVariance matched_pair_variance(const StratumSet& pairs, std::span<const double> y,
                                     std::span<const int> d);

/// V_paired / V_simple = 1 - var_cond / (2 (var_y1 + var_y0)).
double theoretical_variance_ratio(double var_y1, double var_y0, double var_cond);

}  // namespace stratkit
