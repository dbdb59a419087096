#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stratkit/dataset.hpp"
#include "stratkit/scoring.hpp"

namespace stratkit {

/// Members are indices into the unit list the strata were formed from.
struct Stratum {
    int stratum_id = 0;
    std::vector<std::size_t> members;

    std::size_t size() const noexcept { return members.size(); }
    friend bool operator==(const Stratum&, const Stratum&) = default;
};

struct StratumSet {
    std::vector<Stratum> strata;
    std::string method_tag;
    std::optional<double> total_cost;  // present for cost-based matchings
    /// Odd-n singleton set aside from a pair design; randomized by its own coin.
    std::optional<std::size_t> leftover;

    std::size_t unit_count() const noexcept;
};

/// Throws when a unit is missing or repeated (leftover counts as covered).
void validate_partition(const StratumSet& set, std::size_t n);

/// unit_id,stratum_id,method_tag (leftover has an empty stratum_id).
std::string strata_to_csv(const StratumSet& set, std::span<const std::string> unit_ids,
                          const std::string& header_comment);

// ---------------------------------------------------------------------------
// Sorted blocks on a scalar score

/// Sorts ascending by score (ties by input order) and chunks into groups of
/// k. A remainder of n mod k units joins the last stratum.
StratumSet sorted_block_strata(std::span<const double> g_hat, std::size_t k);
StratumSet sorted_block_strata(std::span<const ScoredUnit> scored, std::size_t k);

/// Index order used for sorting: ascending score, ties by index.
std::vector<std::size_t> score_order(std::span<const double> g_hat);

// ---------------------------------------------------------------------------
// Covariates

/// Numeric design matrix: numeric variables as-is, categorical variables
/// one-hot encoded with the first level (lexicographic) dropped.
struct CovariateMatrix {
    Eigen::MatrixXd values;  // n x k
    std::vector<std::string> columns;

    Eigen::Index rows() const noexcept { return values.rows(); }
    Eigen::Index cols() const noexcept { return values.cols(); }
    CovariateMatrix select_rows(std::span<const std::size_t> rows) const;
    CovariateMatrix select_columns(std::span<const std::size_t> cols) const;
};

CovariateMatrix build_covariate_matrix(const Dataset& dataset,
                                       std::span<const std::string> covariate_subset);

struct CovarianceEstimate {
    Eigen::MatrixXd sigma;      // over kept columns, divisor n - 1
    Eigen::MatrixXd sigma_inv;
    std::vector<std::size_t> kept_columns;
    std::vector<std::string> kept_names;
    std::vector<std::string> warnings;
    bool regularized = false;
};

/// Constant columns are dropped with a warning. When the condition number
/// exceeds 1e12 or inversion fails, ridge_epsilon * mean(diag) is added to
/// the diagonal before inverting.
CovarianceEstimate estimate_covariance(const CovariateMatrix& x, double ridge_epsilon = 1e-8);
CovarianceEstimate estimate_covariance(const Dataset& dataset,
                                       std::span<const std::string> covariate_subset,
                                       double ridge_epsilon = 1e-8);

double mahalanobis_distance(std::span<const double> xi, std::span<const double> xj,
                            const Eigen::MatrixXd& sigma_inv);

// ---------------------------------------------------------------------------
// Hybrid cost

struct HybridCostParams {
    std::optional<double> lambda;  // 1 / (k + 1) when unset
    std::vector<std::string> covariate_subset;
    double ridge_epsilon = 1e-8;

    void validate() const;
};

/// lambda (g_i - g_j)^2 / s_g_sq + (1 - lambda) (x_i - x_j)' sigma_inv (x_i - x_j).
/// The score term is 0 when s_g_sq == 0.
double hybrid_pair_cost(std::size_t i, std::size_t j, std::span<const double> g_hats,
                        double s_g_sq, const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma_inv,
                        double lambda);

/// 1 / (k + 1) for k Mahalanobis columns.
double default_lambda(std::size_t k) noexcept;

/// Sample variance with divisor n - 1.
double sample_variance(std::span<const double> v);

}  // namespace stratkit
