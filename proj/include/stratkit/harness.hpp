#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratkit/dataset.hpp"
#include "stratkit/design.hpp"
#include "stratkit/stratification.hpp"

namespace stratkit::harness {

enum class Provenance { Observed, Imputed, Synthetic };

/// Full potential-outcome table used as the bootstrap population.
struct ImputedSample {
    std::vector<double> y0;
    std::vector<double> y1;
    std::vector<Provenance> y0_source;
    std::vector<Provenance> y1_source;
    CovariateMatrix x;
    std::vector<double> g_hat;     // design-time score per unit, may be empty
    std::vector<int> categories;   // optional category label per unit
    std::vector<std::string> unit_ids;
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return y0.size(); }
    /// mean(y1 - y0).
    double tau() const;
};

/// Y(d) = alpha d + beta'x + d gamma'x + eps, x ~ N(0, I), eps ~ N(0, noise_sd^2)
/// shared by both arms.
struct SyntheticDGP {
    std::size_t dim = 0;
    double alpha = 0.0;
    std::vector<double> beta;
    std::vector<double> gamma;
    double noise_sd = 1.0;
    std::uint64_t seed = 0;

    // Closed forms.
    double var_y0 = 0.0;
    double var_y1 = 0.0;
    double var_cond = 0.0;  // Var(E[Y(1) + Y(0) | g*])
    double mean_g = 0.0;

    double g_star(std::span<const double> x) const;
    double theoretical_ratio() const;
    /// Var(Y(1)) + Var(Y(0)) - Var(E[Y(1) + Y(0) | g*]) / 2.
    double v_paired() const;

    /// n draws; g_hat holds g*(x). Pure function of (parameters, seed).
    ImputedSample sample(std::size_t n) const;
};

SyntheticDGP make_linear_dgp(std::size_t dim, double alpha, std::vector<double> beta,
                             std::vector<double> gamma, double noise_sd, std::uint64_t seed);

/// Replaces g_hat by corr * z(g*) + sqrt(1 - corr^2) * xi with xi ~ N(0, 1)
/// drawn from its own stream; z standardizes with the closed-form moments.
void set_correlated_scores(ImputedSample& sample, const SyntheticDGP& dgp, double corr,
                           std::uint64_t seed);

/// T-learner: one OLS of Y on [1, X] per arm; the missing potential outcome
/// is the observed one shifted by m1(x) - m0(x). Falls back to arm means
/// (with a warning) when either arm's design is rank deficient.
ImputedSample impute_counterfactuals(const Dataset& dataset,
                                     std::span<const std::string> covariate_subset);

struct SimulationOptions {
    std::size_t reps = 3000;
    std::size_t n = 1000;
    double p = 0.5;
    std::uint64_t master_seed = 0;
    int threads = 0;  // <= 0: OpenMP default
    std::size_t bootstrap_resamples = 1000;
    std::vector<std::string> baselines{"simple"};
};

struct ReplicationRecord {
    std::size_t rep = 0;
    std::size_t method = 0;
    double tau_hat = 0.0;
    double se_hat = 0.0;
    bool ok = false;
};

struct MethodSummary {
    std::string method;
    double mse = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double mean_se = 0.0;
    double coverage = 0.0;
    double mean_tau_hat = 0.0;
    double var_tau_hat = 0.0;  // divisor reps - 1, 0 for one replication
    std::size_t reps = 0;

    friend bool operator==(const MethodSummary&, const MethodSummary&) = default;
};

struct MethodComparison {
    std::vector<MethodSummary> methods;
    std::vector<std::string> baselines;
    std::vector<std::pair<std::string, std::string>> failed;  // method, reason
    double tau = 0.0;
    std::size_t n = 0;
    std::size_t reps = 0;
    std::uint64_t master_seed = 0;

    const MethodSummary* find(const std::string& method) const;
    /// (A - B) / A * 100 with A the baseline MSE and B the method MSE.
    double improvement(const MethodSummary& m, const MethodSummary& baseline) const;

    friend bool operator==(const MethodComparison&, const MethodComparison&) = default;
};

struct SimulationResult {
    MethodComparison comparison;
    std::vector<ReplicationRecord> records;  // rep-major, one per (rep, method)
    std::vector<std::string> method_labels;
};

/// OpenMP over replications.
SimulationResult run_simulation(const ImputedSample& sample, std::span<const DesignSpec> methods,
                                const SimulationOptions& options);
/// Plain loop with the same per-replication arithmetic.
SimulationResult run_simulation_serial(const ImputedSample& sample,
                                       std::span<const DesignSpec> methods,
                                       const SimulationOptions& options);

enum class ReportFormat { Csv, Markdown };

std::string render_report(const MethodComparison& comparison, ReportFormat format,
                          const std::string& header_comment = {});
void emit_report(const MethodComparison& comparison, ReportFormat format,
                 const std::filesystem::path& path, const std::string& header_comment = {});

/// rep,method,tau_hat,se_hat,sq_error
std::string replications_to_csv(const SimulationResult& result, const std::string& header_comment);

std::string comparison_to_json(const MethodComparison& comparison);
MethodComparison comparison_from_json(std::string_view text);

}  // namespace stratkit::harness
