#include "stratkit/design.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "stratkit/error.hpp"
#include "stratkit/hash.hpp"
#include "stratkit/kernels.hpp"
#include "stratkit/matching.hpp"

namespace stratkit {

namespace {

bool starts_with(const std::string& s, std::string_view prefix) {
    return s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

template <class T>
void append_bytes(std::string& buf, const T* data, std::size_t count) {
    buf.append(reinterpret_cast<const char*>(data), count * sizeof(T));
}

// Maps strata formed on `active` (a subset of units) back to unit indices.
void remap(StratumSet& set, std::span<const std::size_t> active) {
    for (auto& s : set.strata) {
        for (auto& m : s.members) m = active[m];
    }
}

void order_pairs_by_score(StratumSet& set, std::span<const double> g_hat) {
    if (g_hat.empty()) return;
    auto key = [&](const Stratum& s) {
        double sum = 0.0;
        for (auto m : s.members) sum += g_hat[m];
        return std::make_pair(sum / static_cast<double>(s.size()),
                              *std::min_element(s.members.begin(), s.members.end()));
    };
    std::stable_sort(set.strata.begin(), set.strata.end(),
                     [&](const Stratum& a, const Stratum& b) { return key(a) < key(b); });
    for (std::size_t i = 0; i < set.strata.size(); ++i) set.strata[i].stratum_id = static_cast<int>(i);
}

StratumSet category_strata(std::span<const int> labels) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
    StratumSet set;
    set.method_tag = "categorical";
    int id = 0;
    for (auto& [label, members] : groups) set.strata.push_back({id++, std::move(members)});
    return set;
}

CovariateMatrix active_covariates(const DesignInput& input, std::span<const std::size_t> active,
                                  const char* method) {
    if (input.covariates == nullptr || input.covariates->cols() == 0) {
        throw Error(Errc::InvalidArgument, fmt::format("{} needs covariates", method));
    }
    if (static_cast<std::size_t>(input.covariates->rows()) != input.n) {
        throw Error(Errc::DimensionMismatch, "covariate rows differ from unit count");
    }
    return input.covariates->select_rows(active);
}

}  // namespace

DesignSpec DesignSpec::parse(const std::string& name) {
    DesignSpec spec;
    spec.label = name;
    if (name == "simple") {
        spec.method = DesignMethod::Simple;
    } else if (name == "regression") {
        spec.method = DesignMethod::Regression;
    } else if (name == "categorical") {
        spec.method = DesignMethod::Categorical;
    } else if (name == "sorted-pair") {
        spec.method = DesignMethod::SortedPair;
    } else if (name == "mahalanobis-pair") {
        spec.method = DesignMethod::MahalanobisPair;
    } else if (name == "hybrid-pair") {
        spec.method = DesignMethod::HybridPair;
    } else if (starts_with(name, "hybrid-pair-")) {
        spec.method = DesignMethod::HybridPair;
        const std::string tail = name.substr(12);
        double lambda = 0.0;
        const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), lambda);
        if (ec != std::errc{} || ptr != tail.data() + tail.size() || !(lambda >= 0.0 && lambda <= 1.0)) {
            throw Error(Errc::InvalidLambda, fmt::format("bad lambda in '{}'", name));
        }
        spec.lambda = lambda;
    } else if (starts_with(name, "sorted-block-")) {
        spec.method = DesignMethod::SortedBlock;
        const std::string tail = name.substr(13);
        std::size_t k = 0;
        const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), k);
        if (ec != std::errc{} || ptr != tail.data() + tail.size() || k < 2) {
            throw Error(Errc::InvalidArgument, fmt::format("bad block size in '{}'", name));
        }
        spec.block_size = k;
        if (k == 2) spec.method = DesignMethod::SortedPair;
    } else {
        throw Error(Errc::InvalidArgument, fmt::format("unknown design method '{}'", name));
    }
    return spec;
}

bool DesignSpec::uses_scores() const noexcept {
    return method == DesignMethod::SortedPair || method == DesignMethod::SortedBlock ||
           method == DesignMethod::HybridPair;
}

bool DesignSpec::uses_covariates() const noexcept {
    return method == DesignMethod::Regression || method == DesignMethod::MahalanobisPair ||
           method == DesignMethod::HybridPair;
}

bool DesignSpec::is_pair_design() const noexcept {
    return method == DesignMethod::SortedPair || method == DesignMethod::MahalanobisPair ||
           method == DesignMethod::HybridPair;
}

std::string DesignInput::fingerprint() const {
    std::string buf;
    const std::uint64_t sizes[] = {n, g_hat.size(),
                                   covariates ? static_cast<std::uint64_t>(covariates->values.size()) : 0,
                                   categories.size()};
    append_bytes(buf, sizes, 4);
    append_bytes(buf, g_hat.data(), g_hat.size());
    if (covariates) append_bytes(buf, covariates->values.data(), static_cast<std::size_t>(covariates->values.size()));
    append_bytes(buf, categories.data(), categories.size());
    return sha256_hex(buf);
}

StratumSet form_strata(const DesignSpec& spec, const DesignInput& input,
                       std::optional<double>* lambda_used, std::vector<std::string>* warnings,
                       int threads) {
    const std::size_t n = input.n;
    if (!input.g_hat.empty() && input.g_hat.size() != n) {
        throw Error(Errc::LengthMismatch, "score count differs from unit count");
    }
    if (spec.uses_scores() && input.g_hat.empty()) {
        throw Error(Errc::InvalidArgument, fmt::format("{} needs scores", spec.label));
    }

    switch (spec.method) {
    case DesignMethod::Simple:
    case DesignMethod::Regression: {
        StratumSet set;
        set.method_tag = spec.label;
        return set;
    }
    case DesignMethod::Categorical: {
        if (input.categories.size() != n) {
            throw Error(Errc::InvalidArgument, "categorical design needs a label per unit");
        }
        StratumSet set = category_strata(input.categories);
        set.method_tag = spec.label;
        return set;
    }
    case DesignMethod::SortedBlock: {
        StratumSet set = sorted_block_strata(input.g_hat, spec.block_size);
        set.method_tag = spec.label;
        return set;
    }
    default:
        break;
    }

    // Pair designs.
    if (n < 2) throw Error(Errc::BlockTooLarge, "pairing needs at least two units");
    std::vector<std::size_t> active(n);
    std::iota(active.begin(), active.end(), 0);
    std::optional<std::size_t> leftover;
    if (n % 2 == 1) {
        leftover = input.g_hat.empty() ? n - 1 : score_order(input.g_hat)[n / 2];
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(*leftover));
    }
    std::vector<double> g_active;
    if (!input.g_hat.empty()) {
        g_active.reserve(active.size());
        for (auto u : active) g_active.push_back(input.g_hat[u]);
    }

    StratumSet set;
    if (spec.method == DesignMethod::SortedPair) {
        set = sorted_block_strata(g_active, 2);
    } else if (spec.method == DesignMethod::MahalanobisPair) {
        const CovariateMatrix x = active_covariates(input, active, "mahalanobis-pair");
        CovarianceEstimate cov = estimate_covariance(x, spec.ridge_epsilon);
        if (warnings) warnings->insert(warnings->end(), cov.warnings.begin(), cov.warnings.end());
        if (cov.kept_columns.empty()) {
            throw Error(Errc::InvalidArgument, "no non-constant covariates for mahalanobis-pair");
        }
        const CovariateMatrix kept = x.select_columns(cov.kept_columns);
        set = min_cost_pair_matching(
            kernels::build_mahalanobis_cost_matrix(kept.values, cov.sigma_inv, threads));
    } else {
        Eigen::MatrixXd whitened;
        std::size_t k = 0;
        const bool pure_score = spec.lambda && *spec.lambda == 1.0;
        if (!pure_score) {
            const CovariateMatrix x = active_covariates(input, active, "hybrid-pair");
            CovarianceEstimate cov = estimate_covariance(x, spec.ridge_epsilon);
            if (warnings) warnings->insert(warnings->end(), cov.warnings.begin(), cov.warnings.end());
            k = cov.kept_columns.size();
            if (k > 0) whitened = kernels::whiten(x.select_columns(cov.kept_columns).values, cov.sigma_inv);
        }
        const double lambda = spec.lambda.value_or(default_lambda(k));
        if (lambda < 1.0 && k == 0) {
            throw Error(Errc::InvalidArgument, "hybrid-pair with lambda < 1 needs covariates");
        }
        if (lambda_used) *lambda_used = lambda;
        kernels::HybridCostInputs in;
        in.g_hat = g_active;
        in.s_g_sq = sample_variance(g_active);
        in.whitened = k > 0 ? &whitened : nullptr;
        in.lambda = lambda;
        set = min_cost_pair_matching(kernels::build_hybrid_cost_matrix(in, threads));
    }
    remap(set, active);
    if (spec.method != DesignMethod::SortedPair) order_pairs_by_score(set, input.g_hat);
    set.method_tag = spec.label;
    set.leftover = leftover;
    return set;
}

Design run_design(const DesignSpec& spec, const DesignInput& input, double p, std::uint64_t seed,
                  int threads) {
    Design design;
    design.input_fingerprint = input.fingerprint();
    design.strata = form_strata(spec, input, &design.lambda_used, &design.warnings, threads);
    switch (spec.method) {
    case DesignMethod::Simple:
    case DesignMethod::Regression:
        design.assignment = simple_randomization(input.n, p, seed);
        break;
    case DesignMethod::Categorical:
        design.assignment = assign_within_blocks_complete(design.strata, p, seed);
        break;
    default:
        design.assignment = assign_within_strata(design.strata, p, seed);
        break;
    }
    if (input.fingerprint() != design.input_fingerprint) {
        throw Error(Errc::InvalidArgument, "design inputs changed while forming the design");
    }
    return design;
}

EstimateReport estimate_design(const DesignSpec& spec, const Design& design,
                               std::span<const double> y, const CovariateMatrix* covariates) {
    const std::vector<int> d = design.assignment.treatment_vector();
    switch (spec.method) {
    case DesignMethod::Simple:
        return difference_in_means(y, d);
    case DesignMethod::Regression: {
        if (covariates == nullptr) return ols_adjusted_estimate(y, d, Eigen::MatrixXd{});
        return ols_adjusted_estimate(y, d, covariates->values);
    }
    case DesignMethod::Categorical:
        try {
            return stratified_estimate(design.strata, y, d);
        } catch (const Error& e) {
            if (e.code() != Errc::EmptyArm) throw;
            return difference_in_means(y, d);
        }
    case DesignMethod::SortedBlock:
        return stratified_estimate(design.strata, y, d);
    default:
        break;
    }
    EstimateReport r = difference_in_means(y, d);
    r.estimator_tag = "matched-pair";
    if (design.strata.strata.size() >= 4) r.se_hat = matched_pair_variance(design.strata, y, d).se;
    return r;
}

}  // namespace stratkit
