#include "stratkit/stratification.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "stratkit/csv.hpp"
#include "stratkit/error.hpp"

namespace stratkit {

std::size_t StratumSet::unit_count() const noexcept {
    std::size_t n = leftover ? 1 : 0;
    for (const auto& s : strata) n += s.size();
    return n;
}

void validate_partition(const StratumSet& set, std::size_t n) {
    std::vector<char> seen(n, 0);
    auto mark = [&](std::size_t u) {
        if (u >= n) throw Error(Errc::InvalidArgument, fmt::format("unit index {} out of range", u));
        if (seen[u]++) throw Error(Errc::InvalidArgument, fmt::format("unit {} in two strata", u));
    };
    for (const auto& s : set.strata) {
        if (s.size() < 2) {
            throw Error(Errc::InvalidArgument,
                        fmt::format("stratum {} has {} member(s)", s.stratum_id, s.size()));
        }
        for (auto u : s.members) mark(u);
    }
    if (set.leftover) mark(*set.leftover);
    for (std::size_t u = 0; u < n; ++u) {
        if (!seen[u]) throw Error(Errc::InvalidArgument, fmt::format("unit {} not assigned", u));
    }
}

std::string strata_to_csv(const StratumSet& set, std::span<const std::string> unit_ids,
                          const std::string& header_comment) {
    std::string out;
    if (!header_comment.empty()) out += "# " + header_comment + "\n";
    out += csv::format_row({"unit_id", "stratum_id", "method_tag"});
    for (const auto& s : set.strata) {
        for (auto u : s.members) {
            out += csv::format_row({unit_ids[u], std::to_string(s.stratum_id), set.method_tag});
        }
    }
    if (set.leftover) out += csv::format_row({unit_ids[*set.leftover], "", set.method_tag});
    return out;
}

std::vector<std::size_t> score_order(std::span<const double> g_hat) {
    std::vector<std::size_t> order(g_hat.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return g_hat[a] < g_hat[b]; });
    return order;
}

StratumSet sorted_block_strata(std::span<const double> g_hat, std::size_t k) {
    const std::size_t n = g_hat.size();
    if (k < 2) throw Error(Errc::InvalidArgument, "block size must be at least 2");
    if (k > n) {
        throw Error(Errc::BlockTooLarge, fmt::format("block size {} exceeds {} units", k, n));
    }
    const auto order = score_order(g_hat);
    StratumSet set;
    set.method_tag = k == 2 ? "sorted-pair" : fmt::format("sorted-block-{}", k);
    const std::size_t full = n / k;
    for (std::size_t b = 0; b < full; ++b) {
        Stratum s;
        s.stratum_id = static_cast<int>(b);
        const std::size_t end = (b + 1 == full) ? n : (b + 1) * k;
        s.members.assign(order.begin() + static_cast<std::ptrdiff_t>(b * k),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
        set.strata.push_back(std::move(s));
    }
    return set;
}

StratumSet sorted_block_strata(std::span<const ScoredUnit> scored, std::size_t k) {
    std::vector<double> g(scored.size());
    std::transform(scored.begin(), scored.end(), g.begin(), [](const auto& s) { return s.g_hat; });
    return sorted_block_strata(std::span<const double>(g), k);
}

// ---------------------------------------------------------------------------

CovariateMatrix CovariateMatrix::select_rows(std::span<const std::size_t> rows) const {
    CovariateMatrix out;
    out.columns = columns;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

CovariateMatrix CovariateMatrix::select_columns(std::span<const std::size_t> cols) const {
    CovariateMatrix out;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        out.values.col(static_cast<Eigen::Index>(c)) = values.col(static_cast<Eigen::Index>(cols[c]));
        out.columns.push_back(columns.at(cols[c]));
    }
    return out;
}

CovariateMatrix build_covariate_matrix(const Dataset& dataset,
                                       std::span<const std::string> covariate_subset) {
    const auto n = static_cast<Eigen::Index>(dataset.units.size());
    std::vector<Eigen::VectorXd> cols;
    CovariateMatrix out;
    for (const auto& name : covariate_subset) {
        const auto idx = dataset.schema.index_of(name);
        if (!idx) throw Error(Errc::InvalidSchema, "unknown covariate '" + name + "'", name);
        const Variable& var = dataset.schema.variables()[*idx];
        if (var.kind == VariableKind::Text) {
            throw Error(Errc::InvalidArgument,
                        "text covariate '" + name + "' cannot enter a distance metric", name);
        }
        if (var.kind == VariableKind::Numeric) {
            Eigen::VectorXd col(n);
            for (Eigen::Index r = 0; r < n; ++r) {
                col[r] = std::get<double>(dataset.units[static_cast<std::size_t>(r)].values[*idx]);
            }
            cols.push_back(std::move(col));
            out.columns.push_back(name);
            continue;
        }
        std::set<std::string> levels;
        for (const auto& u : dataset.units) levels.insert(std::get<std::string>(u.values[*idx]));
        // First level is the reference.
        for (auto it = std::next(levels.begin()); it != levels.end(); ++it) {
            Eigen::VectorXd col(n);
            for (Eigen::Index r = 0; r < n; ++r) {
                col[r] = std::get<std::string>(dataset.units[static_cast<std::size_t>(r)].values[*idx]) ==
                                 *it
                             ? 1.0
                             : 0.0;
            }
            cols.push_back(std::move(col));
            out.columns.push_back(name + "=" + *it);
        }
    }
    out.values.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.values.col(static_cast<Eigen::Index>(c)) = cols[c];
    return out;
}

CovarianceEstimate estimate_covariance(const CovariateMatrix& x, double ridge_epsilon) {
    if (x.rows() < 2) throw Error(Errc::InvalidArgument, "covariance needs at least 2 units");
    if (ridge_epsilon < 0.0) throw Error(Errc::InvalidArgument, "ridge_epsilon must be >= 0");
    CovarianceEstimate est;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const auto col = x.values.col(c);
        if ((col.array() == col[0]).all()) {
            est.warnings.push_back(fmt::format("DegenerateCovariate: '{}' is constant and was dropped",
                                               x.columns[static_cast<std::size_t>(c)]));
            continue;
        }
        est.kept_columns.push_back(static_cast<std::size_t>(c));
        est.kept_names.push_back(x.columns[static_cast<std::size_t>(c)]);
    }
    const auto k = static_cast<Eigen::Index>(est.kept_columns.size());
    if (k == 0) {
        est.sigma.resize(0, 0);
        est.sigma_inv.resize(0, 0);
        return est;
    }
    Eigen::MatrixXd kept(x.rows(), k);
    for (Eigen::Index c = 0; c < k; ++c) {
        kept.col(c) = x.values.col(static_cast<Eigen::Index>(est.kept_columns[static_cast<std::size_t>(c)]));
    }
    const Eigen::RowVectorXd mean = kept.colwise().mean();
    const Eigen::MatrixXd centered = kept.rowwise() - mean;
    est.sigma = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.sigma, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    const bool ill = !(lo > 0.0) || hi / lo > 1e12;

    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!ill) llt.compute(est.sigma);
    if (ill || llt.info() != Eigen::Success) {
        const double ridge = ridge_epsilon * est.sigma.diagonal().mean();
        Eigen::MatrixXd reg = est.sigma;
        reg.diagonal().array() += ridge;
        llt.compute(reg);
        est.regularized = true;
        est.warnings.push_back(fmt::format("covariance ill-conditioned; added ridge {:g}", ridge));
        if (llt.info() != Eigen::Success) {
            throw Error(Errc::RankDeficient, "covariance not invertible after ridge");
        }
    }
    est.sigma_inv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    est.sigma_inv = 0.5 * (est.sigma_inv + est.sigma_inv.transpose());
    return est;
}

CovarianceEstimate estimate_covariance(const Dataset& dataset,
                                       std::span<const std::string> covariate_subset,
                                       double ridge_epsilon) {
    return estimate_covariance(build_covariate_matrix(dataset, covariate_subset), ridge_epsilon);
}

double mahalanobis_distance(std::span<const double> xi, std::span<const double> xj,
                            const Eigen::MatrixXd& sigma_inv) {
    if (xi.size() != xj.size() || static_cast<Eigen::Index>(xi.size()) != sigma_inv.rows() ||
        sigma_inv.rows() != sigma_inv.cols()) {
        throw Error(Errc::DimensionMismatch,
                    fmt::format("vectors of size {} and {} against a {}x{} matrix", xi.size(),
                                xj.size(), sigma_inv.rows(), sigma_inv.cols()));
    }
    Eigen::VectorXd d(static_cast<Eigen::Index>(xi.size()));
    for (std::size_t t = 0; t < xi.size(); ++t) d[static_cast<Eigen::Index>(t)] = xi[t] - xj[t];
    const double q = d.dot(sigma_inv * d);
    return std::sqrt(std::max(q, 0.0));
}

// ---------------------------------------------------------------------------

void HybridCostParams::validate() const {
    if (lambda && !(*lambda >= 0.0 && *lambda <= 1.0)) {
        throw Error(Errc::InvalidLambda, fmt::format("lambda = {} is outside [0, 1]", *lambda));
    }
    if ((!lambda || *lambda < 1.0) && covariate_subset.empty()) {
        throw Error(Errc::InvalidArgument, "hybrid cost with lambda < 1 needs covariates");
    }
    if (ridge_epsilon < 0.0) throw Error(Errc::InvalidArgument, "ridge_epsilon must be >= 0");
}

double hybrid_pair_cost(std::size_t i, std::size_t j, std::span<const double> g_hats,
                        double s_g_sq, const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma_inv,
                        double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw Error(Errc::InvalidLambda, fmt::format("lambda = {} is outside [0, 1]", lambda));
    }
    double score_term = 0.0;
    if (s_g_sq > 0.0) {
        const double dg = g_hats[i] - g_hats[j];
        score_term = dg * dg / s_g_sq;
    }
    double maha_sq = 0.0;
    if (lambda < 1.0 && x.cols() > 0) {
        if (x.cols() != sigma_inv.rows()) {
            throw Error(Errc::DimensionMismatch, "covariates and sigma_inv disagree");
        }
        const Eigen::VectorXd d =
            (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).transpose();
        maha_sq = std::max(d.dot(sigma_inv * d), 0.0);
    }
    return lambda * score_term + (1.0 - lambda) * maha_sq;
}

double default_lambda(std::size_t k) noexcept { return 1.0 / (static_cast<double>(k) + 1.0); }

double sample_variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

}  // namespace stratkit
