#include "stratkit/estimation.hpp"

#include <cmath>

#include <fmt/format.h>

#include "stratkit/error.hpp"

namespace stratkit {

namespace {

void check_lengths(std::span<const double> y, std::span<const int> d) {
    if (y.size() != d.size()) {
        throw Error(Errc::LengthMismatch,
                    fmt::format("{} outcomes vs {} treatments", y.size(), d.size()));
    }
}

struct ArmMoments {
    std::size_t n = 0;
    double mean = 0.0;
    double var = 0.0;  // divisor n - 1, zero for a single unit
};

ArmMoments moments(std::span<const double> y, std::span<const int> d, int arm) {
    ArmMoments m;
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (d[i] == arm) {
            ++m.n;
            sum += y[i];
        }
    }
    if (m.n == 0) return m;
    m.mean = sum / static_cast<double>(m.n);
    if (m.n > 1) {
        double ss = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (d[i] == arm) ss += (y[i] - m.mean) * (y[i] - m.mean);
        }
        m.var = ss / static_cast<double>(m.n - 1);
    }
    return m;
}

}  // namespace

EstimateReport difference_in_means(std::span<const double> y, std::span<const int> d) {
    check_lengths(y, d);
    const ArmMoments t = moments(y, d, 1);
    const ArmMoments c = moments(y, d, 0);
    if (t.n == 0 || c.n == 0) throw Error(Errc::EmptyArm, "both arms need at least one unit");
    EstimateReport r;
    r.tau_hat = t.mean - c.mean;
    r.se_hat = std::sqrt(t.var / static_cast<double>(t.n) + c.var / static_cast<double>(c.n));
    r.estimator_tag = "difference-in-means";
    r.n_used = t.n + c.n;
    return r;
}

EstimateReport ols_adjusted_estimate(std::span<const double> y, std::span<const int> d,
                                     const Eigen::MatrixXd& covariates,
                                     std::vector<std::string>* warnings) {
    check_lengths(y, d);
    const auto n = static_cast<Eigen::Index>(y.size());
    if (covariates.cols() > 0 && covariates.rows() != n) {
        throw Error(Errc::DimensionMismatch, "covariate rows differ from outcome count");
    }
    const EstimateReport dim = difference_in_means(y, d);

    // Orthonormal basis of accepted columns; a column is kept when its
    // residual against the basis is not negligible.
    Eigen::MatrixXd basis(n, 2 + covariates.cols());
    Eigen::Index kept = 0;
    std::vector<Eigen::Index> kept_cov;
    auto try_add = [&](Eigen::VectorXd col) {
        const double norm0 = col.norm();
        if (norm0 == 0.0) return false;
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index b = 0; b < kept; ++b) col -= basis.col(b).dot(col) * basis.col(b);
        }
        const double norm = col.norm();
        if (norm <= 1e-9 * norm0) return false;
        basis.col(kept++) = col / norm;
        return true;
    };
    try_add(Eigen::VectorXd::Ones(n));
    Eigen::VectorXd dvec(n);
    for (Eigen::Index i = 0; i < n; ++i) dvec[i] = d[static_cast<std::size_t>(i)];
    if (!try_add(dvec)) throw Error(Errc::RankDeficient, "treatment is collinear with intercept");
    for (Eigen::Index c = 0; c < covariates.cols(); ++c) {
        if (try_add(covariates.col(c))) {
            kept_cov.push_back(c);
        } else if (warnings) {
            warnings->push_back(fmt::format("covariate column {} is collinear and was dropped", c));
        }
    }
    if (kept_cov.empty()) {
        EstimateReport r = dim;
        r.estimator_tag = "ols-hc2";
        return r;
    }

    const Eigen::Index p = 2 + static_cast<Eigen::Index>(kept_cov.size());
    if (n <= p) throw Error(Errc::RankDeficient, "more regressors than observations");
    Eigen::MatrixXd x(n, p);
    x.col(0).setOnes();
    x.col(1) = dvec;
    for (std::size_t c = 0; c < kept_cov.size(); ++c) {
        x.col(2 + static_cast<Eigen::Index>(c)) = covariates.col(kept_cov[c]);
    }
    const Eigen::Map<const Eigen::VectorXd> yvec(y.data(), n);

    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    const Eigen::VectorXd beta = qr.solve(yvec);
    const Eigen::VectorXd resid = yvec - x * beta;
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    const Eigen::VectorXd leverage = q.rowwise().squaredNorm();

    const Eigen::MatrixXd xtx_inv = (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        w[i] = resid[i] * resid[i] / std::max(1.0 - leverage[i], 1e-12);
    }
    const Eigen::MatrixXd meat = x.transpose() * w.asDiagonal() * x;
    const Eigen::MatrixXd cov = xtx_inv * meat * xtx_inv;

    EstimateReport r;
    r.tau_hat = beta[1];
    r.se_hat = std::sqrt(std::max(cov(1, 1), 0.0));
    r.estimator_tag = "ols-hc2";
    r.n_used = static_cast<std::size_t>(n);
    return r;
}

EstimateReport stratified_estimate(const StratumSet& strata, std::span<const double> y,
                                   std::span<const int> d) {
    check_lengths(y, d);
    double total = 0.0;
    for (const auto& s : strata.strata) total += static_cast<double>(s.size());
    if (total == 0.0) throw Error(Errc::EmptyArm, "no strata");

    double tau = 0.0;
    double var = 0.0;
    bool fallback = false;
    std::vector<double> ys;
    std::vector<int> ds;
    for (const auto& s : strata.strata) {
        ys.clear();
        ds.clear();
        for (auto u : s.members) {
            ys.push_back(y[u]);
            ds.push_back(d[u]);
        }
        const ArmMoments t = moments(ys, ds, 1);
        const ArmMoments c = moments(ys, ds, 0);
        if (t.n == 0 || c.n == 0) {
            throw Error(Errc::EmptyArm,
                        fmt::format("stratum {} has an empty arm", s.stratum_id));
        }
        const double w = static_cast<double>(s.size()) / total;
        tau += w * (t.mean - c.mean);
        if (t.n < 2 || c.n < 2) fallback = true;
        var += w * w * (t.var / static_cast<double>(t.n) + c.var / static_cast<double>(c.n));
    }
    EstimateReport r;
    r.tau_hat = tau;
    r.estimator_tag = "stratified";
    r.n_used = static_cast<std::size_t>(total);
    if (fallback) {
        std::vector<double> yy;
        std::vector<int> dd;
        for (const auto& s : strata.strata) {
            for (auto u : s.members) {
                yy.push_back(y[u]);
                dd.push_back(d[u]);
            }
        }
        r.se_hat = difference_in_means(yy, dd).se_hat;
    } else {
        r.se_hat = std::sqrt(var);
    }
    return r;
}

PairedVariance matched_pair_variance(const StratumSet& pairs, std::span<const double> y,
                                     std::span<const int> d) {
    check_lengths(y, d);
    const std::size_t k = pairs.strata.size();
    std::vector<double> sums;
    sums.reserve(k);
    double sum1 = 0.0, sum0 = 0.0;
    std::vector<double> y1, y0;
    y1.reserve(k);
    y0.reserve(k);
    for (const auto& s : pairs.strata) {
        if (s.size() != 2) {
            throw Error(Errc::NotPairedDesign,
                        fmt::format("stratum {} has {} members", s.stratum_id, s.size()));
        }
        const auto a = s.members[0];
        const auto b = s.members[1];
        if (d[a] + d[b] != 1) {
            throw Error(Errc::NotPairedDesign,
                        fmt::format("stratum {} does not have exactly one treated unit",
                                    s.stratum_id));
        }
        const std::size_t t = d[a] == 1 ? a : b;
        const std::size_t c = d[a] == 1 ? b : a;
        y1.push_back(y[t]);
        y0.push_back(y[c]);
        sum1 += y[t];
        sum0 += y[c];
        sums.push_back(y[t] + y[c]);
    }
    if (k < 4) throw Error(Errc::TooFewPairs, fmt::format("{} pairs; need at least 4", k));

    const double kd = static_cast<double>(k);
    PairedVariance out;
    out.pairs = k;
    out.mu1 = sum1 / kd;
    out.mu0 = sum0 / kd;
    for (std::size_t j = 0; j < k; ++j) {
        out.sigma1_sq += (y1[j] - out.mu1) * (y1[j] - out.mu1);
        out.sigma0_sq += (y0[j] - out.mu0) * (y0[j] - out.mu0);
    }
    out.sigma1_sq /= kd;
    out.sigma0_sq /= kd;

    double cross = 0.0;
    for (std::size_t j = 0; j + 1 < k; j += 2) cross += sums[j] * sums[j + 1];
    out.rho_hat = cross / static_cast<double>(k / 2);

    const double mu_sum = out.mu1 + out.mu0;
    out.varsigma_sq =
        out.sigma1_sq + out.sigma0_sq - 0.5 * out.rho_hat + 0.5 * mu_sum * mu_sum;
    out.se = std::sqrt(std::max(out.varsigma_sq, 0.0) / kd);
    return out;
}

double theoretical_variance_ratio(double var_y1, double var_y0, double var_cond) {
    if (var_y1 < 0.0 || var_y0 < 0.0 || var_cond < 0.0) {
        throw Error(Errc::InvalidArgument, "variances must be nonnegative");
    }
    const double denom = 2.0 * (var_y1 + var_y0);
    if (!(denom > 0.0)) throw Error(Errc::DegenerateDenominator, "Var[Y(1)] + Var[Y(0)] is zero");
    return 1.0 - var_cond / denom;
}

}  // namespace stratkit
