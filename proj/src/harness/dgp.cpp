#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "stratkit/error.hpp"
#include "stratkit/harness.hpp"
#include "stratkit/rng.hpp"

namespace stratkit::harness {

double ImputedSample::tau() const {
    if (y0.empty()) throw Error(Errc::EmptyDataset, "sample has no units");
    double sum = 0.0;
    for (std::size_t i = 0; i < y0.size(); ++i) sum += y1[i] - y0[i];
    return sum / static_cast<double>(y0.size());
}

SyntheticDGP make_linear_dgp(std::size_t dim, double alpha, std::vector<double> beta,
                             std::vector<double> gamma, double noise_sd, std::uint64_t seed) {
    if (!(noise_sd >= 0.0)) throw Error(Errc::InvalidArgument, "noise_sd must be >= 0");
    if (beta.empty()) beta.assign(dim, 0.0);
    if (gamma.empty()) gamma.assign(dim, 0.0);
    if (beta.size() != dim || gamma.size() != dim) {
        throw Error(Errc::DimensionMismatch,
                    fmt::format("dim {} but {} beta and {} gamma coefficients", dim, beta.size(),
                                gamma.size()));
    }
    SyntheticDGP dgp;
    dgp.dim = dim;
    dgp.alpha = alpha;
    dgp.beta = std::move(beta);
    dgp.gamma = std::move(gamma);
    dgp.noise_sd = noise_sd;
    dgp.seed = seed;

    const double s2 = noise_sd * noise_sd;
    double bb = 0.0, bg = 0.0, cc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        const double b = dgp.beta[j];
        const double bgj = b + dgp.gamma[j];
        const double c = 2.0 * b + dgp.gamma[j];
        bb += b * b;
        bg += bgj * bgj;
        cc += c * c;
    }
    dgp.var_y0 = bb + s2;
    dgp.var_y1 = bg + s2;
    dgp.var_cond = cc;
    dgp.mean_g = alpha;
    return dgp;
}

double SyntheticDGP::g_star(std::span<const double> x) const {
    double g = alpha;
    for (std::size_t j = 0; j < dim; ++j) g += (2.0 * beta[j] + gamma[j]) * x[j];
    return g;
}

double SyntheticDGP::theoretical_ratio() const {
    return theoretical_variance_ratio(var_y1, var_y0, var_cond);
}

double SyntheticDGP::v_paired() const { return var_y1 + var_y0 - 0.5 * var_cond; }

ImputedSample SyntheticDGP::sample(std::size_t n) const {
    ImputedSample s;
    s.y0.resize(n);
    s.y1.resize(n);
    s.y0_source.assign(n, Provenance::Synthetic);
    s.y1_source.assign(n, Provenance::Synthetic);
    s.g_hat.resize(n);
    s.x.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim; ++j) s.x.columns.push_back(fmt::format("x{}", j + 1));
    s.unit_ids.reserve(n);

    auto gen = rng::stream(seed, rng::Domain::Population);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < n; ++i) {
        double lin0 = 0.0, lin_tau = alpha;
        for (std::size_t j = 0; j < dim; ++j) {
            x[j] = normal(gen);
            s.x.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[j];
            lin0 += beta[j] * x[j];
            lin_tau += gamma[j] * x[j];
        }
        const double eps = noise_sd * normal(gen);
        s.y0[i] = lin0 + eps;
        s.y1[i] = lin0 + lin_tau + eps;
        s.g_hat[i] = g_star(x);
        s.unit_ids.push_back(fmt::format("{:06d}", i));
    }
    return s;
}

void set_correlated_scores(ImputedSample& sample, const SyntheticDGP& dgp, double corr,
                           std::uint64_t seed) {
    if (!(corr >= -1.0 && corr <= 1.0)) throw Error(Errc::InvalidArgument, "correlation outside [-1, 1]");
    const double sd = std::sqrt(dgp.var_cond);
    auto gen = rng::stream(seed, rng::Domain::Score);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double noise_w = std::sqrt(1.0 - corr * corr);
    std::vector<double> x(dgp.dim);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double xi = normal(gen);
        double z = 0.0;
        if (sd > 0.0) {
            for (std::size_t j = 0; j < dgp.dim; ++j) {
                x[j] = sample.x.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
            z = (dgp.g_star(x) - dgp.mean_g) / sd;
        }
        sample.g_hat[i] = corr * z + noise_w * xi;
    }
}

}  // namespace stratkit::harness
