#include <algorithm>
#include <cmath>

#include "stratkit/error.hpp"
#include "stratkit/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stratkit::kernels {

CostMatrix::CostMatrix(std::size_t n, std::vector<double> data) : n_(n), data_(std::move(data)) {
    if (data_.size() != n * n) throw Error(Errc::DimensionMismatch, "cost matrix data is not n*n");
}

Eigen::MatrixXd whiten(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma_inv) {
    if (x.cols() != sigma_inv.rows() || sigma_inv.rows() != sigma_inv.cols()) {
        throw Error(Errc::DimensionMismatch, "covariates and sigma_inv disagree");
    }
    if (x.cols() == 0) return x;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_inv);
    if (llt.info() == Eigen::Success) {
        const Eigen::MatrixXd lower = llt.matrixL();
        return x * lower;
    }
    // Not numerically PD: use the clamped eigen square root.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma_inv);
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return x * eig.eigenvectors() * root.asDiagonal();
}

namespace {

struct Prepared {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<double> z;  // row-major n x k
    bool use_score = false;
    bool use_maha = false;
};

Prepared prepare(const HybridCostInputs& in) {
    if (!(in.lambda >= 0.0 && in.lambda <= 1.0)) {
        throw Error(Errc::InvalidLambda, "lambda outside [0, 1]");
    }
    Prepared p;
    p.use_score = in.lambda > 0.0;
    p.use_maha = in.lambda < 1.0 && in.whitened && in.whitened->cols() > 0;
    if (p.use_score) p.n = in.g_hat.size();
    if (in.whitened) {
        const auto rows = static_cast<std::size_t>(in.whitened->rows());
        if (p.use_score && rows != p.n && p.use_maha) {
            throw Error(Errc::DimensionMismatch, "score and covariate row counts differ");
        }
        if (!p.use_score) p.n = rows;
    }
    if (p.use_maha) {
        const Eigen::MatrixXd& w = *in.whitened;
        p.k = static_cast<std::size_t>(w.cols());
        p.z.resize(p.n * p.k);
        for (std::size_t i = 0; i < p.n; ++i) {
            for (std::size_t t = 0; t < p.k; ++t) {
                p.z[i * p.k + t] = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
            }
        }
    }
    return p;
}

inline double entry(const Prepared& p, const HybridCostInputs& in, std::size_t i, std::size_t j) {
    double score_term = 0.0;
    if (p.use_score && in.s_g_sq > 0.0) {
        const double dg = in.g_hat[i] - in.g_hat[j];
        score_term = dg * dg / in.s_g_sq;
    }
    double maha = 0.0;
    if (p.use_maha) {
        const double* zi = &p.z[i * p.k];
        const double* zj = &p.z[j * p.k];
        for (std::size_t t = 0; t < p.k; ++t) {
            const double d = zi[t] - zj[t];
            maha += d * d;
        }
    }
    return in.lambda * score_term + (1.0 - in.lambda) * maha;
}

}  // namespace

CostMatrix build_hybrid_cost_matrix(const HybridCostInputs& in, int threads) {
    const Prepared p = prepare(in);
    CostMatrix c(p.n);
    const auto n = static_cast<std::ptrdiff_t>(p.n);
#ifdef _OPENMP
    const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(nthreads)
#else
    (void)threads;
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        for (std::size_t j = ui + 1; j < p.n; ++j) {
            const double v = entry(p, in, ui, j);
            c(ui, j) = v;
            c(j, ui) = v;
        }
    }
    return c;
}

CostMatrix build_hybrid_cost_matrix_serial(const HybridCostInputs& in) {
    const Prepared p = prepare(in);
    CostMatrix c(p.n);
    for (std::size_t i = 0; i < p.n; ++i) {
        for (std::size_t j = i + 1; j < p.n; ++j) {
            const double v = entry(p, in, i, j);
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    return c;
}

namespace {

struct Quadratic {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<double> x;  // row-major n x k
    std::vector<double> s;  // row-major k x k
};

Quadratic prepare_quadratic(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma_inv) {
    if (x.cols() != sigma_inv.rows() || sigma_inv.rows() != sigma_inv.cols()) {
        throw Error(Errc::DimensionMismatch, "covariates and sigma_inv disagree");
    }
    Quadratic q;
    q.n = static_cast<std::size_t>(x.rows());
    q.k = static_cast<std::size_t>(x.cols());
    q.x.resize(q.n * q.k);
    q.s.resize(q.k * q.k);
    for (std::size_t i = 0; i < q.n; ++i)
        for (std::size_t t = 0; t < q.k; ++t)
            q.x[i * q.k + t] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
    for (std::size_t t = 0; t < q.k; ++t)
        for (std::size_t u = 0; u < q.k; ++u)
            q.s[t * q.k + u] = sigma_inv(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(u));
    return q;
}

inline double quadratic_entry(const Quadratic& q, std::size_t i, std::size_t j,
                              std::vector<double>& diff) {
    for (std::size_t t = 0; t < q.k; ++t) diff[t] = q.x[i * q.k + t] - q.x[j * q.k + t];
    double total = 0.0;
    for (std::size_t t = 0; t < q.k; ++t) {
        double row = 0.0;
        for (std::size_t u = 0; u < q.k; ++u) row += q.s[t * q.k + u] * diff[u];
        total += diff[t] * row;
    }
    return std::max(total, 0.0);
}

}  // namespace

CostMatrix build_mahalanobis_cost_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma_inv,
                                         int threads) {
    const Quadratic q = prepare_quadratic(x, sigma_inv);
    CostMatrix c(q.n);
    const auto n = static_cast<std::ptrdiff_t>(q.n);
#ifdef _OPENMP
    const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel num_threads(nthreads)
#else
    (void)threads;
#endif
    {
        std::vector<double> diff(q.k);
#ifdef _OPENMP
#pragma omp for schedule(dynamic, 16)
#endif
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            for (std::size_t j = ui + 1; j < q.n; ++j) {
                const double v = quadratic_entry(q, ui, j, diff);
                c(ui, j) = v;
                c(j, ui) = v;
            }
        }
    }
    return c;
}

CostMatrix build_mahalanobis_cost_matrix_serial(const Eigen::MatrixXd& x,
                                                const Eigen::MatrixXd& sigma_inv) {
    const Quadratic q = prepare_quadratic(x, sigma_inv);
    CostMatrix c(q.n);
    std::vector<double> diff(q.k);
    for (std::size_t i = 0; i < q.n; ++i) {
        for (std::size_t j = i + 1; j < q.n; ++j) {
            const double v = quadratic_entry(q, i, j, diff);
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    return c;
}

}  // namespace stratkit::kernels
