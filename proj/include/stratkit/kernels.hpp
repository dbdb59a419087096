#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

// Data-parallel kernels. Each parallel kernel has a serial twin with the
// same arithmetic; tests require the two to agree bit for bit.
namespace stratkit::kernels {

/// Dense symmetric n x n matrix, row-major.
class CostMatrix {
public:
    CostMatrix() = default;
    explicit CostMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}
    CostMatrix(std::size_t n, std::vector<double> data);

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const CostMatrix&, const CostMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

/// Rows z_i such that |z_i - z_j|^2 = (x_i - x_j)' sigma_inv (x_i - x_j).
Eigen::MatrixXd whiten(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma_inv);

struct HybridCostInputs {
    std::span<const double> g_hat;  // may be empty when lambda == 0
    double s_g_sq = 0.0;
    const Eigen::MatrixXd* whitened = nullptr;  // may be null when lambda == 1
    double lambda = 1.0;
};

/// OpenMP over rows; `threads` <= 0 uses the runtime default.
CostMatrix build_hybrid_cost_matrix(const HybridCostInputs& in, int threads = 0);
CostMatrix build_hybrid_cost_matrix_serial(const HybridCostInputs& in);

/// Squared Mahalanobis distances evaluated as the quadratic form on raw
/// covariate differences (no whitening), so it is an independent route to
/// the lambda = 0 hybrid cost.
CostMatrix build_mahalanobis_cost_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma_inv,
                                         int threads = 0);
CostMatrix build_mahalanobis_cost_matrix_serial(const Eigen::MatrixXd& x,
                                                const Eigen::MatrixXd& sigma_inv);

}  // namespace stratkit::kernels
