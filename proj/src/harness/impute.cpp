#include <fmt/format.h>

#include "stratkit/error.hpp"
#include "stratkit/harness.hpp"

namespace stratkit::harness {

namespace {

struct ArmFit {
    Eigen::VectorXd coef;  // intercept first
    double mean = 0.0;
    bool linear = false;
};

ArmFit fit_arm(const Eigen::MatrixXd& x, const std::vector<double>& y,
               const std::vector<std::size_t>& rows) {
    ArmFit fit;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index p = x.cols() + 1;
    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd target(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto u = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
        design(r, 0) = 1.0;
        design.row(r).tail(p - 1) = x.row(u);
        target[r] = y[rows[static_cast<std::size_t>(r)]];
    }
    fit.mean = target.mean();
    if (n <= p) return fit;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) return fit;
    fit.coef = qr.solve(target);
    fit.linear = true;
    return fit;
}

}  // namespace

ImputedSample impute_counterfactuals(const Dataset& dataset,
                                     std::span<const std::string> covariate_subset) {
    if (!dataset.has_outcomes()) {
        throw Error(Errc::InvalidArgument, "imputation needs observed outcomes and treatments");
    }
    const std::size_t n = dataset.units.size();
    ImputedSample s;
    s.x = build_covariate_matrix(dataset, covariate_subset);
    std::vector<double> y(n);
    std::vector<std::size_t> treated, control;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& u = dataset.units[i];
        y[i] = *u.observed_outcome;
        (*u.observed_treatment == 1 ? treated : control).push_back(i);
        s.unit_ids.push_back(u.unit_id);
    }
    if (treated.empty() || control.empty()) {
        throw Error(Errc::EmptyArm, "imputation needs both arms");
    }

    const ArmFit m1 = fit_arm(s.x.values, y, treated);
    const ArmFit m0 = fit_arm(s.x.values, y, control);
    const bool linear = m1.linear && m0.linear;
    if (!linear) {
        s.warnings.push_back("RankDeficient: arm regression is rank deficient; imputing with arm means");
    }

    s.y0.resize(n);
    s.y1.resize(n);
    s.y0_source.resize(n);
    s.y1_source.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double effect = m1.mean - m0.mean;
        if (linear) {
            const auto row = s.x.values.row(static_cast<Eigen::Index>(i));
            const double f1 = m1.coef[0] + row.dot(m1.coef.tail(row.size()));
            const double f0 = m0.coef[0] + row.dot(m0.coef.tail(row.size()));
            effect = f1 - f0;
        }
        if (*dataset.units[i].observed_treatment == 1) {
            s.y1[i] = y[i];
            s.y0[i] = y[i] - effect;
            s.y1_source[i] = Provenance::Observed;
            s.y0_source[i] = Provenance::Imputed;
        } else {
            s.y0[i] = y[i];
            s.y1[i] = y[i] + effect;
            s.y0_source[i] = Provenance::Observed;
            s.y1_source[i] = Provenance::Imputed;
        }
    }
    return s;
}

}  // namespace stratkit::harness
