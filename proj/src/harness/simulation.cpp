#include <algorithm>
#include <cmath>
#include <random>

#include <omp.h>

#include <fmt/format.h>

#include "stratkit/error.hpp"
#include "stratkit/harness.hpp"
#include "stratkit/rng.hpp"

namespace stratkit::harness {

namespace {

void check_inputs(const ImputedSample& sample, std::span<const DesignSpec> methods,
                  const SimulationOptions& o) {
    if (o.reps < 1) throw Error(Errc::InvalidArgument, "reps must be at least 1");
    if (o.n < 2) throw Error(Errc::InvalidArgument, "n must be at least 2");
    if (methods.empty()) throw Error(Errc::InvalidArgument, "no methods to simulate");
    if (sample.size() == 0) throw Error(Errc::EmptyDataset, "empty sample");
    if (sample.y1.size() != sample.size()) throw Error(Errc::LengthMismatch, "y1 length differs from y0");
    if (!sample.g_hat.empty() && sample.g_hat.size() != sample.size()) {
        throw Error(Errc::LengthMismatch, "score count differs from sample size");
    }
}

std::uint64_t design_seed(std::uint64_t master, std::size_t rep, std::size_t method) {
    return rng::mix(rng::mix(rng::mix(master, static_cast<std::uint64_t>(rng::Domain::Design)), rep),
                    method);
}

// One bootstrap draw; every method sees the same resampled units.
void run_replication(const ImputedSample& sample, std::span<const DesignSpec> methods,
                     const SimulationOptions& o, std::size_t rep, ReplicationRecord* out,
                     std::string* errors) {
    const std::size_t n = o.n;
    auto gen = rng::stream(o.master_seed, rng::Domain::Bootstrap, rep);
    std::uniform_int_distribution<std::size_t> pick(0, sample.size() - 1);
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = pick(gen);

    std::vector<double> g;
    if (!sample.g_hat.empty()) {
        g.resize(n);
        for (std::size_t i = 0; i < n; ++i) g[i] = sample.g_hat[rows[i]];
    }
    std::vector<int> cats;
    if (!sample.categories.empty()) {
        cats.resize(n);
        for (std::size_t i = 0; i < n; ++i) cats[i] = sample.categories[rows[i]];
    }
    const CovariateMatrix x = sample.x.select_rows(rows);

    DesignInput input;
    input.g_hat = g;
    input.covariates = &x;
    input.categories = cats;
    input.n = n;

    std::vector<double> y(n);
    for (std::size_t m = 0; m < methods.size(); ++m) {
        ReplicationRecord& rec = out[m];
        rec.rep = rep;
        rec.method = m;
        try {
            const Design design = run_design(methods[m], input, o.p, design_seed(o.master_seed, rep, m), 1);
            for (const auto& a : design.assignment.assignments) {
                const std::size_t src = rows[a.unit];
                y[a.unit] = a.treatment == 1 ? sample.y1[src] : sample.y0[src];
            }
            const EstimateReport est = estimate_design(methods[m], design, y, &x);
            rec.tau_hat = est.tau_hat;
            rec.se_hat = est.se_hat;
            rec.ok = true;
        } catch (const std::exception& e) {
            rec.ok = false;
            errors[m] = e.what();
        }
    }
}

double percentile(std::vector<double>& sorted_values, double q) {
    const double pos = q * static_cast<double>(sorted_values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted_values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

MethodSummary summarize(const std::string& label, std::span<const ReplicationRecord> recs,
                        std::size_t method, std::size_t stride, double tau,
                        const SimulationOptions& o) {
    const std::size_t reps = recs.size() / stride;
    std::vector<double> sq(reps);
    MethodSummary s;
    s.method = label;
    s.reps = reps;
    double sum_tau = 0.0, sum_se = 0.0, sum_sq = 0.0;
    std::size_t covered = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        const ReplicationRecord& rec = recs[r * stride + method];
        const double err = rec.tau_hat - tau;
        sq[r] = err * err;
        sum_sq += sq[r];
        sum_tau += rec.tau_hat;
        sum_se += rec.se_hat;
        if (std::abs(err) <= 1.959963984540054 * rec.se_hat) ++covered;
    }
    const double rd = static_cast<double>(reps);
    s.mse = sum_sq / rd;
    s.mean_tau_hat = sum_tau / rd;
    s.mean_se = sum_se / rd;
    s.coverage = static_cast<double>(covered) / rd;
    if (reps > 1) {
        double ss = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            const double dev = recs[r * stride + method].tau_hat - s.mean_tau_hat;
            ss += dev * dev;
        }
        s.var_tau_hat = ss / (rd - 1.0);
    }

    if (reps == 1 || o.bootstrap_resamples == 0) {
        s.ci_low = s.ci_high = s.mse;
        return s;
    }
    auto gen = rng::stream(o.master_seed, rng::Domain::MseInterval, method);
    std::uniform_int_distribution<std::size_t> pick(0, reps - 1);
    std::vector<double> means(o.bootstrap_resamples);
    for (auto& m : means) {
        double total = 0.0;
        for (std::size_t r = 0; r < reps; ++r) total += sq[pick(gen)];
        m = total / rd;
    }
    std::sort(means.begin(), means.end());
    s.ci_low = percentile(means, 0.025);
    s.ci_high = percentile(means, 0.975);
    return s;
}

SimulationResult finish(const ImputedSample& sample, std::span<const DesignSpec> methods,
                        const SimulationOptions& o, std::vector<ReplicationRecord> records,
                        const std::vector<std::string>& errors) {
    const std::size_t mcount = methods.size();
    SimulationResult result;
    MethodComparison& cmp = result.comparison;
    cmp.tau = sample.tau();
    cmp.n = o.n;
    cmp.reps = o.reps;
    cmp.master_seed = o.master_seed;
    for (const auto& b : o.baselines) {
        if (std::any_of(methods.begin(), methods.end(), [&](const auto& m) { return m.label == b; })) {
            cmp.baselines.push_back(b);
        }
    }
    for (std::size_t m = 0; m < mcount; ++m) {
        std::string reason;
        for (std::size_t r = 0; r < o.reps && reason.empty(); ++r) {
            if (!records[r * mcount + m].ok) {
                reason = fmt::format("replication {}: {}", r, errors[r * mcount + m]);
            }
        }
        if (!reason.empty()) {
            cmp.failed.emplace_back(methods[m].label, reason);
            continue;
        }
        cmp.methods.push_back(summarize(methods[m].label, records, m, mcount, cmp.tau, o));
    }
    std::erase_if(cmp.baselines, [&](const std::string& b) { return cmp.find(b) == nullptr; });
    result.records = std::move(records);
    for (const auto& m : methods) result.method_labels.push_back(m.label);
    return result;
}

}  // namespace

const MethodSummary* MethodComparison::find(const std::string& method) const {
    for (const auto& m : methods) {
        if (m.method == method) return &m;
    }
    return nullptr;
}

double MethodComparison::improvement(const MethodSummary& m, const MethodSummary& baseline) const {
    return (baseline.mse - m.mse) / baseline.mse * 100.0;
}

SimulationResult run_simulation(const ImputedSample& sample, std::span<const DesignSpec> methods,
                                const SimulationOptions& options) {
    check_inputs(sample, methods, options);
    const std::size_t mcount = methods.size();
    std::vector<ReplicationRecord> records(options.reps * mcount);
    std::vector<std::string> errors(options.reps * mcount);
    const int threads = options.threads > 0 ? options.threads : omp_get_max_threads();
    const auto reps = static_cast<std::int64_t>(options.reps);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::int64_t r = 0; r < reps; ++r) {
        const auto rep = static_cast<std::size_t>(r);
        run_replication(sample, methods, options, rep, &records[rep * mcount], &errors[rep * mcount]);
    }
    return finish(sample, methods, options, std::move(records), errors);
}

SimulationResult run_simulation_serial(const ImputedSample& sample,
                                       std::span<const DesignSpec> methods,
                                       const SimulationOptions& options) {
    check_inputs(sample, methods, options);
    const std::size_t mcount = methods.size();
    std::vector<ReplicationRecord> records(options.reps * mcount);
    std::vector<std::string> errors(options.reps * mcount);
    for (std::size_t rep = 0; rep < options.reps; ++rep) {
        run_replication(sample, methods, options, rep, &records[rep * mcount], &errors[rep * mcount]);
    }
    return finish(sample, methods, options, std::move(records), errors);
}

}  // namespace stratkit::harness
