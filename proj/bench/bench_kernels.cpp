#include <random>

#include <benchmark/benchmark.h>

#include "stratkit/harness.hpp"
#include "stratkit/kernels.hpp"
#include "stratkit/stratification.hpp"

using namespace stratkit;

namespace {

struct Fixture {
    std::vector<double> g;
    Eigen::MatrixXd x;
    Eigen::MatrixXd z;
    Eigen::MatrixXd sigma_inv;

    explicit Fixture(std::size_t n) : g(n), x(static_cast<Eigen::Index>(n), 4) {
        std::mt19937_64 gen(1);
        std::normal_distribution<double> normal;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) = normal(gen);
            g[static_cast<std::size_t>(i)] = x(i, 0) + normal(gen);
        }
        sigma_inv = Eigen::MatrixXd::Identity(4, 4) * 0.8;
        z = kernels::whiten(x, sigma_inv);
    }
    kernels::HybridCostInputs inputs() const { return {g, sample_variance(g), &z, 0.2}; }
};

void BM_HybridSerial(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(kernels::build_hybrid_cost_matrix_serial(f.inputs()));
}

void BM_HybridParallel(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(kernels::build_hybrid_cost_matrix(f.inputs()));
}

void BM_MahalanobisSerial(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::build_mahalanobis_cost_matrix_serial(f.x, f.sigma_inv));
    }
}

void BM_MahalanobisParallel(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::build_mahalanobis_cost_matrix(f.x, f.sigma_inv));
    }
}

const harness::ImputedSample& population() {
    static const auto s = harness::make_linear_dgp(2, 0.5, {1, 1}, {}, 1.0, 7).sample(20000);
    return s;
}

std::vector<DesignSpec> methods() {
    return {DesignSpec::parse("simple"), DesignSpec::parse("sorted-pair"),
            DesignSpec::parse("hybrid-pair")};
}

harness::SimulationOptions sim_options() {
    harness::SimulationOptions o;
    o.reps = 64;
    o.n = 200;
    o.master_seed = 3;
    o.bootstrap_resamples = 0;
    return o;
}

void BM_SimulationSerial(benchmark::State& state) {
    const auto m = methods();
    for (auto _ : state) benchmark::DoNotOptimize(harness::run_simulation_serial(population(), m, sim_options()));
}

void BM_SimulationParallel(benchmark::State& state) {
    const auto m = methods();
    for (auto _ : state) benchmark::DoNotOptimize(harness::run_simulation(population(), m, sim_options()));
}

}  // namespace

BENCHMARK(BM_HybridSerial)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HybridParallel)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MahalanobisSerial)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MahalanobisParallel)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulationSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulationParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
