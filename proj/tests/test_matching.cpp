#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <doctest.h>

#include "stratkit/matching.hpp"
#include "test_util.hpp"

using namespace stratkit;

namespace {

kernels::CostMatrix squared_gaps(const std::vector<double>& g) {
    kernels::CostMatrix c(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) c(i, j) = (g[i] - g[j]) * (g[i] - g[j]);
    }
    return c;
}

std::set<UnitPair> pair_set(const StratumSet& s) {
    auto p = pairs_of(s);
    return {p.begin(), p.end()};
}

void check_perfect(const StratumSet& s, std::size_t n) {
    CHECK(s.strata.size() == n / 2);
    for (const auto& st : s.strata) CHECK(st.size() == 2);
    CHECK_NOTHROW(validate_partition(s, n));
}

}  // namespace

TEST_CASE("four points on a line") {
    const auto cost = squared_gaps({0, 1, 10, 11});
    const auto m = min_cost_pair_matching(cost);
    check_perfect(m, 4);
    CHECK(pair_set(m) == std::set<UnitPair>{{0, 1}, {2, 3}});
    REQUIRE(m.total_cost.has_value());
    CHECK(*m.total_cost == 2.0);
    CHECK(*m.total_cost == *brute_force_pair_matching(cost).total_cost);
}

TEST_CASE("equal costs give some perfect matching") {
    kernels::CostMatrix c(8);
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = 0; j < 8; ++j) c(i, j) = i == j ? 0.0 : 2.5;
    }
    const auto m = min_cost_pair_matching(c);
    check_perfect(m, 8);
    CHECK(*m.total_cost == 4 * 2.5);
}

TEST_CASE("matching input errors") {
    CHECK_ERRC(min_cost_pair_matching(kernels::CostMatrix(3)), Errc::OddCount);
    kernels::CostMatrix c(4);
    c(1, 2) = c(2, 1) = std::numeric_limits<double>::infinity();
    CHECK_ERRC(min_cost_pair_matching(c), Errc::NonFiniteCost);
    c(1, 2) = c(2, 1) = std::nan("");
    CHECK_ERRC(min_cost_pair_matching(c), Errc::NonFiniteCost);
    CHECK_ERRC(brute_force_pair_matching(kernels::CostMatrix(14)), Errc::InvalidArgument);
}

TEST_CASE("sorted-adjacent pairing is optimal for 1-D squared gaps") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> normal;
    for (std::size_t n = 2; n <= 12; n += 2) {
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> g(n);
            for (auto& v : g) v = normal(gen);
            const auto cost = squared_gaps(g);
            const auto sorted = sorted_block_strata(g, 2);
            const double sorted_cost = matching_cost(cost, pairs_of(sorted));
            const double optimum = *brute_force_pair_matching(cost).total_cost;
            CHECK(sorted_cost == doctest::Approx(optimum).epsilon(1e-12));
            CHECK(*min_cost_pair_matching(cost).total_cost ==
                  doctest::Approx(optimum).epsilon(1e-12));
        }
    }
}

TEST_CASE("heuristic stays within 5% of the optimum on random costs") {
    std::mt19937_64 gen(2025);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int within = 0;
    const int instances = 500;
    for (int t = 0; t < instances; ++t) {
        const std::size_t n = 4 + 2 * static_cast<std::size_t>(t % 4);
        kernels::CostMatrix c(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) c(i, j) = c(j, i) = u(gen);
        }
        const auto h = min_cost_pair_matching(c);
        const auto b = brute_force_pair_matching(c);
        check_perfect(h, n);
        CHECK(*h.total_cost >= *b.total_cost - 1e-12);
        CHECK(*h.total_cost == doctest::Approx(matching_cost(c, pairs_of(h))));
        if (*h.total_cost <= 1.05 * *b.total_cost) ++within;
    }
    MESSAGE("within 5%: " << within << " / " << instances);
    CHECK(within >= 475);
}

TEST_CASE("no improving pair swap remains") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 40;
        kernels::CostMatrix c(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) c(i, j) = c(j, i) = u(gen);
        }
        const auto p = pairs_of(min_cost_pair_matching(c));
        for (std::size_t a = 0; a < p.size(); ++a) {
            for (std::size_t b = a + 1; b < p.size(); ++b) {
                const auto [i, j] = p[a];
                const auto [k, l] = p[b];
                const double now = c(i, j) + c(k, l);
                CHECK(now <= c(i, k) + c(j, l) + 1e-12);
                CHECK(now <= c(i, l) + c(j, k) + 1e-12);
            }
        }
    }
}
