#include "stratkit/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "stratkit/error.hpp"

namespace stratkit {

namespace {

void check_costs(const kernels::CostMatrix& cost) {
    const std::size_t n = cost.size();
    if (n % 2 != 0) throw Error(Errc::OddCount, fmt::format("cannot pair {} units", n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = cost(i, j);
            if (i != j && (!std::isfinite(c) || c < 0.0)) {
                throw Error(Errc::NonFiniteCost, fmt::format("cost({}, {}) = {}", i, j, c));
            }
        }
    }
}

StratumSet to_stratum_set(std::vector<UnitPair> pairs, const kernels::CostMatrix& cost,
                          const char* tag) {
    for (auto& p : pairs) {
        if (p.first > p.second) std::swap(p.first, p.second);
    }
    std::sort(pairs.begin(), pairs.end());
    StratumSet set;
    set.method_tag = tag;
    double total = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        set.strata.push_back({static_cast<int>(k), {pairs[k].first, pairs[k].second}});
        total += cost(pairs[k].first, pairs[k].second);
    }
    set.total_cost = total;
    return set;
}

}  // namespace

namespace {

// First-improvement pair swaps. Each accepted swap strictly lowers the exact
// cost of the two pairs involved, so the loop terminates.
void pair_swap_descent(const kernels::CostMatrix& cost, std::vector<UnitPair>& pairs) {
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            for (std::size_t q = p + 1; q < pairs.size(); ++q) {
                const auto [a, b] = pairs[p];
                const auto [c, d] = pairs[q];
                const double current = cost(a, b) + cost(c, d);
                const double cross = cost(a, c) + cost(b, d);
                const double twist = cost(a, d) + cost(b, c);
                if (cross < current && cross <= twist) {
                    pairs[p] = {a, c};
                    pairs[q] = {b, d};
                    improved = true;
                } else if (twist < current) {
                    pairs[p] = {a, d};
                    pairs[q] = {b, c};
                    improved = true;
                }
            }
        }
    }
}

// Scan units cyclically from `start`; each unmatched unit takes its nearest
// unmatched partner.
std::vector<UnitPair> sequential_greedy(const kernels::CostMatrix& cost, std::size_t start) {
    const std::size_t n = cost.size();
    std::vector<UnitPair> pairs;
    pairs.reserve(n / 2);
    std::vector<char> used(n, 0);
    for (std::size_t step = 0; step < n; ++step) {
        const std::size_t i = (start + step) % n;
        if (used[i]) continue;
        std::size_t best = n;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && !used[j] && cost(i, j) < best_cost) {
                best_cost = cost(i, j);
                best = j;
            }
        }
        used[i] = used[best] = 1;
        pairs.emplace_back(i, best);
    }
    return pairs;
}

// Repeatedly take the cheapest edge between two unmatched units.
std::vector<UnitPair> edge_greedy(const kernels::CostMatrix& cost) {
    const std::size_t n = cost.size();
    std::vector<UnitPair> edges;
    edges.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
    }
    std::stable_sort(edges.begin(), edges.end(), [&](const UnitPair& x, const UnitPair& y) {
        return cost(x.first, x.second) < cost(y.first, y.second);
    });
    std::vector<UnitPair> pairs;
    pairs.reserve(n / 2);
    std::vector<char> used(n, 0);
    for (const auto& [i, j] : edges) {
        if (used[i] || used[j]) continue;
        used[i] = used[j] = 1;
        pairs.emplace_back(i, j);
        if (pairs.size() == n / 2) break;
    }
    return pairs;
}

}  // namespace

StratumSet min_cost_pair_matching(const kernels::CostMatrix& cost) {
    check_costs(cost);
    constexpr std::size_t kSequentialStarts = 8;
    std::vector<UnitPair> best;
    double best_total = std::numeric_limits<double>::infinity();
    const std::size_t n = cost.size();
    const std::size_t starts = std::min<std::size_t>(n, kSequentialStarts);
    for (std::size_t s = 0; s <= starts; ++s) {
        auto pairs = s == 0 ? edge_greedy(cost) : sequential_greedy(cost, (s - 1) * n / starts);
        pair_swap_descent(cost, pairs);
        const double total = matching_cost(cost, pairs);
        if (total < best_total) {
            best_total = total;
            best = std::move(pairs);
        }
    }
    return to_stratum_set(std::move(best), cost, "min-cost-pair");
}

namespace {

void brute_force(const kernels::CostMatrix& cost, std::vector<char>& used,
                 std::vector<UnitPair>& current, double running, double& best,
                 std::vector<UnitPair>& best_pairs) {
    const std::size_t n = cost.size();
    std::size_t i = 0;
    while (i < n && used[i]) ++i;
    if (i == n) {
        if (running < best) {
            best = running;
            best_pairs = current;
        }
        return;
    }
    used[i] = 1;
    for (std::size_t j = i + 1; j < n; ++j) {
        if (used[j]) continue;
        used[j] = 1;
        current.emplace_back(i, j);
        brute_force(cost, used, current, running + cost(i, j), best, best_pairs);
        current.pop_back();
        used[j] = 0;
    }
    used[i] = 0;
}

}  // namespace

StratumSet brute_force_pair_matching(const kernels::CostMatrix& cost) {
    check_costs(cost);
    if (cost.size() > 12) {
        throw Error(Errc::InvalidArgument,
                    fmt::format("brute force matching limited to 12 units, got {}", cost.size()));
    }
    std::vector<char> used(cost.size(), 0);
    std::vector<UnitPair> current, best_pairs;
    double best = std::numeric_limits<double>::infinity();
    brute_force(cost, used, current, 0.0, best, best_pairs);
    return to_stratum_set(std::move(best_pairs), cost, "brute-force-pair");
}

std::vector<UnitPair> pairs_of(const StratumSet& set) {
    std::vector<UnitPair> out;
    for (const auto& s : set.strata) {
        if (s.size() != 2) throw Error(Errc::NotPairedDesign, "stratum is not a pair");
        out.emplace_back(std::min(s.members[0], s.members[1]), std::max(s.members[0], s.members[1]));
    }
    std::sort(out.begin(), out.end());
    return out;
}

double matching_cost(const kernels::CostMatrix& cost, const std::vector<UnitPair>& pairs) {
    double total = 0.0;
    for (const auto& [i, j] : pairs) total += cost(i, j);
    return total;
}

}  // namespace stratkit
