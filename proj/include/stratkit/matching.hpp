#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "stratkit/kernels.hpp"
#include "stratkit/stratification.hpp"

namespace stratkit {

using UnitPair = std::pair<std::size_t, std::size_t>;

/// Perfect matching by greedy nearest-available construction followed by
/// pair-swap (2-opt) local search until no swap of two pairs lowers the cost.
/// Several greedy starts (cheapest-edge first, and up to eight scans from
/// rotated start units) are each descended; the cheapest result is kept.
/// Pairs are returned as (min, max), sorted by first member.
StratumSet min_cost_pair_matching(const kernels::CostMatrix& cost);

/// Exhaustive minimum over all perfect matchings; n <= 12.
StratumSet brute_force_pair_matching(const kernels::CostMatrix& cost);

std::vector<UnitPair> pairs_of(const StratumSet& set);
double matching_cost(const kernels::CostMatrix& cost, const std::vector<UnitPair>& pairs);

}  // namespace stratkit
