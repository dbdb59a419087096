#include "stratkit/randomization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "stratkit/csv.hpp"
#include "stratkit/error.hpp"
#include "stratkit/rng.hpp"

namespace stratkit {

namespace {

void check_probability(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error(Errc::InvalidProbability, fmt::format("p = {} is outside (0, 1)", p));
    }
}

// Marks `m` members of `members` as treated; uniform over m-subsets.
void treat_subset(std::span<const std::size_t> members, std::size_t m, rng::Philox4x32& gen,
                  std::vector<int>& treatment) {
    std::vector<std::size_t> pool(members.begin(), members.end());
    for (std::size_t t = 0; t < m; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, pool.size() - 1);
        std::swap(pool[t], pool[pick(gen)]);
        treatment[pool[t]] = 1;
    }
}

AssignmentSet collect(const StratumSet& strata, const std::vector<int>& treatment,
                      std::uint64_t seed) {
    const std::size_t n = treatment.size();
    std::vector<std::optional<int>> sid(n);
    for (const auto& s : strata.strata) {
        for (auto u : s.members) sid[u] = s.stratum_id;
    }
    AssignmentSet out;
    out.seed_fingerprint = rng::seed_fingerprint(seed);
    out.assignments.reserve(n);
    for (std::size_t u = 0; u < n; ++u) out.assignments.push_back({u, treatment[u], sid[u]});
    return out;
}

}  // namespace

std::vector<int> AssignmentSet::treatment_vector() const {
    std::vector<int> d(assignments.size());
    for (const auto& a : assignments) d.at(a.unit) = a.treatment;
    return d;
}

std::size_t AssignmentSet::treated() const {
    return static_cast<std::size_t>(std::count_if(assignments.begin(), assignments.end(),
                                                  [](const auto& a) { return a.treatment == 1; }));
}

AssignmentSet assign_within_strata(const StratumSet& strata, double p, std::uint64_t seed) {
    check_probability(p);
    const std::size_t n = strata.unit_count();
    validate_partition(strata, n);
    std::vector<int> treatment(n, 0);
    for (const auto& s : strata.strata) {
        const double target = static_cast<double>(s.size()) * p;
        const double rounded = std::round(target);
        if (std::abs(target - rounded) > 1e-9 || rounded < 1.0) {
            throw Error(Errc::NonIntegralAllocation,
                        fmt::format("stratum {}: size {} x p {} = {} is not a positive integer",
                                    s.stratum_id, s.size(), p, target),
                        std::to_string(s.stratum_id));
        }
        auto gen = rng::stream(seed, rng::Domain::Stratum, static_cast<std::uint64_t>(s.stratum_id));
        treat_subset(s.members, static_cast<std::size_t>(rounded), gen, treatment);
    }
    if (strata.leftover) {
        auto gen = rng::stream(seed, rng::Domain::Leftover);
        treatment[*strata.leftover] = rng::uniform01(gen) < p ? 1 : 0;
    }
    return collect(strata, treatment, seed);
}

AssignmentSet simple_randomization(std::size_t n, double p, std::uint64_t seed) {
    check_probability(p);
    const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * p));
    if (std::floor(static_cast<double>(n) * p) < 1.0 || m >= n) {
        throw Error(Errc::InvalidProbability,
                    fmt::format("p = {} leaves an empty arm with n = {}", p, n));
    }
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> treatment(n, 0);
    auto gen = rng::stream(seed, rng::Domain::Simple);
    treat_subset(all, m, gen, treatment);
    return collect(StratumSet{}, treatment, seed);
}

AssignmentSet assign_within_blocks_complete(const StratumSet& strata, double p,
                                            std::uint64_t seed) {
    check_probability(p);
    const std::size_t n = strata.unit_count();
    validate_partition(strata, n);
    std::vector<int> treatment(n, 0);
    for (const auto& s : strata.strata) {
        const double target = static_cast<double>(s.size()) * p;
        auto gen = rng::stream(seed, rng::Domain::Categorical,
                               static_cast<std::uint64_t>(s.stratum_id));
        auto m = static_cast<std::size_t>(std::floor(target + 1e-12));
        const double frac = target - static_cast<double>(m);
        if (frac > 1e-12 && rng::uniform01(gen) < frac) ++m;
        treat_subset(s.members, std::min(m, s.size()), gen, treatment);
    }
    if (strata.leftover) {
        auto gen = rng::stream(seed, rng::Domain::Leftover);
        treatment[*strata.leftover] = rng::uniform01(gen) < p ? 1 : 0;
    }
    return collect(strata, treatment, seed);
}

std::string assignments_to_csv(const AssignmentSet& set, std::span<const std::string> unit_ids,
                               const std::string& method_tag, const std::string& header_comment) {
    std::string out;
    if (!header_comment.empty()) out += "# " + header_comment + "\n";
    out += csv::format_row({"unit_id", "stratum_id", "treatment", "method_tag", "seed_fingerprint"});
    for (const auto& a : set.assignments) {
        out += csv::format_row({unit_ids[a.unit], a.stratum_id ? std::to_string(*a.stratum_id) : "",
                                std::to_string(a.treatment), method_tag, set.seed_fingerprint});
    }
    return out;
}

}  // namespace stratkit
