#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratkit/stratification.hpp"

namespace stratkit {

struct Assignment {
    std::size_t unit = 0;
    int treatment = 0;
    std::optional<int> stratum_id;  // none for simple randomization and the leftover

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Assignments ordered by unit index.
struct AssignmentSet {
    std::vector<Assignment> assignments;
    std::string seed_fingerprint;

    std::vector<int> treatment_vector() const;
    std::size_t treated() const;
};

/// Exactly s * p treated per stratum, drawn uniformly from a stream keyed by
/// (seed, stratum_id). A leftover singleton gets a Bernoulli(p) coin from
/// its own stream.
AssignmentSet assign_within_strata(const StratumSet& strata, double p, std::uint64_t seed);

/// Complete randomization of n units: exactly round(n * p) treated.
AssignmentSet simple_randomization(std::size_t n, double p, std::uint64_t seed);

/// Complete randomization inside each stratum when s * p need not be an
/// integer: floor(s * p) treated plus one more with probability frac(s * p),
/// so every unit is treated with probability p.
AssignmentSet assign_within_blocks_complete(const StratumSet& strata, double p,
                                            std::uint64_t seed);

/// unit_id,stratum_id,treatment,method_tag,seed_fingerprint
std::string assignments_to_csv(const AssignmentSet& set, std::span<const std::string> unit_ids,
                               const std::string& method_tag, const std::string& header_comment);

}  // namespace stratkit
