#include "stratkit/rng.hpp"

#include <fmt/format.h>

namespace stratkit::rng {

std::string seed_fingerprint(std::uint64_t seed) {
    return fmt::format("{:016x}", splitmix64(seed ^ 0x5eedf1a9e7ULL));
}

}  // namespace stratkit::rng
