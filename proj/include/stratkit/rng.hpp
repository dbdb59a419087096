#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>

// Counter-based random streams. Every consumer derives its own Philox4x32-10
// stream from (master seed, domain, index), so results do not depend on the
// order in which strata or replications are processed, nor on thread count.
namespace stratkit::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

/// Stream domains; one per independent consumer of randomness.
enum class Domain : std::uint64_t {
    Stratum = 1,
    Leftover = 2,
    Simple = 3,
    Bootstrap = 4,
    Design = 5,
    MseInterval = 6,
    MockNoise = 7,
    Population = 8,
    Score = 9,
    Categorical = 10,
};

class Philox4x32 {
public:
    using result_type = std::uint64_t;
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    explicit Philox4x32(std::uint64_t key, std::uint64_t substream = 0) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
          substream_(substream) {}

    result_type operator()() noexcept {
        if (lane_ == 2) {
            refill();
            lane_ = 0;
        }
        const std::size_t i = 2 * lane_++;
        return (static_cast<std::uint64_t>(buffer_[i + 1]) << 32) | buffer_[i];
    }

    void discard(unsigned long long n) noexcept {
        while (n--) (*this)();
    }

    /// Ten-round Philox4x32 bijection.
    static constexpr Block block(Block ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9U;
                key[1] += 0xBB67AE85U;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53U} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57U} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                   static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    void refill() noexcept {
        const Block ctr{static_cast<std::uint32_t>(counter_),
                        static_cast<std::uint32_t>(counter_ >> 32),
                        static_cast<std::uint32_t>(substream_),
                        static_cast<std::uint32_t>(substream_ >> 32)};
        buffer_ = block(ctr, key_);
        ++counter_;
    }

    Key key_;
    std::uint64_t substream_;
    std::uint64_t counter_ = 0;
    Block buffer_{};
    std::size_t lane_ = 2;
};

inline Philox4x32 stream(std::uint64_t master_seed, Domain domain, std::uint64_t index = 0,
                         std::uint64_t substream = 0) noexcept {
    return Philox4x32(mix(mix(master_seed, static_cast<std::uint64_t>(domain)), index),
                      substream);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Philox4x32& gen) noexcept {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

std::string seed_fingerprint(std::uint64_t seed);

}  // namespace stratkit::rng
