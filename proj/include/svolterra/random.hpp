#pragma once

#include <array>
#include <cstdint>

#include <boost/math/special_functions/erf.hpp>

namespace svolterra {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Stateless: every output block is a pure function of (key, counter), so any
/// stream position can be produced on any thread without coordination.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    Counter operator()(Counter ctr) const {
        Key key = key_;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            ctr = single_round(ctr, key);
        }
        return ctr;
    }

    /// Block for a 64-bit stream id and 64-bit position within it.
    Counter block(std::uint64_t stream, std::uint64_t position) const {
        return (*this)(Counter{static_cast<std::uint32_t>(position),
                               static_cast<std::uint32_t>(position >> 32),
                               static_cast<std::uint32_t>(stream),
                               static_cast<std::uint32_t>(stream >> 32)});
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57;
    static constexpr std::uint32_t kW0 = 0x9E3779B9;
    static constexpr std::uint32_t kW1 = 0xBB67AE85;

    static Counter single_round(const Counter& c, const Key& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    Key key_;
};

/// Maps 64 random bits to the open interval (0, 1).
inline double to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Standard normal quantile.
inline double normal_quantile(double u) {
    return -1.4142135623730951 * boost::math::erfc_inv(2.0 * u);
}

/// Two uniforms per Philox block, indexed by a flat position in a stream.
inline std::array<double, 2> uniform_pair(const Philox4x32& gen, std::uint64_t stream,
                                          std::uint64_t block_index) {
    const auto b = gen.block(stream, block_index);
    const std::uint64_t w0 = (static_cast<std::uint64_t>(b[1]) << 32) | b[0];
    const std::uint64_t w1 = (static_cast<std::uint64_t>(b[3]) << 32) | b[2];
    return {to_open_unit(w0), to_open_unit(w1)};
}

/// Uniform number at flat position `index` of stream `stream`.
inline double uniform_at(const Philox4x32& gen, std::uint64_t stream, std::uint64_t index) {
    return uniform_pair(gen, stream, index / 2)[index % 2];
}

/// Standard normal at flat position `index` of stream `stream` (inverse CDF).
inline double normal_at(const Philox4x32& gen, std::uint64_t stream, std::uint64_t index) {
    return normal_quantile(uniform_at(gen, stream, index));
}

/// Seed for a sub-purpose (initial conditions, probes) derived from a user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t domain) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (domain + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace svolterra
