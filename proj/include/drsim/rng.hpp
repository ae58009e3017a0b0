#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace drsim {

/// Counter-based random stream keyed by (seed, stream id).
///
/// Each appliance, link and channel owns its own stream so the sequence of
/// draws it sees does not depend on the order in which the simulation visits
/// it. The state is two words, which keeps per-appliance streams cheap for
/// tens of thousands of appliances. Satisfies UniformRandomBitGenerator.
class Stream {
public:
    using result_type = std::uint64_t;

    Stream() = default;
    Stream(std::uint64_t seed, std::uint64_t stream_id)
        : key_(mix(seed ^ mix(stream_id + 0x632BE59BD9B4E019ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL); }

    std::uint64_t draws() const { return counter_; }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Exponential variate with the given rate (events per unit time).
    /// rate == 0 yields +inf (the event never happens).
    double exponential(double rate) {
        if (rate <= 0.0) return std::numeric_limits<double>::infinity();
        return -std::log1p(-uniform()) / rate;
    }

    /// Unit-mean exponential power gain, i.e. a Rayleigh-faded |h|^2.
    double rayleigh_power() { return -std::log1p(-uniform()); }

    /// Standard normal via Box-Muller (one value per call, the pair's
    /// second half is discarded so draws stay aligned to the counter).
    double normal() {
        constexpr double two_pi = 6.283185307179586476925286766559;
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

// Stream-id namespaces so independent consumers never collide.
namespace stream_ns {
inline constexpr std::uint64_t placement = 1ULL << 60;
inline constexpr std::uint64_t appliance = 2ULL << 60;
inline constexpr std::uint64_t shadowing = 3ULL << 60;
inline constexpr std::uint64_t fading = 4ULL << 60;
inline constexpr std::uint64_t sweep = 5ULL << 60;
}  // namespace stream_ns

}  // namespace drsim
