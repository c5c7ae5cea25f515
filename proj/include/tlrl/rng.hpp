#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tlrl {

/// SplitMix64 finalizer. Used to derive independent stream seeds from a
/// master seed and a counter.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for substream `index` of purpose `stream` under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
    return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

namespace streams {
inline constexpr std::uint64_t kDemand = 0x64656d616e64ULL;
inline constexpr std::uint64_t kEpisode = 0x657069736fULL;
inline constexpr std::uint64_t kInit = 0x696e6974ULL;
inline constexpr std::uint64_t kAgent = 0x6167656e74ULL;
}  // namespace streams

/// Deterministic random stream. The draw algorithms are spelled out here
/// instead of using <random> distributions, whose output is
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return r % n;
    }

    /// Exponential with the given rate, by inverse CDF.
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

private:
    std::mt19937_64 engine_;
};

}  // namespace tlrl
