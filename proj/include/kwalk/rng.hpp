#pragma once

#include <cstdint>

namespace kwalk {

/// SplitMix64 output function.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives the key of substream `index` from a master seed. Used for
/// per-trial generators so results never depend on execution order.
constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64(seed ^ splitmix64(index ^ 0xD1B54A32D192ED03ULL));
}

/// Counter-based 64-bit generator: the i-th output is a fixed function of
/// (key, i). Not cryptographic.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    constexpr result_type operator()() noexcept {
        return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_);
    }

    constexpr std::uint64_t key() const noexcept { return key_; }
    constexpr std::uint64_t counter() const noexcept { return counter_; }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) noexcept {
        unsigned __int128 product = static_cast<unsigned __int128>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(product);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                product = static_cast<unsigned __int128>((*this)()) * bound;
                low = static_cast<std::uint64_t>(product);
            }
        }
        return static_cast<std::uint64_t>(product >> 64);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Uniform sign in {-1, +1}.
    int sign() noexcept { return ((*this)() >> 63) ? -1 : 1; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace kwalk
