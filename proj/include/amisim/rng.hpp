#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace amisim {

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
class Fnv1a64 {
public:
    static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
    static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

    constexpr void update(std::string_view bytes) noexcept
    {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= kPrime;
        }
    }

    constexpr std::uint64_t value() const noexcept { return state_; }

private:
    std::uint64_t state_ = kOffset;
};

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept
{
    Fnv1a64 h;
    h.update(bytes);
    return h.value();
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic random stream. Streams are forked from a root seed by a
/// stable label, so adding a new consumer never shifts another consumer's draws.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    static RandomStream fork(std::uint64_t root_seed, std::string_view label)
    {
        return RandomStream(splitmix64(root_seed) ^ fnv1a64(label));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of mantissa.
    double unit()
    {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform on [lo, hi]; returns lo when the interval is degenerate.
    double uniform(double lo, double hi)
    {
        if (!(hi > lo)) {
            return lo;
        }
        return lo + (hi - lo) * unit();
    }

    /// Uniform integer on [0, max_inclusive].
    std::uint64_t uniform_int(std::uint64_t max_inclusive)
    {
        if (max_inclusive == 0) {
            return 0;
        }
        std::uniform_int_distribution<std::uint64_t> dist(0, max_inclusive);
        return dist(engine_);
    }

    double gaussian(double mean, double sigma)
    {
        std::normal_distribution<double> dist(mean, sigma);
        return dist(engine_);
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace amisim
