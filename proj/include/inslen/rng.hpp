#pragma once

// Portable counter-based random stream: SplitMix64 applied to
// key + counter * 0x9E3779B97F4A7C15. Every draw is a pure function of
// (key, counter), so fixtures are reproducible across platforms and
// languages. Normals use Box-Muller on two uniforms.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace inslen {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class CounterRng {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    /// Independent stream for a sub-task (e.g. one sample).
    constexpr CounterRng derive(std::uint64_t index) const noexcept {
        return CounterRng(splitmix64(key_ ^ splitmix64(index + kGamma)));
    }

    constexpr std::uint64_t next() noexcept { return splitmix64(key_ + (++counter_) * kGamma); }

    /// Uniform in [0, 1) with 53 bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1].
    double uniform_open_low() noexcept { return 1.0 - uniform(); }

    double normal() noexcept {
        const double u1 = uniform_open_low();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n), n >= 1 (multiply-shift, negligible bias).
    std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace inslen
