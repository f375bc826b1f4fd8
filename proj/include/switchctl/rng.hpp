#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace switchctl {

/** @brief splitmix64 step, used to fork independent deterministic streams. */
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/**
 * @brief Deterministic random source: std::mt19937_64 engine with hand-rolled
 * distributions.
 *
 * The standard distribution objects are implementation-defined, so sampling
 * through them would break the byte-identical artifact contract across
 * standard libraries.  The raw engine sequence, by contrast, is fully
 * specified, and the conversions below are exact arithmetic on those bits.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /** @brief Independent substream of the same master seed (splitmix64 fork). */
    static Rng fork(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
        // two scrambling rounds so neighbouring stream ids decorrelate
        splitmix64(s);
        return Rng(splitmix64(s));
    }

    std::uint64_t bits() { return engine_(); }

    /** @brief Uniform double in [0, 1) with 53 random bits. */
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /** @brief Uniform integer in {0, ..., n−1} (rejection-free modulo of 64 bits; bias < 2^-50 for n < 2^14). */
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::uniform_index: n must be positive");
        return engine_() % n;
    }

    /** @brief Standard normal via Box–Muller (deterministic, no cached spare). */
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace switchctl
