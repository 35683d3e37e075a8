#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sda
{
    /// Seeded generator with hand-written draws: std:: distributions are
    /// implementation-defined, and runs must replay identically anywhere.
    class Rng
    {
    public:
        Rng() = default;
        explicit Rng(std::uint64_t seed) : eng_(seed) {}

        std::uint64_t next() { return eng_(); }

        /// Uniform in [0, 1).
        double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

        /// Uniform in [0, n). n must be positive.
        std::uint64_t index(std::uint64_t n) { return eng_() % n; }

        bool chance(double p) { return uniform() < p; }

        /// Exponential with the given mean.
        double exponential(double mean) { return -mean * std::log1p(-uniform()); }

        double normal(double mean, double stddev)
        {
            const double u1 = 1.0 - uniform();
            const double u2 = uniform();
            return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
        }

    private:
        std::mt19937_64 eng_{1};
    };

    /// Independent seed for one random role, derived from the scenario seed.
    inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t role)
    {
        // splitmix64 finalizer
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (role + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
}
