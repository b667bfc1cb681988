#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace pdfnet {

// Deterministic random source. The engine (mt19937_64) has a
// standard-mandated output sequence; the derived distributions below are
// implemented by hand so that streams are identical across standard
// libraries and compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t bits() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive integer range, rejection-sampled to remove modulo bias.
    int uniform_int(int lo, int hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return lo + static_cast<int>(v % span);
    }

    // Standard normal via Box-Muller (cosine branch; no cached spare).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    // splitmix64 step; used to derive independent stream seeds.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace pdfnet
