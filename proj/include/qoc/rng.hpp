#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qoc {

// Deterministic random source. All randomness in the library flows through
// this wrapper so that a (seed, stream) pair fully determines every draw;
// std::distributions are avoided because their output is not pinned by the
// standard across library versions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t bits() { return gen_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (no cached spare, keeps replay trivial)
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], log stays finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // uniform integer in [0, n), rejection sampled so every value is equally likely
    std::uint64_t integer(std::uint64_t n) {
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    // Derive an independent child seed, used to give parallel work items
    // (e.g. RB sequences) their own streams in a schedule-independent way.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace qoc
