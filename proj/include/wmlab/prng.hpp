#pragma once
// Deterministic pseudo-randomness for the whole lab. Every stochastic
// operation (sampling, green-list permutation, Monte Carlo trials) draws
// from splitmix64 streams keyed by a 64-bit seed, so results reproduce
// bit-exactly across platforms and thread counts.

#include <cstdint>

namespace wmlab {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// One splitmix64 step: advance state by the golden-ratio increment and
// return the finalized output.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += kGolden);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Independent stream key for (key, ctx): the first splitmix64 output after
// seeding with key XOR (ctx + 1) * golden. Used for per-context green
// lists, per-record generation seeds and per-trial Monte Carlo seeds.
// The recipe is part of the reproducibility contract; see README.
inline std::uint64_t mix(std::uint64_t key, std::uint64_t ctx) {
    std::uint64_t s = key ^ ((ctx + 1) * kGolden);
    return splitmix64_next(s);
}

class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() { return splitmix64_next(state_); }

    // Uniform in [0, bound). Modulo reduction: the bias for bounds far below
    // 2^64 is immaterial here and the recipe stays trivial to port.
    std::uint64_t next_below(std::uint64_t bound) { return next() % bound; }

    // Uniform double in (0, 1]: top 53 bits, shifted off zero so log() and
    // pow() of a draw stay finite downstream.
    double next_double() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

  private:
    std::uint64_t state_;
};

} // namespace wmlab
