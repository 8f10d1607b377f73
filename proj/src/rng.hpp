#pragma once

#include <cstdint>

namespace mcq {

/// One splitmix64 step. Advances `state` and returns the next output word.
std::uint64_t splitmix64_next(std::uint64_t& state);

/// Mix an id into a seed word (splitmix64 of seed xor golden-ratio-spaced id).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t id);

/// xoshiro256++ generator seeded through splitmix64.
///
/// All randomness in the project flows through this class so that runs are
/// bit-for-bit reproducible across platforms. Independent streams are derived
/// from (seed, stream ids) rather than by jumping, which lets any consumer
/// (a dataset episode, a training step, a harness trial) rebuild its own
/// generator from scratch.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    /// Derive an independent stream from a root seed and up to three ids.
    static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0);

    std::uint64_t next_u64();

    /// Uniform in [0,1) with 53 random bits.
    double uniform();

    /// Uniform in [lo,hi).
    double uniform(double lo, double hi);

    /// Uniform integer in [0,n). n must be >= 1.
    std::uint64_t uniform_int(std::uint64_t n);

    /// Standard normal via Box-Muller; one spare value is cached.
    double normal();

  private:
    std::uint64_t s_[4];
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace mcq
