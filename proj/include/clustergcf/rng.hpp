#pragma once

#include <cstdint>
#include <string_view>

#include "clustergcf/types.hpp"

namespace cgcf {

// splitmix64 step; also the seed expander for Rng.
std::uint64_t splitmix64(std::uint64_t& state);

// Labeled seed derivation: every subsystem draws from its own stream so
// changing one does not shift another's. Extra words key per-step or
// per-worker substreams, e.g. derive_seed(root, "gumbel", epoch, batch).
std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::uint64_t a = 0, std::uint64_t b = 0);

// xoshiro256** with explicit bit-to-double mapping; deterministic across
// platforms, unlike std distributions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // uniform in [0, 1)
    Real uniform();

    // uniform in (0, 1): endpoints clamped to [1e-12, 1 - 1e-12]
    Real uniform_open();

    // uniform integer in [0, n), n >= 1
    std::uint64_t uniform_below(std::uint64_t n);

    // uniform in [-bound, bound]
    Real uniform_symmetric(Real bound);

    // Gumbel(0,1) draw: -log(-log(U)) with U in the clamped open interval.
    Real gumbel();

  private:
    std::uint64_t s_[4];
};

}  // namespace cgcf
