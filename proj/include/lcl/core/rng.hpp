#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "lcl/core/matrix.hpp"

namespace lcl {

// xoshiro256++ with splitmix64 seeding. State is exactly four 64-bit words so
// checkpoints can capture and restore the stream; the same seed yields the
// same draw sequence on every platform.
struct Rng {
    std::array<std::uint64_t, 4> state{};

    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform();                          // [0, 1)
    double uniform(double lo, double hi);      // [lo, hi)
    std::size_t uniform_index(std::size_t n);  // [0, n), unbiased
    int uniform_int(int lo, int hi);           // [lo, hi] inclusive
    double normal(double mean = 0.0, double stddev = 1.0);
    Vector uniform_vec(std::size_t n, double lo, double hi);
    Vector normal_vec(std::size_t n, double mean = 0.0, double stddev = 1.0);
};

// Named sub-stream derivation: hash the label, mix with the root seed. Adding
// new streams never perturbs existing ones.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view label);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace lcl
