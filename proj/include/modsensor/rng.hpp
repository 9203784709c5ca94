#pragma once

#include <cstdint>
#include <random>

namespace modsensor {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Independent stream per (master seed, trial, round); identical across thread counts.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t round = 0);
Rng make_stream(std::uint64_t master, std::uint64_t trial, std::uint64_t round = 0);

// Uniform on [0, 1) from the top 53 bits.
double uniform01(Rng& rng);

}  // namespace modsensor
