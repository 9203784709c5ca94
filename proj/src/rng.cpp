#include "modsensor/rng.hpp"

namespace modsensor {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t round) {
  return mix64(mix64(mix64(master) ^ trial) ^ (round * 0xD1B54A32D192ED03ULL));
}

Rng make_stream(std::uint64_t master, std::uint64_t trial, std::uint64_t round) {
  return Rng(stream_seed(master, trial, round));
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace modsensor
