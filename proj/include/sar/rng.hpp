#pragma once

#include <cstdint>

namespace sar {

// splitmix64-based generator. Unlike the standard-library distributions, its
// output stream is identical across platforms, so seeded artifacts stay
// byte-reproducible.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed ^ 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }
  long uniform_int(long n) { return static_cast<long>(next() % static_cast<std::uint64_t>(n)); }
};

}  // namespace sar
