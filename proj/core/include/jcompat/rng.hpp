#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

namespace jcompat {

// Seeded generator with self-contained derived distributions. The raw
// mt19937_64 sequence is fixed by the standard, and every distribution here
// is implemented locally, so identical seeds give identical streams on every
// platform and standard library.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  // Unbiased draw from [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0)
      throw std::invalid_argument("Rng::below: empty range");
    std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
    while (true) {
      std::uint64_t r = next();
      if (rem == 0 || r < std::numeric_limits<std::uint64_t>::max() - rem + 1)
        return r % n;
    }
  }

  // Inclusive integer range.
  int range(int lo, int hi) {
    if (lo > hi)
      throw std::invalid_argument("Rng::range: lo > hi");
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi) - lo + 1));
  }

  // Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool coin() { return (next() >> 63) != 0; }

  // Decorrelated child seed for substream `stream` of `seed` (splitmix64).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::mt19937_64 eng_;
};

} // namespace jcompat
