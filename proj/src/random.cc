#include "orchard/random.h"

#include <cmath>
#include <limits>
#include <numbers>

namespace orchard {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t CounterRng::Bits(std::initializer_list<std::uint64_t> key) const {
  std::uint64_t h = SplitMix64(seed_);
  for (std::uint64_t k : key) h = SplitMix64(h ^ SplitMix64(k));
  return h;
}

double CounterRng::Uniform(std::initializer_list<std::uint64_t> key) const {
  return static_cast<double>(Bits(key) >> 11) * 0x1.0p-53;
}

double CounterRng::Gaussian(std::initializer_list<std::uint64_t> key) const {
  const std::uint64_t base = Bits(key);
  const double u1 =
      (static_cast<double>(SplitMix64(base ^ 1) >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = static_cast<double>(SplitMix64(base ^ 2) >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::Index(std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

}  // namespace orchard
