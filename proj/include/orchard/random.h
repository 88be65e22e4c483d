#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace orchard {

// Stateless generator: every draw is a pure function of a key, so the order in
// which draws are made never changes their values.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t Bits(std::initializer_list<std::uint64_t> key) const;
  // Uniform in [0, 1).
  double Uniform(std::initializer_list<std::uint64_t> key) const;
  // Standard normal via Box-Muller over two derived uniforms.
  double Gaussian(std::initializer_list<std::uint64_t> key) const;

 private:
  std::uint64_t seed_;
};

// Sequential generator with platform-independent distributions. The standard
// library distributions are implementation-defined, so they are not used where
// results must be reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t Next() { return engine_(); }
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, n).
  std::size_t Index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t SplitMix64(std::uint64_t x);

}  // namespace orchard
