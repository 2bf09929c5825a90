#pragma once

#include <array>
#include <cstdint>

namespace cpsdet {

// xoshiro256++ seeded through splitmix64. The generator is fully specified
// here (no platform entropy, no libm distributions) so sample streams are
// bit-identical across machines. Single-owner: do not share across threads;
// fork independent streams with child().
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform double in [0, 1), 53 random bits.
  double uniform();

  // Gaussian draw via Box-Muller; consumes exactly two raw outputs so the
  // stream layout does not depend on the arguments. sd must be >= 0
  // (DomainError otherwise); sd == 0 returns mean exactly.
  double normal(double mean, double sd);

  // Independent generator for a derived stream. The same (seed, stream)
  // pair always yields the same child.
  SeededRng child(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace cpsdet
