#pragma once

#include <cstdint>
#include <random>

#include "secfpp/field.hpp"

namespace secfpp {

// Seeded randomness stream. Field sampling uses explicit rejection so the
// drawn residues do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  FieldElement uniform(const PrimeField& field) {
    const u64 q = field.modulus();
    const u64 limit = std::numeric_limits<u64>::max() - std::numeric_limits<u64>::max() % q;
    u64 x;
    do {
      x = engine_();
    } while (x >= limit);
    return {x % q};
  }

  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double chi_squared(double dof) { return std::chi_squared_distribution<double>(dof)(engine_); }

  // Child stream for a sub-task; children depend only on (seed, tag).
  Rng fork(std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(engine_() >> 32U), static_cast<std::uint32_t>(tag),
                      static_cast<std::uint32_t>(tag >> 32U)};
    std::mt19937_64 child(seq);
    return Rng(child());
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Stable 64-bit mixing for deriving independent seeds from (seed, index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27U)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31U);
}

}  // namespace secfpp
