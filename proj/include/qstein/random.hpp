#pragma once

// Seedable generator whose output is reproducible bit-for-bit across
// platforms: std::mt19937_64 is fully specified by the standard, and the
// conversions below avoid the implementation-defined std distributions.

#include <cstdint>
#include <random>

#include "qstein/operators.hpp"

namespace qstein {

std::uint64_t splitmix64(std::uint64_t x);

// Seed for an independent stream identified by (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Standard normal via Box-Muller.
  double normal();
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// Ginibre-distributed complex matrix.
Matrix random_ginibre(Index rows, Index cols, Rng& rng);
// Haar-random unitary (QR of a Ginibre matrix with phase fix).
Matrix random_unitary(Index dim, Rng& rng);
// Full-rank random density G G* / tr(G G*).
DensityOperator random_density(Index dim, Rng& rng);
// Random Hermitian with Gaussian entries.
HermitianOperator random_hermitian(Index dim, Rng& rng);

}  // namespace qstein
