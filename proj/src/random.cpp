#include "qstein/random.hpp"

#include <cmath>
#include <numbers>

namespace qstein {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL + 1));
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

Matrix random_ginibre(Index rows, Index cols, Rng& rng) {
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      g(i, j) = Complex(re, im) * std::sqrt(0.5);
    }
  return g;
}

Matrix random_unitary(Index dim, Rng& rng) {
  const Matrix g = random_ginibre(dim, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 0; k < dim; ++k) {
    const double mag = std::abs(r(k, k));
    if (mag > 0.0) q.col(k) *= r(k, k) / mag;
  }
  return q;
}

DensityOperator random_density(Index dim, Rng& rng) {
  const Matrix g = random_ginibre(dim, dim, rng);
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityOperator(HermitianOperator((rho + rho.adjoint()) * 0.5));
}

HermitianOperator random_hermitian(Index dim, Rng& rng) {
  const Matrix g = random_ginibre(dim, dim, rng);
  return HermitianOperator((g + g.adjoint()) * 0.5);
}

}  // namespace qstein
