#pragma once

// Dense complex Hermitian linear algebra on tensor-product blocks.
//
// All logarithms are natural. Matrices are stored densely; the block
// dimension is capped (kDefaultDimCap) so that every object in the library
// stays at desk scale.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace qstein {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kHermiticityTol = 1e-10;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kGroupingTol = 1e-10;
inline constexpr double kSupportFloor = 1e-14;
inline constexpr double kNegativeEigenTol = 1e-10;
inline constexpr Index kDefaultDimCap = 8192;

// Throws DimensionCapExceeded unless base^n <= cap. Returns base^n.
Index checked_power_dim(Index base, int n, Index cap = kDefaultDimCap);

double max_abs_entry(const Matrix& m);
bool is_diagonal(const Matrix& m);

// Eigen-decomposition of a Hermitian matrix with eigenvalues in descending
// order. Diagonal inputs skip the dense solver: the basis is then a
// permutation of coordinate vectors.
class EigenSystem {
 public:
  static EigenSystem of(const Matrix& hermitian);

  Index dim() const { return values_.size(); }
  const RealVector& values() const { return values_; }
  bool coordinate_basis() const { return coordinate_basis_; }
  // Coordinate carried by column k when coordinate_basis() holds.
  Index coordinate(Index k) const { return coordinates_[static_cast<std::size_t>(k)]; }

  ComplexVector vector(Index k) const;
  Matrix vectors() const;

  // <v_k| a |v_k> for every eigenvector v_k.
  RealVector expectations(const Matrix& a) const;
  // V f(Λ) V*.
  Matrix apply(const std::function<double(double)>& f) const;

  // Sets negative eigenvalues to zero (density operators only).
  void clamp_nonnegative();

 private:
  RealVector values_;
  Matrix vectors_;
  std::vector<Index> coordinates_;
  bool coordinate_basis_ = false;
};

class HermitianOperator {
 public:
  // Rejects entries deviating from their conjugate transpose by more than
  // `hermiticity_tol` (max absolute entry); stores the symmetrized matrix.
  explicit HermitianOperator(Matrix entries, double hermiticity_tol = kHermiticityTol);

  static HermitianOperator identity(Index dim);
  static HermitianOperator diagonal(std::span<const double> entries);

  Index dim() const { return entries_.rows(); }
  const Matrix& matrix() const { return entries_; }
  double hermiticity_tol() const { return tol_; }
  bool is_diagonal() const { return diagonal_; }

 private:
  Matrix entries_;
  double tol_;
  bool diagonal_;
};

class DensityOperator {
 public:
  explicit DensityOperator(HermitianOperator op, double trace_tol = kTraceTol);
  explicit DensityOperator(Matrix entries, double trace_tol = kTraceTol);

  static DensityOperator diagonal(std::span<const double> probabilities,
                                  double trace_tol = kTraceTol);
  static DensityOperator pure(const ComplexVector& state);
  static DensityOperator maximally_mixed(Index dim);

  Index dim() const { return op_.dim(); }
  const HermitianOperator& op() const { return op_; }
  const Matrix& matrix() const { return op_.matrix(); }
  double trace_tol() const { return trace_tol_; }
  bool is_diagonal() const { return op_.is_diagonal(); }

  // Spectrum with eigenvalues clamped to be nonnegative.
  const EigenSystem& spectrum() const { return *spectrum_; }
  RealVector diagonal_entries() const;

 private:
  HermitianOperator op_;
  double trace_tol_;
  std::shared_ptr<const EigenSystem> spectrum_;
};

// Eigenvalues merged into groups whose members lie within the relative
// grouping tolerance of their predecessor: |a - b| <= tol * max(1, |a|).
struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // descending, one per group
  std::vector<int> multiplicities;
  Matrix basis;                     // eigenvectors, grouped consecutively
  std::vector<Index> offsets;       // first basis column of each group
  double grouping_tol = kGroupingTol;

  std::size_t size() const { return eigenvalues.size(); }
  Matrix group_vectors(std::size_t k) const;
  HermitianOperator projector(std::size_t k) const;
  std::vector<HermitianOperator> projectors() const;
  Matrix reconstruct() const;
};

SpectralDecomposition spectral_decompose(const HermitianOperator& a,
                                         double grouping_tol = kGroupingTol);

Matrix kron(const Matrix& a, const Matrix& b);

DensityOperator tensor_product(const DensityOperator& a, const DensityOperator& b);

DensityOperator tensor_power(const DensityOperator& rho, int n, Index dim_cap = kDefaultDimCap);

// Traces out every site not listed in `keep`. Sites are ordered with the
// first site as the most significant tensor factor.
DensityOperator partial_trace(const DensityOperator& rho, std::span<const Index> site_dims,
                              std::span<const Index> keep);
Matrix partial_trace(const Matrix& rho, std::span<const Index> site_dims,
                     std::span<const Index> keep);

// log taken on the support only: eigenvalues <= support_floor map to 0.
HermitianOperator log_on_support(const HermitianOperator& a, double support_floor = kSupportFloor);

// (U ⊗ ... ⊗ U) a (U ⊗ ... ⊗ U)* without forming the n-fold Kronecker power.
Matrix conjugate_by_site_unitary(const Matrix& a, const Matrix& u, int sites);

bool is_unitary(const Matrix& u, double tol = 1e-10);

}  // namespace qstein
