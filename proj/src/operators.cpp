#include "qstein/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qstein/errors.hpp"

namespace qstein {

Index checked_power_dim(Index base, int n, Index cap) {
  if (base < 1 || n < 1) throw InvalidArgument("checked_power_dim: base and n must be positive");
  long long dim = 1;
  for (int i = 0; i < n; ++i) {
    dim *= base;
    if (dim > cap) {
      // Report the full requirement, saturating instead of overflowing.
      long double full = std::pow(static_cast<long double>(base), n);
      long long required = full > 9e18L ? static_cast<long long>(9e18) : static_cast<long long>(full);
      throw DimensionCapExceeded(required, cap);
    }
  }
  return static_cast<Index>(dim);
}

double max_abs_entry(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

bool is_diagonal(const Matrix& m) {
  if (m.rows() != m.cols()) return false;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != Complex(0.0, 0.0)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// EigenSystem

EigenSystem EigenSystem::of(const Matrix& hermitian) {
  EigenSystem es;
  const Index n = hermitian.rows();
  if (is_diagonal(hermitian)) {
    es.coordinate_basis_ = true;
    es.coordinates_.resize(static_cast<std::size_t>(n));
    std::iota(es.coordinates_.begin(), es.coordinates_.end(), Index{0});
    std::stable_sort(es.coordinates_.begin(), es.coordinates_.end(), [&](Index a, Index b) {
      return hermitian(a, a).real() > hermitian(b, b).real();
    });
    es.values_.resize(n);
    for (Index k = 0; k < n; ++k) es.values_(k) = hermitian(es.coordinate(k), es.coordinate(k)).real();
    return es;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian);
  if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver did not converge");
  es.values_ = solver.eigenvalues().reverse();
  es.vectors_ = solver.eigenvectors().rowwise().reverse();
  return es;
}

ComplexVector EigenSystem::vector(Index k) const {
  if (!coordinate_basis_) return vectors_.col(k);
  ComplexVector v = ComplexVector::Zero(dim());
  v(coordinate(k)) = 1.0;
  return v;
}

Matrix EigenSystem::vectors() const {
  if (!coordinate_basis_) return vectors_;
  Matrix v = Matrix::Zero(dim(), dim());
  for (Index k = 0; k < dim(); ++k) v(coordinate(k), k) = 1.0;
  return v;
}

RealVector EigenSystem::expectations(const Matrix& a) const {
  RealVector out(dim());
  if (coordinate_basis_) {
    for (Index k = 0; k < dim(); ++k) out(k) = a(coordinate(k), coordinate(k)).real();
    return out;
  }
  const Matrix av = a * vectors_;
  for (Index k = 0; k < dim(); ++k) out(k) = vectors_.col(k).dot(av.col(k)).real();
  return out;
}

Matrix EigenSystem::apply(const std::function<double(double)>& f) const {
  RealVector fv(dim());
  for (Index k = 0; k < dim(); ++k) fv(k) = f(values_(k));
  if (coordinate_basis_) {
    Matrix out = Matrix::Zero(dim(), dim());
    for (Index k = 0; k < dim(); ++k) out(coordinate(k), coordinate(k)) = fv(k);
    return out;
  }
  return vectors_ * fv.asDiagonal() * vectors_.adjoint();
}

void EigenSystem::clamp_nonnegative() { values_ = values_.cwiseMax(0.0); }

// ---------------------------------------------------------------------------
// HermitianOperator

HermitianOperator::HermitianOperator(Matrix entries, double hermiticity_tol)
    : tol_(hermiticity_tol) {
  if (entries.rows() < 1 || entries.rows() != entries.cols()) {
    std::ostringstream os;
    os << "HermitianOperator: expected a nonempty square matrix, got " << entries.rows() << "x"
       << entries.cols();
    throw InvalidArgument(os.str());
  }
  const double deviation = max_abs_entry(entries - entries.adjoint());
  if (!(deviation <= hermiticity_tol)) {
    std::ostringstream os;
    os << "HermitianOperator: matrix is not Hermitian (max |a - a*| = " << deviation
       << ", tolerance " << hermiticity_tol << ")";
    throw InvalidArgument(os.str());
  }
  entries_ = (entries + entries.adjoint()) * 0.5;
  diagonal_ = qstein::is_diagonal(entries_);
}

HermitianOperator HermitianOperator::identity(Index dim) {
  return HermitianOperator(Matrix::Identity(dim, dim));
}

HermitianOperator HermitianOperator::diagonal(std::span<const double> entries) {
  Matrix m = Matrix::Zero(static_cast<Index>(entries.size()), static_cast<Index>(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) m(static_cast<Index>(i), static_cast<Index>(i)) = entries[i];
  return HermitianOperator(std::move(m));
}

// ---------------------------------------------------------------------------
// DensityOperator

namespace {

std::shared_ptr<const EigenSystem> validated_spectrum(const HermitianOperator& op, double trace_tol) {
  const double trace = op.matrix().trace().real();
  if (!(std::abs(trace - 1.0) <= trace_tol)) {
    std::ostringstream os;
    os << "DensityOperator: trace " << trace << " deviates from 1 by more than " << trace_tol;
    throw InvalidArgument(os.str());
  }
  auto es = EigenSystem::of(op.matrix());
  const double smallest = es.values()(es.dim() - 1);
  if (smallest < -trace_tol) {
    std::ostringstream os;
    os << "DensityOperator: negative eigenvalue " << smallest << " below -" << trace_tol;
    throw InvalidArgument(os.str());
  }
  es.clamp_nonnegative();
  return std::make_shared<const EigenSystem>(std::move(es));
}

}  // namespace

DensityOperator::DensityOperator(HermitianOperator op, double trace_tol)
    : op_(std::move(op)), trace_tol_(trace_tol), spectrum_(validated_spectrum(op_, trace_tol)) {}

DensityOperator::DensityOperator(Matrix entries, double trace_tol)
    : DensityOperator(HermitianOperator(std::move(entries)), trace_tol) {}

DensityOperator DensityOperator::diagonal(std::span<const double> probabilities, double trace_tol) {
  return DensityOperator(HermitianOperator::diagonal(probabilities), trace_tol);
}

DensityOperator DensityOperator::pure(const ComplexVector& state) {
  const double norm = state.norm();
  if (!(norm > 0.0)) throw InvalidArgument("DensityOperator::pure: zero vector");
  const ComplexVector v = state / norm;
  return DensityOperator(Matrix(v * v.adjoint()));
}

DensityOperator DensityOperator::maximally_mixed(Index dim) {
  return DensityOperator(Matrix(Matrix::Identity(dim, dim) / static_cast<double>(dim)));
}

RealVector DensityOperator::diagonal_entries() const { return matrix().diagonal().real(); }

// ---------------------------------------------------------------------------
// SpectralDecomposition

Matrix SpectralDecomposition::group_vectors(std::size_t k) const {
  const Index start = offsets[k];
  return basis.middleCols(start, multiplicities[k]);
}

HermitianOperator SpectralDecomposition::projector(std::size_t k) const {
  const Matrix v = group_vectors(k);
  return HermitianOperator(Matrix(v * v.adjoint()));
}

std::vector<HermitianOperator> SpectralDecomposition::projectors() const {
  std::vector<HermitianOperator> out;
  out.reserve(size());
  for (std::size_t k = 0; k < size(); ++k) out.push_back(projector(k));
  return out;
}

Matrix SpectralDecomposition::reconstruct() const {
  const Index n = basis.rows();
  Matrix out = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < size(); ++k) {
    const Matrix v = group_vectors(k);
    out += eigenvalues[k] * (v * v.adjoint());
  }
  return out;
}

SpectralDecomposition spectral_decompose(const HermitianOperator& a, double grouping_tol) {
  const EigenSystem es = EigenSystem::of(a.matrix());
  SpectralDecomposition sd;
  sd.grouping_tol = grouping_tol;
  sd.basis = es.vectors();
  const Index n = es.dim();
  Index start = 0;
  while (start < n) {
    Index end = start + 1;
    while (end < n) {
      const double prev = es.values()(end - 1);
      if (std::abs(prev - es.values()(end)) > grouping_tol * std::max(1.0, std::abs(prev))) break;
      ++end;
    }
    sd.eigenvalues.push_back(es.values().segment(start, end - start).mean());
    sd.multiplicities.push_back(static_cast<int>(end - start));
    sd.offsets.push_back(start);
    start = end;
  }
  return sd;
}

// ---------------------------------------------------------------------------
// Tensor products

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

DensityOperator tensor_product(const DensityOperator& a, const DensityOperator& b) {
  return DensityOperator(kron(a.matrix(), b.matrix()), a.trace_tol() + b.trace_tol());
}

DensityOperator tensor_power(const DensityOperator& rho, int n, Index dim_cap) {
  if (n < 1) throw InvalidArgument("tensor_power: n must be >= 1");
  checked_power_dim(rho.dim(), n, dim_cap);
  if (n == 1) return rho;
  Matrix acc = rho.matrix();
  for (int k = 1; k < n; ++k) acc = kron(acc, rho.matrix());
  return DensityOperator(std::move(acc), n * rho.trace_tol());
}

// ---------------------------------------------------------------------------
// Partial trace

Matrix partial_trace(const Matrix& rho, std::span<const Index> site_dims, std::span<const Index> keep) {
  const Index sites = static_cast<Index>(site_dims.size());
  Index total = 1;
  for (Index d : site_dims) {
    if (d < 1) throw InvalidArgument("partial_trace: site dimensions must be positive");
    total *= d;
  }
  if (total != rho.rows() || rho.rows() != rho.cols()) {
    std::ostringstream os;
    os << "partial_trace: product of site dims " << total << " does not match matrix dim " << rho.rows();
    throw InvalidArgument(os.str());
  }
  if (keep.empty()) throw InvalidArgument("partial_trace: keep set must be nonempty");
  std::vector<bool> kept(static_cast<std::size_t>(sites), false);
  for (Index s : keep) {
    if (s < 0 || s >= sites) throw InvalidArgument("partial_trace: keep index out of range");
    if (kept[static_cast<std::size_t>(s)]) throw InvalidArgument("partial_trace: duplicate keep index");
    kept[static_cast<std::size_t>(s)] = true;
  }

  // Strides of each site in the full index (first site most significant).
  std::vector<Index> stride(static_cast<std::size_t>(sites));
  Index acc = 1;
  for (Index s = sites - 1; s >= 0; --s) {
    stride[static_cast<std::size_t>(s)] = acc;
    acc *= site_dims[static_cast<std::size_t>(s)];
  }
  // Full-index offsets contributed by kept and traced digits.
  auto offsets_for = [&](bool want_kept) {
    std::vector<Index> offs{0};
    for (Index s = 0; s < sites; ++s) {
      if (kept[static_cast<std::size_t>(s)] != want_kept) continue;
      std::vector<Index> next;
      next.reserve(offs.size() * static_cast<std::size_t>(site_dims[static_cast<std::size_t>(s)]));
      for (Index o : offs)
        for (Index digit = 0; digit < site_dims[static_cast<std::size_t>(s)]; ++digit)
          next.push_back(o + digit * stride[static_cast<std::size_t>(s)]);
      offs = std::move(next);
    }
    return offs;
  };
  const std::vector<Index> kept_offsets = offsets_for(true);
  const std::vector<Index> traced_offsets = offsets_for(false);

  const Index out_dim = static_cast<Index>(kept_offsets.size());
  Matrix out = Matrix::Zero(out_dim, out_dim);
  for (Index b = 0; b < out_dim; ++b)
    for (Index a = 0; a < out_dim; ++a) {
      Complex sum = 0.0;
      for (Index t : traced_offsets) sum += rho(kept_offsets[a] + t, kept_offsets[b] + t);
      out(a, b) = sum;
    }
  return out;
}

DensityOperator partial_trace(const DensityOperator& rho, std::span<const Index> site_dims,
                              std::span<const Index> keep) {
  return DensityOperator(partial_trace(rho.matrix(), site_dims, keep), rho.trace_tol() + 1e-12);
}

// ---------------------------------------------------------------------------
// Functional calculus

HermitianOperator log_on_support(const HermitianOperator& a, double support_floor) {
  const EigenSystem es = EigenSystem::of(a.matrix());
  const double smallest = es.values()(es.dim() - 1);
  if (smallest < -kNegativeEigenTol) {
    std::ostringstream os;
    os << "log_on_support: operator has negative eigenvalue " << smallest;
    throw InvalidArgument(os.str());
  }
  return HermitianOperator(
      es.apply([support_floor](double x) { return x <= support_floor ? 0.0 : std::log(x); }));
}

namespace {

// m <- (I ⊗ U_site ⊗ I) m, acting on the row index.
void apply_on_site_rows(Matrix& m, const Matrix& u, Index site, Index sites) {
  const Index d = u.rows();
  Index inner = 1;
  for (Index s = site + 1; s < sites; ++s) inner *= d;
  const Index outer = m.rows() / (inner * d);
  ComplexVector buf(d);
  for (Index c = 0; c < m.cols(); ++c)
    for (Index o = 0; o < outer; ++o)
      for (Index i = 0; i < inner; ++i) {
        const Index base = o * d * inner + i;
        for (Index k = 0; k < d; ++k) buf(k) = m(base + k * inner, c);
        for (Index j = 0; j < d; ++j) {
          Complex sum = 0.0;
          for (Index k = 0; k < d; ++k) sum += u(j, k) * buf(k);
          m(base + j * inner, c) = sum;
        }
      }
}

}  // namespace

Matrix conjugate_by_site_unitary(const Matrix& a, const Matrix& u, int sites) {
  Matrix m = a;
  for (Index s = 0; s < sites; ++s) apply_on_site_rows(m, u, s, sites);
  Matrix t = m.adjoint();
  for (Index s = 0; s < sites; ++s) apply_on_site_rows(t, u, s, sites);
  return t.adjoint();
}

bool is_unitary(const Matrix& u, double tol) {
  if (u.rows() != u.cols()) return false;
  return max_abs_entry(u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())) <= tol;
}

}  // namespace qstein
