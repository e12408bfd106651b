#include "qstein/pinching.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "qstein/errors.hpp"

namespace qstein {

namespace {

// Compositions of n into d nonnegative parts, descending lexicographic.
void enumerate_types(int remaining, int parts, std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    prefix.push_back(remaining);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int k = remaining; k >= 0; --k) {
    prefix.push_back(k);
    enumerate_types(remaining - k, parts - 1, prefix, out);
    prefix.pop_back();
  }
}

double trace_product(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b.transpose()).sum().real();
}

}  // namespace

// ---------------------------------------------------------------------------
// TypeClassDecomposition

HermitianOperator TypeClassDecomposition::type_projector(std::size_t t) const {
  Matrix local = Matrix::Zero(dim(), dim());
  for (Index c : columns_of_type[t]) local(c, c) = 1.0;
  return HermitianOperator(from_type_basis(local));
}

Matrix TypeClassDecomposition::reconstruct_reference() const {
  Matrix local = Matrix::Zero(dim(), dim());
  for (Index c = 0; c < dim(); ++c) local(c, c) = type_eigenvalues[type_of_column[static_cast<std::size_t>(c)]];
  return from_type_basis(local);
}

Matrix TypeClassDecomposition::to_type_basis(const Matrix& a) const {
  if (identity_basis) return a;
  return basis.adjoint() * a * basis;
}

Matrix TypeClassDecomposition::from_type_basis(const Matrix& a) const {
  if (identity_basis) return a;
  return basis * a * basis.adjoint();
}

TypeClassDecomposition build_type_classes(const DensityOperator& phi1, int n, double grouping_tol,
                                          Index dim_cap) {
  if (n < 1) throw InvalidArgument("build_type_classes: n must be >= 1");
  const Index site_dim = phi1.dim();
  const Index dim = checked_power_dim(site_dim, n, dim_cap);
  if (phi1.spectrum().values()(site_dim - 1) <= kSupportFloor)
    throw InvalidArgument("build_type_classes: reference density must be faithful (full rank)");

  TypeClassDecomposition tcd;
  tcd.site_dim = site_dim;
  tcd.n = n;
  tcd.ref_spectrum = spectral_decompose(phi1.op(), grouping_tol);
  tcd.effective_d = static_cast<int>(tcd.ref_spectrum.size());

  std::vector<int> prefix;
  enumerate_types(n, tcd.effective_d, prefix, tcd.types);
  std::map<std::vector<int>, std::size_t> index_of;
  for (std::size_t t = 0; t < tcd.types.size(); ++t) {
    index_of[tcd.types[t]] = t;
    double ev = 1.0;
    for (int k = 0; k < tcd.effective_d; ++k)
      ev *= std::pow(tcd.ref_spectrum.eigenvalues[static_cast<std::size_t>(k)], tcd.types[t][static_cast<std::size_t>(k)]);
    tcd.type_eigenvalues.push_back(ev);
  }

  // Group label of each site basis vector.
  std::vector<int> group_of(static_cast<std::size_t>(site_dim));
  for (std::size_t k = 0; k < tcd.ref_spectrum.size(); ++k)
    for (int m = 0; m < tcd.ref_spectrum.multiplicities[k]; ++m)
      group_of[static_cast<std::size_t>(tcd.ref_spectrum.offsets[k] + m)] = static_cast<int>(k);

  const Matrix& v = tcd.ref_spectrum.basis;
  tcd.identity_basis = v == Matrix::Identity(site_dim, site_dim);
  if (tcd.identity_basis) {
    tcd.basis = Matrix::Identity(dim, dim);
  } else {
    Matrix w = v;
    for (int k = 1; k < n; ++k) w = kron(w, v);
    tcd.basis = std::move(w);
  }

  tcd.type_of_column.resize(static_cast<std::size_t>(dim));
  tcd.columns_of_type.assign(tcd.types.size(), {});
  std::vector<int> counts(static_cast<std::size_t>(tcd.effective_d));
  for (Index c = 0; c < dim; ++c) {
    std::fill(counts.begin(), counts.end(), 0);
    Index rest = c;
    for (int s = 0; s < n; ++s) {
      ++counts[static_cast<std::size_t>(group_of[static_cast<std::size_t>(rest % site_dim)])];
      rest /= site_dim;
    }
    const std::size_t t = index_of.at(counts);
    tcd.type_of_column[static_cast<std::size_t>(c)] = t;
    tcd.columns_of_type[t].push_back(c);
  }
  return tcd;
}

DensityOperator pinch(const DensityOperator& rho, const TypeClassDecomposition& tcd) {
  if (rho.dim() != tcd.dim()) throw InvalidArgument("pinch: dimension mismatch");
  Matrix m = tcd.to_type_basis(rho.matrix());
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (tcd.type_of_column[static_cast<std::size_t>(i)] != tcd.type_of_column[static_cast<std::size_t>(j)])
        m(i, j) = 0.0;
  return DensityOperator(tcd.from_type_basis(m), rho.trace_tol() + 1e-12);
}

// ---------------------------------------------------------------------------
// AbelianRestriction

namespace {

// Orthonormal basis of span(e) built by projecting coordinate vectors in
// increasing order, so the result does not depend on the solver's choice
// inside a degenerate eigenspace.
Matrix canonical_basis(const Matrix& e) {
  const Index m = e.rows();
  const Index r = e.cols();
  if (r == 1) {
    ComplexVector v = e.col(0);
    Index lead = 0;
    v.cwiseAbs().maxCoeff(&lead);
    v *= std::conj(v(lead)) / std::abs(v(lead));
    return v;
  }
  const Matrix proj = e * e.adjoint();
  Matrix out(m, r);
  Index found = 0;
  for (Index j = 0; j < m && found < r; ++j) {
    ComplexVector w = proj.col(j);
    for (Index k = 0; k < found; ++k) w -= out.col(k) * out.col(k).dot(w);
    for (Index k = 0; k < found; ++k) w -= out.col(k) * out.col(k).dot(w);
    const double norm = w.norm();
    if (norm > 1e-6) out.col(found++) = w / norm;
  }
  if (found != r) throw NumericalError("canonical_basis: failed to span eigenspace");
  return out;
}

}  // namespace

ComplexVector AbelianRestriction::atom_vector(const TypeClassDecomposition& tcd, Index atom) const {
  auto it = std::upper_bound(blocks.begin(), blocks.end(), atom,
                             [](Index a, const TypeBlock& b) { return a < b.first_atom; });
  const TypeBlock& block = *std::prev(it);
  const ComplexVector local = block.local_vectors.col(atom - block.first_atom);
  const std::vector<Index>& cols = tcd.columns_of_type[block.type];
  ComplexVector in_type_basis = ComplexVector::Zero(tcd.dim());
  for (std::size_t k = 0; k < cols.size(); ++k) in_type_basis(cols[k]) = local(static_cast<Index>(k));
  if (tcd.identity_basis) return in_type_basis;
  return tcd.basis * in_type_basis;
}

Matrix AbelianRestriction::atoms_projector(const TypeClassDecomposition& tcd, const std::vector<Index>& atoms) const {
  Matrix local = Matrix::Zero(tcd.dim(), tcd.dim());
  for (Index a : atoms) {
    auto it = std::upper_bound(blocks.begin(), blocks.end(), a,
                               [](Index x, const TypeBlock& b) { return x < b.first_atom; });
    const TypeBlock& block = *std::prev(it);
    const ComplexVector v = block.local_vectors.col(a - block.first_atom);
    const std::vector<Index>& cols = tcd.columns_of_type[block.type];
    for (std::size_t j = 0; j < cols.size(); ++j)
      for (std::size_t i = 0; i < cols.size(); ++i)
        local(cols[i], cols[j]) += v(static_cast<Index>(i)) * std::conj(v(static_cast<Index>(j)));
  }
  return tcd.from_type_basis(local);
}

HermitianOperator AbelianRestriction::minimal_projector(const TypeClassDecomposition& tcd, std::size_t i) const {
  std::vector<Index> atoms;
  for (Index k = 0; k < minimal[i].rank; ++k) atoms.push_back(minimal[i].first_atom + k);
  return HermitianOperator(atoms_projector(tcd, atoms));
}

Matrix AbelianRestriction::refined_density(const TypeClassDecomposition& tcd) const {
  Matrix local = Matrix::Zero(tcd.dim(), tcd.dim());
  for (const TypeBlock& block : blocks) {
    const Index m = block.local_vectors.cols();
    RealVector w(m);
    for (Index k = 0; k < m; ++k) w(k) = atom_psi_weights[static_cast<std::size_t>(block.first_atom + k)];
    const Matrix sub = block.local_vectors * w.asDiagonal() * block.local_vectors.adjoint();
    const std::vector<Index>& cols = tcd.columns_of_type[block.type];
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < m; ++i) local(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]) = sub(i, j);
  }
  return tcd.from_type_basis(local);
}

AbelianRestriction abelian_restriction(const DensityOperator& psi_n, const TypeClassDecomposition& tcd,
                                       double grouping_tol) {
  if (psi_n.dim() != tcd.dim()) throw InvalidArgument("abelian_restriction: dimension mismatch");
  const Matrix m = tcd.to_type_basis(psi_n.matrix());

  AbelianRestriction out;
  Index next_atom = 0;
  for (std::size_t t = 0; t < tcd.type_count(); ++t) {
    const std::vector<Index>& cols = tcd.columns_of_type[t];
    const Index size = static_cast<Index>(cols.size());
    Matrix block(size, size);
    for (Index j = 0; j < size; ++j)
      for (Index i = 0; i < size; ++i) block(i, j) = m(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    const EigenSystem es = EigenSystem::of(block);

    AbelianRestriction::TypeBlock tb{t, Matrix(size, size), next_atom};
    Index start = 0;
    while (start < size) {
      Index end = start + 1;
      while (end < size) {
        const double prev = es.values()(end - 1);
        if (std::abs(prev - es.values()(end)) > grouping_tol * std::max(1.0, std::abs(prev))) break;
        ++end;
      }
      const Index rank = end - start;
      Matrix group(size, rank);
      if (es.coordinate_basis()) {
        std::vector<Index> coords;
        for (Index k = start; k < end; ++k) coords.push_back(es.coordinate(k));
        std::sort(coords.begin(), coords.end());
        group.setZero();
        for (Index k = 0; k < rank; ++k) group(coords[static_cast<std::size_t>(k)], k) = 1.0;
      } else {
        Matrix e(size, rank);
        for (Index k = 0; k < rank; ++k) e.col(k) = es.vector(start + k);
        group = canonical_basis(e);
      }
      tb.local_vectors.middleCols(start, rank) = group;

      const std::size_t parent = out.minimal.size();
      double psi_sum = 0.0;
      for (Index k = 0; k < rank; ++k) {
        const ComplexVector g = group.col(k);
        const double w = std::max(0.0, g.dot(block * g).real());
        psi_sum += w;
        out.atom_parent.push_back(parent);
        out.atom_psi_weights.push_back(w);
        out.atom_phi_weights.push_back(tcd.type_eigenvalues[t]);
      }
      out.minimal.push_back({t, next_atom + start, rank});
      out.psi_weights.push_back(psi_sum);
      out.phi_weights.push_back(static_cast<double>(rank) * tcd.type_eigenvalues[t]);
      start = end;
    }
    next_atom += size;
    out.blocks.push_back(std::move(tb));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Audits

HiaiPetzReport hiai_petz_audit(const DensityOperator& psi_n, const DensityOperator& phi1, int n) {
  const TypeClassDecomposition tcd = build_type_classes(phi1, n);
  if (psi_n.dim() != tcd.dim()) throw InvalidArgument("hiai_petz_audit: psi dimension does not match phi1^n");
  const DensityOperator phi_n = tensor_power(phi1, n);
  const DensityOperator pinched = pinch(psi_n, tcd);
  const AbelianRestriction restriction = abelian_restriction(psi_n, tcd);

  HiaiPetzReport r;
  r.effective_d = tcd.effective_d;
  r.lhs = relative_entropy(psi_n, phi_n);
  r.d_term = classical_kl(restriction.psi_weights, restriction.phi_weights, 1e-9);
  r.b_term = classical_kl(restriction.atom_psi_weights, restriction.atom_phi_weights, 1e-9);
  r.entropy = von_neumann_entropy(psi_n);
  r.pinched_entropy = von_neumann_entropy(pinched);
  r.pinch_gap = r.pinched_entropy - r.entropy;
  r.bound = tcd.effective_d * std::log(n + 1.0);
  if (r.lhs.is_infinite()) r.infinite_term = "lhs";
  else if (r.d_term.is_infinite()) r.infinite_term = "d_term";
  else if (r.b_term.is_infinite()) r.infinite_term = "b_term";
  if (r.infinite_term.empty()) {
    r.residual = std::abs(r.lhs.value() - (r.d_term.value() + r.pinch_gap));
  } else {
    r.residual = std::numeric_limits<double>::infinity();
  }
  return r;
}

CrossTermCheck cross_term_identity_check(const DensityOperator& psi_n, const TypeClassDecomposition& tcd,
                                         const DensityOperator& phi_n) {
  if (psi_n.dim() != tcd.dim() || phi_n.dim() != tcd.dim())
    throw InvalidArgument("cross_term_identity_check: dimension mismatch");
  const AbelianRestriction restriction = abelian_restriction(psi_n, tcd);
  const Matrix log_phi = log_on_support(phi_n.op()).matrix();
  CrossTermCheck c;
  c.restricted = trace_product(restriction.refined_density(tcd), log_phi);
  c.full = trace_product(psi_n.matrix(), log_phi);
  c.residual = std::abs(c.restricted - c.full);
  return c;
}

}  // namespace qstein
