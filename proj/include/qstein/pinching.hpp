#pragma once

// Type-class decomposition of a product reference density, the trace
// conditional expectation onto its eigenspaces (pinching), the abelian
// algebra generated by the pinched state, its maximally abelian
// refinement, and an audit of the Hiai-Petz entropy identity.

#include <string>
#include <vector>

#include "qstein/entropy.hpp"
#include "qstein/operators.hpp"

namespace qstein {

// Eigenspaces of phi1^{⊗n}. Site eigenvalues are merged with the
// operators-module grouping tolerance, so the effective alphabet d may be
// smaller than the site dimension.
struct TypeClassDecomposition {
  Index site_dim = 0;
  int effective_d = 0;
  int n = 0;
  SpectralDecomposition ref_spectrum;
  std::vector<std::vector<int>> types;   // (n_1, ..., n_d), descending lexicographic
  std::vector<double> type_eigenvalues;  // prod_k lambda_k^{n_k}
  // Columns are product eigenvectors of phi1^{⊗n}; column c belongs to
  // type type_of_column[c].
  Matrix basis;
  bool identity_basis = false;
  std::vector<std::size_t> type_of_column;
  std::vector<std::vector<Index>> columns_of_type;

  Index dim() const { return basis.rows(); }
  std::size_t type_count() const { return types.size(); }
  Index type_trace(std::size_t t) const { return static_cast<Index>(columns_of_type[t].size()); }
  HermitianOperator type_projector(std::size_t t) const;
  Matrix reconstruct_reference() const;

  Matrix to_type_basis(const Matrix& a) const;    // W* a W
  Matrix from_type_basis(const Matrix& a) const;  // W a W*
};

TypeClassDecomposition build_type_classes(const DensityOperator& phi1, int n,
                                          double grouping_tol = kGroupingTol,
                                          Index dim_cap = kDefaultDimCap);

// sum_t p_t rho p_t.
DensityOperator pinch(const DensityOperator& rho, const TypeClassDecomposition& tcd);

// Minimal projectors f_i of the algebra generated by {p_t D_psi p_t} and
// {p_t}, each split into rank-one atoms g_{i,j} that are eigenvectors of
// both the pinched density and phi1^{⊗n}.
struct AbelianRestriction {
  struct Minimal {
    std::size_t type = 0;
    Index first_atom = 0;
    Index rank = 0;
  };
  struct TypeBlock {
    std::size_t type = 0;
    Matrix local_vectors;  // atom coordinates in the type's product basis
    Index first_atom = 0;
  };

  std::vector<Minimal> minimal;
  std::vector<double> psi_weights;  // per f_i
  std::vector<double> phi_weights;  // per f_i

  std::vector<TypeBlock> blocks;
  std::vector<std::size_t> atom_parent;  // f_i index of each atom
  std::vector<double> atom_psi_weights;
  std::vector<double> atom_phi_weights;

  Index atom_count() const { return static_cast<Index>(atom_psi_weights.size()); }
  ComplexVector atom_vector(const TypeClassDecomposition& tcd, Index atom) const;
  // Sum of the listed atoms' rank-one projectors.
  Matrix atoms_projector(const TypeClassDecomposition& tcd, const std::vector<Index>& atoms) const;
  HermitianOperator minimal_projector(const TypeClassDecomposition& tcd, std::size_t i) const;
  // sum_g psi(g) g: the density of psi restricted to the refinement.
  Matrix refined_density(const TypeClassDecomposition& tcd) const;
};

AbelianRestriction abelian_restriction(const DensityOperator& psi_n, const TypeClassDecomposition& tcd,
                                       double grouping_tol = kGroupingTol);

struct HiaiPetzReport {
  ExtendedReal lhs;         // S(psi^(n), phi^(n))
  ExtendedReal d_term;      // S(psi|D, phi|D)
  ExtendedReal b_term;      // S(psi|B, phi|B)
  double pinched_entropy = 0.0;
  double entropy = 0.0;
  double pinch_gap = 0.0;   // S(psi∘E) - S(psi)
  double residual = 0.0;    // |lhs - (d_term + pinch_gap)|
  double bound = 0.0;       // d log(n + 1)
  int effective_d = 0;
  std::string infinite_term;  // empty when every term is finite
};

HiaiPetzReport hiai_petz_audit(const DensityOperator& psi_n, const DensityOperator& phi1, int n);

struct CrossTermCheck {
  double restricted = 0.0;  // tr(D_{psi|B} log D_phi)
  double full = 0.0;        // tr(D_psi log D_phi)
  double residual = 0.0;
};

CrossTermCheck cross_term_identity_check(const DensityOperator& psi_n, const TypeClassDecomposition& tcd,
                                         const DensityOperator& phi_n);

}  // namespace qstein
