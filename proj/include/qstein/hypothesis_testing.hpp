#pragma once

// Neyman-Pearson machinery for the optimal type-II exponent
//
//   beta_{eps,n} = min { log phi(q) : q projector, psi(q) >= 1 - eps }.
//
// Commuting inputs are solved exactly as a subset-selection problem.
// Non-commuting inputs get a bracket: an explicit feasible projector from
// spectral tests (upper end) and the Lagrangian dual bound (lower end).

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qstein/entropy.hpp"
#include "qstein/operators.hpp"
#include "qstein/states.hpp"

namespace qstein {

inline constexpr double kCommutatorTol = 1e-10;
inline constexpr Index kExactCap = 22;
inline constexpr int kDefaultLambdaGrid = 200;

struct TestPoint {
  double lambda = 0.0;
  double type1 = 0.0;  // psi(1 - q)
  double type2 = 0.0;  // phi(q)
  Index rank = 0;
};

// q_lambda = projector onto the strictly positive eigenspace of
// lambda * psi - phi, for each lambda.
std::vector<TestPoint> np_spectral_curve(const DensityOperator& psi, const DensityOperator& phi,
                                         std::span<const double> lambdas);

struct BetaBracket {
  double epsilon = 0.0;
  double beta_lo = -std::numeric_limits<double>::infinity();
  double beta_hi = 0.0;
  bool tight = false;

  // Witness projector. Classical solutions list outcome indices; the
  // quantum route stores orthonormal columns spanning q. Both are filled
  // when the commuting route ran on matrices.
  std::vector<Index> witness_outcomes;
  Matrix witness_vectors;
  double witness_psi_mass = 0.0;
  double witness_phi_mass = 0.0;
  double witness_lambda = std::numeric_limits<double>::quiet_NaN();
  std::string witness_kind;
};

// Identical outcomes collapsed into one item of multiplicity `count`.
struct OutcomeClass {
  double p = 0.0;
  double q = 0.0;
  Index count = 1;
};

struct SubsetSolution {
  double q_mass = 0.0;
  double p_mass = 0.0;
  std::vector<Index> taken;  // per class, how many members are selected
  long long nodes = 0;
};

// Exact minimum q-mass over multisets of class members whose p-mass is at
// least 1 - eps. Branch-and-bound in likelihood-ratio order with the
// fractional relaxation as lower bound; suffixes with a common q-value are
// closed greedily (min-cardinality is exact there).
SubsetSolution solve_subset_selection(std::span<const OutcomeClass> classes, double epsilon,
                                      long long node_budget = 50'000'000);

// Groups outcomes with (relatively) identical (p, q) and solves exactly.
// Alphabets up to `exact_cap` are additionally enumerated exhaustively as a
// cross-check of the branch-and-bound result.
BetaBracket classical_np_exact(std::span<const double> p, std::span<const double> q, double epsilon,
                               Index exact_cap = kExactCap);

BetaBracket beta_bracket(const DensityOperator& psi, const DensityOperator& phi, double epsilon,
                         int lambda_grid_size = kDefaultLambdaGrid);

// Simultaneous eigenbasis distributions when [psi, phi] vanishes within
// kCommutatorTol; columns of `basis` are the shared eigenvectors.
struct CommutingSpectra {
  std::vector<double> p;
  std::vector<double> q;
  Matrix basis;
  bool coordinate = false;  // basis is the identity
};
std::optional<CommutingSpectra> commuting_spectra(const DensityOperator& psi, const DensityOperator& phi);

// (S(psi, phi) + log 2) / (1 - eps); +infinity when the relative entropy is.
double weak_converse_bound(const DensityOperator& psi, const DensityOperator& phi, double epsilon);
double weak_converse_bound(ExtendedReal relative_entropy_value, double epsilon);

struct SteinRow {
  int n = 0;
  double beta_lo_per_n = 0.0;
  double beta_hi_per_n = 0.0;
  double s_target = 0.0;
  double gap = 0.0;             // |(-beta_hi / n) - s_target|
  double block_relative_entropy = 0.0;
  double converse_bound = 0.0;  // per site: (S_n + log 2) / ((1 - eps) n)
  bool converse_ok = true;      // -beta_lo / n <= converse_bound + 1e-9
  bool tight = false;
};

struct SteinScanOptions {
  int lambda_grid_size = kDefaultLambdaGrid;
  Index dim_cap = kDefaultDimCap;
};

// `phi` must be i.i.d. Commuting i.i.d. pairs are aggregated by type class;
// classical psi against diagonal phi uses outcome vectors; everything else
// runs the dense bracket.
std::vector<SteinRow> stein_scan(const StateModel& psi, const StateModel& phi, double epsilon, int n_max,
                                 const SteinScanOptions& options = {});

}  // namespace qstein
