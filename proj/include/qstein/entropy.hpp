#pragma once

// Von Neumann entropy, quantum relative entropy with the support
// convention, classical Shannon entropy and KL divergence, and finite-n
// mean relative entropy sequences.

#include <span>
#include <utility>
#include <vector>

#include "qstein/entropy_types.hpp"
#include "qstein/operators.hpp"
#include "qstein/states.hpp"

namespace qstein {

inline constexpr double kSupportLeakTol = 1e-10;
inline constexpr double kNegativeClamp = 1e-9;
inline constexpr double kSimplexTol = 1e-12;

double von_neumann_entropy(const DensityOperator& rho);

// -sum p log p with 0 log 0 = 0. No simplex validation.
double shannon_entropy(std::span<const double> p);

// S(sigma, tau) = tr sigma (log sigma - log tau), or +infinity when
// tr(sigma (1 - supp tau)) exceeds `support_leak_tol`.
ExtendedReal relative_entropy(const DensityOperator& sigma, const DensityOperator& tau,
                              double support_leak_tol = kSupportLeakTol);

// Rejects inputs that are not probability vectors within `simplex_tol`.
ExtendedReal classical_kl(std::span<const double> p, std::span<const double> q,
                          double simplex_tol = kSimplexTol);

void validate_simplex(std::span<const double> p, double tol, const char* what);

struct MeanRelEntropySequence {
  std::vector<std::pair<int, double>> values;  // (n, S(psi^(n), phi^(n)) / n)
  double sup_estimate = 0.0;
  bool monotone = true;         // nondecreasing within kMonotoneSlack
  bool infinite = false;        // some block had +infinity; values truncated there
  int first_infinite_n = 0;

  static constexpr double kMonotoneSlack = 1e-9;
};

// `phi` must be an i.i.d. model.
MeanRelEntropySequence mean_relative_entropy_sequence(const StateModel& psi, const StateModel& phi,
                                                      int n_max, Index dim_cap = kDefaultDimCap);

// S(psi^(n), phi1^{⊗n}) for a model block; uses the diagonal route for
// classical psi against diagonal phi1.
ExtendedReal block_relative_entropy(const StateModel& psi, const DensityOperator& phi1, int n,
                                    Index dim_cap = kDefaultDimCap);

}  // namespace qstein
