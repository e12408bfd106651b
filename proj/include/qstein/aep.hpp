#pragma once

// Relative AEP layer: log-likelihood-ratio sampling for Markov sources,
// per-site weight windows, the separating projector built on the
// maximally abelian refinement, and eigenvalue truncation below it.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "qstein/entropy_types.hpp"
#include "qstein/operators.hpp"
#include "qstein/pinching.hpp"
#include "qstein/states.hpp"

namespace qstein {

struct LLRSample {
  int n = 0;
  std::uint64_t seed = 0;
  std::vector<double> values;  // (1/n) log(P(w) / Q(w)) per trajectory
  std::vector<bool> infinite;  // trajectory visited a state with Q = 0
  ExtendedReal target;         // D_M(P, Q)

  int infinite_count() const;
  // Over finite values only.
  double mean() const;
  double variance() const;  // unbiased
  double standard_error() const;
};

// Trajectory t uses its own generator seeded with derive_seed(seed, t).
LLRSample classical_llr_trajectories(const MarkovLiftModel& chain, std::span<const double> q, int n, int trials,
                                     std::uint64_t seed);

void write_llr_csv(std::ostream& os, const LLRSample& sample);

enum class WindowKind { kRelative, kEntropy };

struct WindowSpec {
  double center = 0.0;
  double half_width = 0.0;
  WindowKind kind = WindowKind::kEntropy;

  bool contains(double statistic) const;
};

struct WindowMembership {
  std::vector<bool> mask;
  double captured_mass = 0.0;
  Index count = 0;
};

// Per-site statistics tested against the open window; `mass` may be empty
// (captured_mass is then 0).
WindowMembership window_membership(std::span<const double> statistics, std::span<const double> mass,
                                   const WindowSpec& spec);

// Atom weights w enter as -log(w) / n.
WindowMembership atom_window_membership(std::span<const double> weights, std::span<const double> mass, int n,
                                        const WindowSpec& spec);

struct SeparatingProjectorReport {
  int n = 0;
  double epsilon = 0.0;
  double s_psi = 0.0;
  double s_rel = 0.0;
  WindowSpec entropy_window;
  WindowSpec relative_window;

  bool classical = false;  // atoms are computational basis vectors
  std::vector<double> atom_psi_weights;
  std::vector<double> atom_phi_weights;
  std::vector<bool> selected;
  std::vector<Index> selected_atoms;
  double psi_mass = 0.0;
  double phi_mass = 0.0;

  std::optional<TypeClassDecomposition> tcd;
  std::optional<AbelianRestriction> restriction;

  Index atom_count() const { return static_cast<Index>(atom_psi_weights.size()); }
  // Dense p_n(eps); refuses beyond `dim_cap`.
  Matrix projector(Index dim_cap = kDefaultDimCap) const;
};

SeparatingProjectorReport build_separating_projector(const StateModel& psi, const StateModel& phi, int n,
                                                     double epsilon, Index dim_cap = kDefaultDimCap);

void write_separating_csv(std::ostream& os, const SeparatingProjectorReport& report);

struct TruncationSplit {
  int n = 0;
  double delta = 0.0;
  double s_psi = 0.0;
  double threshold = 0.0;           // exp(-n (s_psi - delta))
  std::vector<double> eigenvalues;  // of p D p on the range of p
  std::vector<Index> kept;          // lambda <= threshold
  std::vector<Index> discarded;     // lambda > threshold
  double kept_mass = 0.0;
  double discarded_mass = 0.0;
  double count_bound = 0.0;         // exp(n (s_psi - delta))
  bool count_bound_ok = true;       // #discarded < count_bound
};

// Eigenvalues of p D_psi p restricted to the range of p.
TruncationSplit truncate_spectrum(const Matrix& p, const DensityOperator& dpsi_n, int n, double delta, double s_psi);
// Same split when those eigenvalues are already known (commuting case).
TruncationSplit truncate_eigenvalues(std::span<const double> eigenvalues, int n, double delta, double s_psi);
// Truncation of a separating projector, using atom weights directly when
// the report is classical.
TruncationSplit truncate_separating(const SeparatingProjectorReport& report, const StateModel& psi, double delta);

}  // namespace qstein
