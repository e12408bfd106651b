#pragma once

// Stationary states on the one-dimensional quasilocal algebra. Each model
// materializes its finite-block densities on the interval {0, ..., n-1}
// and, where available, closed-form entropy rates.

#include <optional>
#include <variant>
#include <vector>

#include "qstein/entropy_types.hpp"
#include "qstein/operators.hpp"
#include "qstein/random.hpp"

namespace qstein {

using RealMatrix = Eigen::MatrixXd;

struct IidModel {
  DensityOperator rho1;
};

struct MarkovLiftModel {
  std::vector<double> pi;  // stationary distribution
  RealMatrix transition;   // row-stochastic
};

struct RotatedMarkovLiftModel {
  MarkovLiftModel chain;
  Matrix unitary;  // site rotation U; block is U^{⊗n} D U^{*⊗n}
};

// Translation-invariant finitely correlated state with Kraus operators
// A_x (bond_dim x bond_dim, one per site basis state) and fixed point rho
// of the channel X -> sum_x A_x X A_x*.
struct FinitelyCorrelatedModel {
  std::vector<Matrix> kraus;
  Matrix fixed_point;

  Index bond_dim() const { return kraus.empty() ? 0 : kraus.front().rows(); }
  // Matrix of X -> sum_x A_x X A_x* acting on column-major vec(X).
  Matrix transfer_matrix() const;
};

class StateModel {
 public:
  using Variant = std::variant<IidModel, MarkovLiftModel, RotatedMarkovLiftModel, FinitelyCorrelatedModel>;

  static StateModel iid(DensityOperator rho1);
  // Computes the stationary distribution when `pi` is absent; chains whose
  // stationary distribution is not unique are rejected in that case.
  static StateModel markov(RealMatrix transition, std::optional<std::vector<double>> pi = std::nullopt);
  static StateModel rotated_markov(RealMatrix transition, Matrix unitary,
                                   std::optional<std::vector<double>> pi = std::nullopt);
  static StateModel finitely_correlated(std::vector<Matrix> kraus,
                                        std::optional<Matrix> fixed_point = std::nullopt);
  // Kraus operators cut from a Haar-random isometry C^b -> C^d ⊗ C^b.
  static StateModel random_finitely_correlated(Index site_dim, Index bond_dim, Rng& rng);

  Index site_dim() const { return site_dim_; }
  const Variant& variant() const { return variant_; }

  bool is_iid() const { return std::holds_alternative<IidModel>(variant_); }
  bool is_markov() const { return std::holds_alternative<MarkovLiftModel>(variant_); }
  bool is_rotated_markov() const { return std::holds_alternative<RotatedMarkovLiftModel>(variant_); }
  bool is_finitely_correlated() const { return std::holds_alternative<FinitelyCorrelatedModel>(variant_); }

  const IidModel& as_iid() const;
  const MarkovLiftModel& as_markov() const;
  const RotatedMarkovLiftModel& as_rotated_markov() const;
  const FinitelyCorrelatedModel& as_finitely_correlated() const;

  // The Markov chain underlying a (rotated) Markov lift.
  const MarkovLiftModel* chain() const;

  // True when every block is diagonal in the computational basis.
  bool is_classical() const;

  const char* variant_name() const;

 private:
  StateModel(Variant v, Index d) : variant_(std::move(v)), site_dim_(d) {}

  Variant variant_;
  Index site_dim_;
};

// Probabilities pi_{x1} P_{x1 x2} ... P_{x_{n-1} x_n}, first site most
// significant in the flattened index.
RealVector markov_block_probabilities(std::span<const double> start, const RealMatrix& transition, int n);

// Diagonal of a classical block, without forming the dense matrix.
// Throws for non-classical models. The cap applies to the vector length.
RealVector classical_block(const StateModel& model, int n, Index length_cap = Index{1} << 22);

DensityOperator block_density(const StateModel& model, int n, Index dim_cap = kDefaultDimCap);

// Single-site marginal.
DensityOperator site_marginal(const StateModel& model);

enum class RateMethod { kClosedForm, kFiniteNExtrapolation };

struct RateReport {
  double mean_entropy = 0.0;      // s(psi), nats per site
  double cross_term = 0.0;        // tr(D_psi(1) log D_phi(1))
  ExtendedReal mean_relative_entropy;
  RateMethod method = RateMethod::kClosedForm;
  int extrapolation_n = 0;        // largest block used, finite-n method only
};

// `phi` must be an i.i.d. model. Finitely correlated psi uses block
// entropies up to `extrapolation_n_max` sites (0 picks the largest n with
// d^n <= 512).
RateReport rate_report(const StateModel& psi, const StateModel& phi, int extrapolation_n_max = 0);

// Shannon entropy rate sum_i pi_i sum_j -P_ij log P_ij.
double markov_entropy_rate(const MarkovLiftModel& chain);
// sum_i pi_i sum_j P_ij log(P_ij / q_j); +infinity when P_ij > 0 = q_j.
ExtendedReal markov_relative_entropy_rate(const MarkovLiftModel& chain, std::span<const double> q);

enum class ErgodicityKind { kErgodic, kPeriodic, kReducible, kUndetermined };

struct ErgodicityVerdict {
  ErgodicityKind kind = ErgodicityKind::kUndetermined;
  int period = 1;
};

// Chain structure is read on the support of the stationary distribution.
ErgodicityVerdict check_ergodicity(const StateModel& model);
ErgodicityVerdict check_chain_ergodicity(const MarkovLiftModel& chain);

// Period of the irreducible chain restricted to `states`, or 0 when not
// irreducible there.
int chain_period(const RealMatrix& transition, std::span<const Index> states);

}  // namespace qstein
