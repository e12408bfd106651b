#pragma once

// G_l-ergodic decomposition of (rotated) Markov lifts through the cyclic
// classes of the chain, and audits of the component entropy rates.

#include <optional>
#include <ostream>
#include <vector>

#include "qstein/entropy_types.hpp"
#include "qstein/operators.hpp"
#include "qstein/states.hpp"

namespace qstein {

struct GlDecomposition {
  int l = 1;
  int period = 1;
  int k_l = 1;
  int k_reachability = 1;  // strongly connected classes of the P^l graph on supp(pi)
  MarkovLiftModel chain;
  std::optional<Matrix> unitary;

  std::vector<std::vector<Index>> cyclic_classes;  // C_0 -> C_1 -> ... -> C_{period-1}
  std::vector<std::vector<Index>> merged_classes;  // M_x = union of C_r with r = x mod k_l
  std::vector<std::vector<double>> starts;         // pi restricted to M_x, normalized
  std::vector<double> weights;                     // 1 / k_l each

  bool divides() const { return l % k_l == 0; }
  Index site_dim() const { return chain.transition.rows(); }
};

GlDecomposition gl_decompose(const StateModel& model, int l);

// Probabilities of the first n sites of component x.
RealVector component_block(const GlDecomposition& dec, int x, int n);
DensityOperator component_block_density(const GlDecomposition& dec, int x, int n,
                                        Index dim_cap = kDefaultDimCap);

struct ComponentRow {
  int component = 0;
  int n = 0;                 // number of l-blocks
  double entropy_rate = 0.0; // S(first l*n sites) / n
  ExtendedReal rel_entropy_rate;
};

struct LevelSetRow {
  double eta = 0.0;
  int count = 0;         // components with s_x^(l) < s - eta
  double fraction = 0.0; // count / k_l
};

struct ComponentAudit {
  int l = 1;
  int k_l = 1;
  bool divides = true;
  bool reachability_agrees = true;
  std::vector<ComponentRow> rows;
  std::vector<double> entropy_spread;  // per n: max pairwise deviation across components
  std::vector<double> rel_spread;

  // Limits per l-block from the component start distributions.
  std::vector<double> closed_form_entropy;
  std::vector<ExtendedReal> closed_form_rel;
  double closed_form_entropy_spread = 0.0;
  double closed_form_rel_spread = 0.0;
  double closed_form_entropy_residual = 0.0;  // max_x |h_x - l s(psi)|
  double closed_form_rel_residual = 0.0;      // max_x |r_x - l s(psi, phi)|

  double mixture_residual = 0.0;    // n <= 6
  double translate_residual = 0.0;  // n <= 6

  double s_psi = 0.0;
  ExtendedReal s_rel;
  std::optional<double> blocked_rel_rate;  // s(psi, phi, G_l) from the chain on l-tuples
  double scaling_residual = 0.0;           // |blocked_rel_rate - l s(psi, phi)|

  std::vector<LevelSetRow> level_sets;

  static constexpr double kTol = 1e-9;
  static constexpr double kMixtureTol = 1e-10;
  bool passed() const;
};

// `phi` must be i.i.d.; relative entropies are classical when the lift is
// unrotated and phi1 is diagonal, dense otherwise.
ComponentAudit component_audit(const GlDecomposition& dec, const StateModel& phi, int n_max,
                               const std::vector<double>& etas = {0.05, 0.1, 0.2});

void write_component_csv(std::ostream& os, const ComponentAudit& audit);

}  // namespace qstein
