// Randomized checks of cross-module invariants. Every instance is seeded.

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "qstein/aep.hpp"
#include "qstein/entropy.hpp"
#include "qstein/ergodic.hpp"
#include "qstein/hypothesis_testing.hpp"
#include "qstein/pinching.hpp"
#include "qstein/random.hpp"

using namespace qstein;

namespace {

const DensityOperator kPhi73 = DensityOperator::diagonal(std::vector<double>{0.7, 0.3});

DensityOperator conjugate(const DensityOperator& rho, const Matrix& u) {
  return DensityOperator(u * rho.matrix() * u.adjoint());
}

DensityOperator random_diagonal(Index dim, Rng& rng) {
  std::vector<double> w(static_cast<std::size_t>(dim));
  double total = 0;
  for (double& x : w) total += (x = rng.uniform() + 1e-3);
  for (double& x : w) x /= total;
  return DensityOperator::diagonal(w);
}

RealMatrix random_chain(Index d, Rng& rng) {
  RealMatrix p(d, d);
  for (Index i = 0; i < d; ++i) {
    double total = 0;
    for (Index j = 0; j < d; ++j) total += (p(i, j) = rng.uniform() + 0.05);
    p.row(i) /= total;
  }
  return p;
}

}  // namespace

TEST(Property, RelativeEntropyNonnegativeAndUnitarilyInvariant) {
  Rng rng(1001);
  for (int t = 0; t < 25; ++t) {
    const Index dim = 2 + t % 5;
    const DensityOperator a = random_density(dim, rng), b = random_density(dim, rng);
    const Matrix u = random_unitary(dim, rng);
    const double s = relative_entropy(a, b).value();
    EXPECT_GE(s, 0.0);
    EXPECT_NEAR(relative_entropy(conjugate(a, u), conjugate(b, u)).value(), s, 1e-9);
  }
}

TEST(Property, PinchingPreservesTraceCommutesAndContracts) {
  Rng rng(1002);
  for (int n = 1; n <= 4; ++n) {
    const TypeClassDecomposition t = build_type_classes(kPhi73, n);
    const DensityOperator phi_n = tensor_power(kPhi73, n);
    for (int trial = 0; trial < 5; ++trial) {
      const DensityOperator psi = random_density(t.dim(), rng);
      const DensityOperator pinched = pinch(psi, t);
      EXPECT_NEAR(pinched.matrix().trace().real(), 1.0, 1e-10);
      EXPECT_LE(max_abs_entry(pinched.matrix() * phi_n.matrix() - phi_n.matrix() * pinched.matrix()), 1e-12);
      const double gap = von_neumann_entropy(pinched) - von_neumann_entropy(psi);
      EXPECT_GE(gap, -1e-10);
      EXPECT_LE(gap, 2 * std::log(n + 1.0) + 1e-10);
      // Data processing under the pinching channel.
      EXPECT_LE(relative_entropy(pinched, phi_n).value(), relative_entropy(psi, phi_n).value() + 1e-9);
    }
  }
}

TEST(Property, HiaiPetzChainOnRandomStates) {
  Rng rng(1003);
  for (int n = 1; n <= 4; ++n)
    for (int trial = 0; trial < 5; ++trial) {
      const HiaiPetzReport r = hiai_petz_audit(random_density(Index{1} << n, rng), kPhi73, n);
      EXPECT_LE(r.residual, 1e-8);
      EXPECT_LE(r.d_term.value(), r.b_term.value() + 1e-9);
      EXPECT_LE(r.b_term.value(), r.lhs.value() + 1e-9);
    }
}

TEST(Property, BetaBracketSanityAndEpsilonMonotonicity) {
  Rng rng(1004);
  for (int t = 0; t < 12; ++t) {
    const Index dim = 2 + t % 4;
    const DensityOperator psi = random_density(dim, rng), phi = random_density(dim, rng);
    double prev = 1.0;
    for (double eps : {0.05, 0.1, 0.2, 0.4, 0.7}) {
      const BetaBracket b = beta_bracket(psi, phi, eps);
      EXPECT_LE(b.beta_lo, b.beta_hi + 1e-12);
      EXPECT_GE((b.witness_vectors.adjoint() * psi.matrix() * b.witness_vectors).trace().real(), 1 - eps - 1e-10);
      EXPECT_LE(-b.beta_lo, weak_converse_bound(psi, phi, eps) + 1e-9);
      EXPECT_LE(b.beta_hi, prev + 1e-10) << "eps " << eps;
      prev = b.beta_hi;
    }
  }
}

TEST(Property, CommutingReductionIsExact) {
  Rng rng(1005);
  for (int t = 0; t < 10; ++t) {
    const Index dim = 2 + t;
    const DensityOperator p = random_diagonal(dim, rng), q = random_diagonal(dim, rng);
    const Matrix u = random_unitary(dim, rng);
    const BetaBracket rotated = beta_bracket(conjugate(p, u), conjugate(q, u), 0.15);
    std::vector<double> pv, qv;
    for (Index i = 0; i < dim; ++i) pv.push_back(p.matrix()(i, i).real()), qv.push_back(q.matrix()(i, i).real());
    const BetaBracket exact = classical_np_exact(pv, qv, 0.15);
    EXPECT_TRUE(rotated.tight);
    EXPECT_NEAR(rotated.beta_hi, exact.beta_hi, 1e-10);
    EXPECT_NEAR(rotated.beta_lo, rotated.beta_hi, 1e-10);
  }
}

TEST(Property, BetaBracketUnitaryCovariance) {
  Rng rng(1006);
  for (int t = 0; t < 8; ++t) {
    const Index dim = 2 + t % 3;
    const DensityOperator psi = random_density(dim, rng), phi = random_density(dim, rng);
    const Matrix u = random_unitary(dim, rng);
    const BetaBracket a = beta_bracket(psi, phi, 0.2);
    const BetaBracket b = beta_bracket(conjugate(psi, u), conjugate(phi, u), 0.2);
    EXPECT_NEAR(a.beta_hi, b.beta_hi, 1e-9);
    EXPECT_NEAR(a.beta_lo, b.beta_lo, 1e-9);
  }
}

TEST(Property, MarkovMeanRelativeEntropyIsSuperadditive) {
  Rng rng(1007);
  for (int t = 0; t < 5; ++t) {
    const StateModel psi = StateModel::markov(random_chain(3, rng));
    const DensityOperator phi1 = random_diagonal(3, rng);
    std::vector<double> s(6);
    for (int n = 1; n <= 5; ++n) s[n] = block_relative_entropy(psi, phi1, n).value();
    for (int m = 1; m <= 4; ++m)
      for (int n = 1; m + n <= 5; ++n) EXPECT_GE(s[m + n], s[m] + s[n] - 1e-9);
    const double rate = rate_report(psi, StateModel::iid(phi1)).mean_relative_entropy.value();
    EXPECT_LE(s[5] / 5, rate + 1e-9);
  }
}

TEST(Property, SeparatingSelectionIsWindowIntersection) {
  Rng rng(1008);
  for (int t = 0; t < 4; ++t) {
    const StateModel psi = StateModel::markov(random_chain(2, rng));
    const StateModel phi = StateModel::iid(random_diagonal(2, rng));
    double prev = 0;
    for (double eps : {0.1, 0.2, 0.4}) {
      const SeparatingProjectorReport r = build_separating_projector(psi, phi, 8, eps);
      const WindowMembership e =
          atom_window_membership(r.atom_psi_weights, r.atom_psi_weights, r.n, r.entropy_window);
      const WindowMembership f =
          atom_window_membership(r.atom_phi_weights, r.atom_psi_weights, r.n, r.relative_window);
      for (std::size_t a = 0; a < r.selected.size(); ++a) EXPECT_EQ(r.selected[a], e.mask[a] && f.mask[a]);
      EXPECT_GE(r.psi_mass, prev - 1e-15);
      prev = r.psi_mass;
    }
  }
}

TEST(Property, TruncationPartitionsSpectrum) {
  Rng rng(1009);
  const StateModel psi = StateModel::rotated_markov(random_chain(2, rng), random_unitary(2, rng));
  const SeparatingProjectorReport r = build_separating_projector(psi, StateModel::iid(kPhi73), 6, 0.3);
  const TruncationSplit t = truncate_separating(r, psi, 0.1);
  EXPECT_EQ(t.kept.size() + t.discarded.size(), t.eigenvalues.size());
  EXPECT_NEAR(t.kept_mass + t.discarded_mass, r.psi_mass, 1e-9);
  EXPECT_TRUE(t.count_bound_ok);
}

TEST(Property, ErgodicDivisibilityAndMixture) {
  RealMatrix p = RealMatrix::Zero(6, 6);
  // Period 3 cycle of pairs with random transitions between consecutive pairs.
  Rng rng(1010);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 2; ++i) {
      const double a = 0.2 + 0.6 * rng.uniform();
      const int next = 2 * ((c + 1) % 3);
      p(2 * c + i, next) = a;
      p(2 * c + i, next + 1) = 1 - a;
    }
  const StateModel m = StateModel::markov(p);
  const StateModel phi = StateModel::iid(DensityOperator::maximally_mixed(6));
  for (int l = 1; l <= 6; ++l) {
    const GlDecomposition d = gl_decompose(m, l);
    EXPECT_TRUE(d.divides());
    EXPECT_EQ(d.k_l, std::gcd(3, l));
    const ComponentAudit a = component_audit(d, phi, l <= 2 ? 2 : 1);
    EXPECT_LE(a.mixture_residual, ComponentAudit::kMixtureTol) << l;
    EXPECT_LE(a.closed_form_entropy_residual, 1e-9) << l;
  }
}
