#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "qstein/entropy.hpp"
#include "qstein/errors.hpp"
#include "qstein/hypothesis_testing.hpp"
#include "qstein/random.hpp"

using namespace qstein;

namespace {

DensityOperator diag(std::vector<double> v) { return DensityOperator::diagonal(v); }

std::vector<double> random_simplex(std::size_t size, Rng& rng) {
  std::vector<double> v(size);
  double total = 0;
  for (double& x : v) total += (x = -std::log(rng.uniform() + 1e-300));
  for (double& x : v) x /= total;
  return v;
}

double witness_psi_mass(const BetaBracket& b, const Matrix& psi) {
  return (b.witness_vectors.adjoint() * psi * b.witness_vectors).trace().real();
}

}  // namespace

TEST(NpSpectralCurve, EqualStates) {
  const DensityOperator rho = diag({0.6, 0.4});
  const std::vector<double> lambdas{0.5, 2.0};
  const auto pts = np_spectral_curve(rho, rho, lambdas);
  EXPECT_NEAR(pts[0].type1, 1.0, 1e-15);
  EXPECT_NEAR(pts[0].type2, 0.0, 1e-15);
  EXPECT_NEAR(pts[1].type1, 0.0, 1e-15);
  EXPECT_NEAR(pts[1].type2, 1.0, 1e-15);
}

TEST(NpSpectralCurve, CommutingAtLambdaOne) {
  const std::vector<double> lambdas{1.0};
  const auto pts = np_spectral_curve(diag({0.9, 0.1}), DensityOperator::maximally_mixed(2), lambdas);
  EXPECT_NEAR(pts[0].type1, 0.1, 1e-14);
  EXPECT_NEAR(pts[0].type2, 0.5, 1e-14);
  EXPECT_EQ(pts[0].rank, 1);
}

TEST(NpSpectralCurve, LargeLambdaApproachesSupport) {
  Rng rng(3);
  const std::vector<double> lambdas{1e8};
  const auto pts = np_spectral_curve(random_density(3, rng), random_density(3, rng), lambdas);
  EXPECT_LE(pts[0].type1, 1e-6);
  for (const auto& p : pts) {
    EXPECT_GE(p.type1, 0.0);
    EXPECT_LE(p.type2, 1.0);
  }
}

TEST(ClassicalNpExact, Examples) {
  const std::vector<double> p{0.9, 0.1}, q{0.5, 0.5};
  const BetaBracket a = classical_np_exact(p, q, 0.15);
  EXPECT_NEAR(a.beta_hi, std::log(0.5), 1e-15);
  EXPECT_EQ(a.witness_outcomes, std::vector<Index>{0});
  EXPECT_TRUE(a.tight);
  EXPECT_EQ(a.beta_lo, a.beta_hi);
  const BetaBracket b = classical_np_exact(p, q, 0.05);
  EXPECT_NEAR(b.beta_hi, 0.0, 1e-15);
  EXPECT_EQ(b.witness_outcomes.size(), 2u);
  const std::vector<double> same{0.3, 0.3, 0.4};
  const BetaBracket c = classical_np_exact(same, same, 0.2);
  EXPECT_GE(c.beta_hi, std::log(0.8) - 1e-15);
}

TEST(ClassicalNpExact, RejectsBadEpsilonAndNonSimplex) {
  const std::vector<double> p{0.9, 0.1}, q{0.5, 0.5}, bad{0.5, 0.6};
  EXPECT_THROW(classical_np_exact(p, q, 0.0), InvalidArgument);
  EXPECT_THROW(classical_np_exact(p, q, 1.0), InvalidArgument);
  EXPECT_THROW(classical_np_exact(bad, q, 0.1), InvalidArgument);
}

TEST(ClassicalNpExact, MatchesEnumerationOracle) {
  Rng rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t size = 2 + static_cast<std::size_t>(rng.uniform() * 13);
    const std::vector<double> p = random_simplex(size, rng), q = random_simplex(size, rng);
    const double eps = 0.02 + 0.9 * rng.uniform();
    const BetaBracket b = classical_np_exact(p, q, eps);
    EXPECT_NEAR(std::exp(b.beta_hi), oracle::subset_min(p, q, eps), 1e-12) << "trial " << trial;
    double pm = 0, qm = 0;
    for (Index i : b.witness_outcomes) pm += p[static_cast<std::size_t>(i)], qm += q[static_cast<std::size_t>(i)];
    EXPECT_GE(pm, 1 - eps - 1e-10);
    EXPECT_NEAR(std::log(qm), b.beta_hi, 1e-10);
  }
}

TEST(SubsetSelection, BranchAndBoundMatchesOracleOnExpandedClasses) {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<OutcomeClass> classes;
    std::vector<double> p, q;
    const int kinds = 2 + static_cast<int>(rng.uniform() * 4);
    std::vector<double> wp(kinds), wq(kinds);
    std::vector<Index> counts(kinds);
    double tp = 0, tq = 0;
    for (int k = 0; k < kinds; ++k) {
      counts[k] = 1 + static_cast<Index>(rng.uniform() * 4);
      wp[k] = rng.uniform() + 0.05;
      wq[k] = rng.uniform() + 0.05;
      tp += wp[k] * counts[k];
      tq += wq[k] * counts[k];
    }
    for (int k = 0; k < kinds; ++k) {
      classes.push_back({wp[k] / tp, wq[k] / tq, counts[k]});
      for (Index c = 0; c < counts[k]; ++c) p.push_back(wp[k] / tp), q.push_back(wq[k] / tq);
    }
    const double eps = 0.05 + 0.8 * rng.uniform();
    const SubsetSolution s = solve_subset_selection(classes, eps);
    EXPECT_NEAR(s.q_mass, oracle::subset_min(p, q, eps), 1e-12) << "trial " << trial;
    EXPECT_GE(s.p_mass, 1 - eps - 1e-10);
  }
}

TEST(SubsetSelection, GreedyIsNotAlwaysOptimal) {
  // Ratio order takes item 0 first and then needs item 1 too; item 2 alone suffices.
  const std::vector<OutcomeClass> classes{{0.3, 0.1, 1}, {0.3, 0.4, 1}, {0.4, 0.5, 1}};
  const SubsetSolution s = solve_subset_selection(classes, 0.35);
  const std::vector<double> p{0.3, 0.3, 0.4}, q{0.1, 0.4, 0.5};
  EXPECT_NEAR(s.q_mass, oracle::subset_min(p, q, 0.35), 1e-15);
}

TEST(SubsetSelection, NodeBudgetIsEnforced) {
  Rng rng(1);
  std::vector<OutcomeClass> classes;
  const std::vector<double> p = random_simplex(40, rng), q = random_simplex(40, rng);
  for (std::size_t i = 0; i < p.size(); ++i) classes.push_back({p[i], q[i], 1});
  EXPECT_THROW(solve_subset_selection(classes, 0.5, 3), NumericalError);
}

TEST(BetaBracket, PureEqualStatesCollapseToZero) {
  ComplexVector v(2);
  v << 0.6, Complex(0.0, 0.8);
  const DensityOperator psi = DensityOperator::pure(v);
  const BetaBracket b = beta_bracket(psi, psi, 0.2);
  EXPECT_NEAR(b.beta_hi, 0.0, 1e-10);
  EXPECT_NEAR(b.beta_lo, 0.0, 1e-10);
}

TEST(BetaBracket, CommutingIidMatchesClassical) {
  const std::vector<double> p1{0.9, 0.1};
  for (int n = 1; n <= 8; ++n) {
    const DensityOperator psi = tensor_power(diag(p1), n);
    const DensityOperator phi = tensor_power(DensityOperator::maximally_mixed(2), n);
    const BetaBracket b = beta_bracket(psi, phi, 0.1);
    std::vector<double> p, q;
    for (Index i = 0; i < psi.dim(); ++i) p.push_back(psi.matrix()(i, i).real()), q.push_back(phi.matrix()(i, i).real());
    EXPECT_TRUE(b.tight);
    EXPECT_EQ(b.beta_lo, b.beta_hi);
    EXPECT_NEAR(b.beta_hi, classical_np_exact(p, q, 0.1).beta_hi, 1e-12) << n;
  }
}

TEST(BetaBracket, RotatedQubitMatchesBlochScan) {
  Rng rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    const DensityOperator psi = random_density(2, rng), phi = random_density(2, rng);
    const BetaBracket b = beta_bracket(psi, phi, 0.15);
    const double scan = std::log(oracle::bloch_scan_min(psi.matrix(), phi.matrix(), 0.15, 10000));
    EXPECT_NEAR(b.beta_hi, scan, 1e-3) << trial;
    EXPECT_LE(b.beta_lo, b.beta_hi + 1e-12);
  }
}

TEST(BetaBracket, HadamardExampleAgainstScan) {
  Matrix h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  const DensityOperator psi(h * diag({0.9, 0.1}).matrix() * h.adjoint());
  const DensityOperator phi = diag({0.7, 0.3});
  const BetaBracket b = beta_bracket(psi, phi, 0.15);
  EXPECT_NEAR(b.beta_hi, std::log(oracle::bloch_scan_min(psi.matrix(), phi.matrix(), 0.15, 10000)), 1e-3);
}

TEST(BetaBracket, WitnessIsFeasibleAndAttainsUpperEnd) {
  Rng rng(19);
  for (Index dim : {2, 3, 4, 8}) {
    const DensityOperator psi = random_density(dim, rng), phi = random_density(dim, rng);
    for (double eps : {0.05, 0.2, 0.5}) {
      const BetaBracket b = beta_bracket(psi, phi, eps);
      EXPECT_LE(b.beta_lo, b.beta_hi + 1e-12);
      EXPECT_GE(witness_psi_mass(b, psi.matrix()), 1 - eps - 1e-10);
      const double phi_mass = (b.witness_vectors.adjoint() * phi.matrix() * b.witness_vectors).trace().real();
      EXPECT_NEAR(std::log(phi_mass), b.beta_hi, 1e-10);
      EXPECT_LE(b.beta_hi, 1e-12);
    }
  }
}

TEST(WeakConverse, Examples) {
  Rng rng(2);
  const DensityOperator rho = random_density(3, rng);
  EXPECT_NEAR(weak_converse_bound(rho, rho, 0.2), std::log(2.0) / 0.8, 1e-9);
  const DensityOperator psi6 = tensor_power(diag({0.9, 0.1}), 6);
  const DensityOperator phi6 = tensor_power(DensityOperator::maximally_mixed(2), 6);
  const double bound = weak_converse_bound(psi6, phi6, 0.1);
  EXPECT_NEAR(bound, (6 * 0.368064 + std::log(2.0)) / 0.9, 1e-5);
  EXPECT_NEAR(bound, 3.224, 1e-3);
  EXPECT_LE(-beta_bracket(psi6, phi6, 0.1).beta_hi, bound);
  EXPECT_TRUE(std::isinf(weak_converse_bound(diag({0.5, 0.5}), diag({1.0, 0.0}), 0.1)));
}

TEST(WeakConverse, MarkovLiftSixSites) {
  RealMatrix p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  const StateModel m = StateModel::markov(p);
  const DensityOperator psi = block_density(m, 6);
  const DensityOperator phi = tensor_power(DensityOperator::maximally_mixed(2), 6);
  const BetaBracket b = beta_bracket(psi, phi, 0.1);
  EXPECT_LE(-b.beta_lo, weak_converse_bound(psi, phi, 0.1) + 1e-9);
}

TEST(SteinScan, EqualStatesVanishPerSite) {
  // With psi = phi the optimum is the smallest mass reaching 1 - eps, so
  // beta lies in [log(1 - eps), 0] and beta / n -> 0.
  const StateModel s = StateModel::iid(diag({0.3, 0.7}));
  const auto rows = stein_scan(s, s, 0.1, 8);
  for (const SteinRow& r : rows) {
    EXPECT_LE(r.beta_hi_per_n, 0.0);
    EXPECT_GE(r.beta_hi_per_n, std::log(0.9) / r.n - 1e-12);
    EXPECT_NEAR(r.s_target, 0.0, 1e-12);
    EXPECT_TRUE(r.converse_ok);
  }
}

TEST(SteinScan, IidTypeAggregationMatchesDense) {
  const StateModel psi = StateModel::iid(diag({0.9, 0.1}));
  const StateModel phi = StateModel::iid(DensityOperator::maximally_mixed(2));
  const auto rows = stein_scan(psi, phi, 0.1, 10);
  ASSERT_EQ(rows.size(), 10u);
  for (const SteinRow& r : rows) {
    // phi is uniform, so the optimum is the fewest sequences reaching 1 - eps:
    // take them in decreasing psi-probability, i.e. by number of ones.
    double mass = 0, count = 0;
    for (int ones = 0; ones <= r.n && mass < 0.9 - 1e-12; ++ones) {
      const double w = std::pow(0.9, r.n - ones) * std::pow(0.1, ones);
      const double c = oracle::binomial(r.n, ones);
      const double used = std::min(c, std::ceil((0.9 - mass) / w - 1e-9));
      mass += used * w;
      count += used;
    }
    EXPECT_NEAR(r.beta_hi_per_n * r.n, std::log(count * std::ldexp(1.0, -r.n)), 1e-9) << r.n;
    EXPECT_TRUE(r.converse_ok);
    EXPECT_TRUE(r.tight);
  }
}

TEST(SteinScan, MarkovRowsSatisfyConverse) {
  RealMatrix p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  const auto rows = stein_scan(StateModel::markov(p), StateModel::iid(DensityOperator::maximally_mixed(2)), 0.1, 8);
  for (const SteinRow& r : rows) {
    EXPECT_TRUE(r.converse_ok) << r.n;
    EXPECT_NEAR(r.s_target, 0.309624, 1e-6);
  }
}

TEST(SteinScan, RotatedRowsAreBrackets) {
  RealMatrix p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  Matrix h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  const auto rows = stein_scan(StateModel::rotated_markov(p, h), StateModel::iid(diag({0.7, 0.3})), 0.2, 4,
                               {.lambda_grid_size = 60});
  for (const SteinRow& r : rows) {
    EXPECT_LE(r.beta_lo_per_n, r.beta_hi_per_n + 1e-12);
    EXPECT_TRUE(r.converse_ok);
  }
}

TEST(SteinScan, RejectsNonIidReference) {
  RealMatrix p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  const StateModel m = StateModel::markov(p);
  EXPECT_THROW(stein_scan(m, m, 0.1, 3), InvalidArgument);
}
