#include "qstein/states.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include "qstein/entropy.hpp"
#include "qstein/errors.hpp"

namespace qstein {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kStationaryTol = 1e-10;

void validate_stochastic(const RealMatrix& p) {
  if (p.rows() < 1 || p.rows() != p.cols()) throw InvalidArgument("transition matrix must be square and nonempty");
  for (Index i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (Index j = 0; j < p.cols(); ++j) {
      if (!(p(i, j) >= 0.0)) {
        std::ostringstream os;
        os << "transition matrix has negative entry at (" << i << "," << j << ")";
        throw InvalidArgument(os.str());
      }
      sum += p(i, j);
    }
    if (std::abs(sum - 1.0) > kStochasticTol) {
      std::ostringstream os;
      os << "transition matrix row " << i << " sums to " << sum;
      throw InvalidArgument(os.str());
    }
  }
}

std::vector<double> stationary_distribution(const RealMatrix& p) {
  const Index d = p.rows();
  const RealMatrix a = p.transpose() - RealMatrix::Identity(d, d);
  Eigen::FullPivLU<RealMatrix> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() != d - 1)
    throw InvalidArgument("stationary distribution is not unique (reducible chain); supply pi explicitly");
  RealVector v = lu.kernel().col(0);
  v /= v.sum();
  std::vector<double> pi(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) pi[static_cast<std::size_t>(i)] = std::max(0.0, v(i));
  const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
  for (double& x : pi) x /= total;
  return pi;
}

MarkovLiftModel make_chain(RealMatrix transition, std::optional<std::vector<double>> pi) {
  validate_stochastic(transition);
  const Index d = transition.rows();
  std::vector<double> stationary;
  if (pi) {
    if (static_cast<Index>(pi->size()) != d) throw InvalidArgument("pi length does not match transition matrix");
    validate_simplex(*pi, kStochasticTol, "markov pi");
    for (Index j = 0; j < d; ++j) {
      double v = 0.0;
      for (Index i = 0; i < d; ++i) v += (*pi)[static_cast<std::size_t>(i)] * transition(i, j);
      if (std::abs(v - (*pi)[static_cast<std::size_t>(j)]) > kStationaryTol)
        throw InvalidArgument("pi is not stationary for the transition matrix (pi P != pi)");
    }
    stationary = std::move(*pi);
  } else {
    stationary = stationary_distribution(transition);
  }
  return MarkovLiftModel{std::move(stationary), std::move(transition)};
}

}  // namespace

Matrix FinitelyCorrelatedModel::transfer_matrix() const {
  const Index b = kraus.empty() ? 0 : kraus.front().rows();
  Matrix t = Matrix::Zero(b * b, b * b);
  // vec(A X A*) = (conj(A) ⊗ A) vec(X) for column-major vec.
  for (const Matrix& a : kraus) t += kron(a.conjugate(), a);
  return t;
}

StateModel StateModel::iid(DensityOperator rho1) {
  const Index d = rho1.dim();
  return StateModel(IidModel{std::move(rho1)}, d);
}

StateModel StateModel::markov(RealMatrix transition, std::optional<std::vector<double>> pi) {
  MarkovLiftModel chain = make_chain(std::move(transition), std::move(pi));
  const Index d = chain.transition.rows();
  return StateModel(std::move(chain), d);
}

StateModel StateModel::rotated_markov(RealMatrix transition, Matrix unitary,
                                      std::optional<std::vector<double>> pi) {
  MarkovLiftModel chain = make_chain(std::move(transition), std::move(pi));
  const Index d = chain.transition.rows();
  if (unitary.rows() != d || unitary.cols() != d) throw InvalidArgument("rotation must be d x d");
  if (!is_unitary(unitary, 1e-10)) throw InvalidArgument("rotation is not unitary within 1e-10");
  return StateModel(RotatedMarkovLiftModel{std::move(chain), std::move(unitary)}, d);
}

StateModel StateModel::finitely_correlated(std::vector<Matrix> kraus, std::optional<Matrix> fixed_point) {
  if (kraus.empty()) throw InvalidArgument("finitely correlated state needs at least one Kraus operator");
  const Index b = kraus.front().rows();
  Matrix sum = Matrix::Zero(b, b);
  for (const Matrix& a : kraus) {
    if (a.rows() != b || a.cols() != b) throw InvalidArgument("Kraus operators must all be bond_dim x bond_dim");
    sum += a.adjoint() * a;
  }
  if (max_abs_entry(sum - Matrix::Identity(b, b)) > 1e-10)
    throw InvalidArgument("transfer map is not trace preserving (sum A* A != 1 within 1e-10)");

  FinitelyCorrelatedModel model{std::move(kraus), Matrix()};
  const Matrix t = model.transfer_matrix();
  Eigen::ComplexEigenSolver<Matrix> solver(t);
  const auto& ev = solver.eigenvalues();
  const double radius = ev.cwiseAbs().maxCoeff();
  if (std::abs(radius - 1.0) > 1e-10) throw InvalidArgument("transfer map spectral radius is not 1");

  if (fixed_point) {
    if (fixed_point->rows() != b || fixed_point->cols() != b) throw InvalidArgument("fixed point must be bond_dim x bond_dim");
    model.fixed_point = *fixed_point;
  } else {
    int ones = 0;
    Index best = 0;
    for (Index k = 0; k < ev.size(); ++k)
      if (std::abs(ev(k) - Complex(1.0, 0.0)) < 1e-9) {
        ++ones;
        best = k;
      }
    if (ones != 1) throw InvalidArgument("transfer map fixed point is not unique; supply it explicitly");
    const ComplexVector v = solver.eigenvectors().col(best);
    Matrix x = Eigen::Map<const Matrix>(v.data(), b, b);
    x /= x.trace();
    model.fixed_point = (x + x.adjoint()) * 0.5;
  }
  // Validates positivity and unit trace.
  const DensityOperator check(model.fixed_point, 1e-9);
  Matrix image = Matrix::Zero(b, b);
  for (const Matrix& a : model.kraus) image += a * model.fixed_point * a.adjoint();
  if (max_abs_entry(image - model.fixed_point) > 1e-9) throw InvalidArgument("fixed point is not invariant under the transfer map");

  const Index d = static_cast<Index>(model.kraus.size());
  return StateModel(std::move(model), d);
}

StateModel StateModel::random_finitely_correlated(Index site_dim, Index bond_dim, Rng& rng) {
  const Matrix g = random_ginibre(site_dim * bond_dim, bond_dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix v = qr.householderQ() * Matrix::Identity(site_dim * bond_dim, bond_dim);
  std::vector<Matrix> kraus;
  for (Index x = 0; x < site_dim; ++x) kraus.emplace_back(v.middleRows(x * bond_dim, bond_dim));
  return finitely_correlated(std::move(kraus));
}

const IidModel& StateModel::as_iid() const { return std::get<IidModel>(variant_); }
const MarkovLiftModel& StateModel::as_markov() const { return std::get<MarkovLiftModel>(variant_); }
const RotatedMarkovLiftModel& StateModel::as_rotated_markov() const {
  return std::get<RotatedMarkovLiftModel>(variant_);
}
const FinitelyCorrelatedModel& StateModel::as_finitely_correlated() const {
  return std::get<FinitelyCorrelatedModel>(variant_);
}

const MarkovLiftModel* StateModel::chain() const {
  if (is_markov()) return &as_markov();
  if (is_rotated_markov()) return &as_rotated_markov().chain;
  return nullptr;
}

bool StateModel::is_classical() const {
  if (is_markov()) return true;
  if (is_iid()) return as_iid().rho1.is_diagonal();
  return false;
}

const char* StateModel::variant_name() const {
  switch (variant_.index()) {
    case 0: return "iid";
    case 1: return "markov";
    case 2: return "rotated-markov";
    default: return "fcs";
  }
}

// ---------------------------------------------------------------------------
// Blocks

RealVector markov_block_probabilities(std::span<const double> start, const RealMatrix& transition, int n) {
  if (n < 1) throw InvalidArgument("block length must be >= 1");
  const Index d = transition.rows();
  RealVector probs(d);
  for (Index i = 0; i < d; ++i) probs(i) = start[static_cast<std::size_t>(i)];
  for (int k = 1; k < n; ++k) {
    RealVector next(probs.size() * d);
    for (Index idx = 0; idx < probs.size(); ++idx) {
      const Index last = idx % d;
      for (Index x = 0; x < d; ++x) next(idx * d + x) = probs(idx) * transition(last, x);
    }
    probs = std::move(next);
  }
  return probs;
}

RealVector classical_block(const StateModel& model, int n, Index length_cap) {
  checked_power_dim(model.site_dim(), n, length_cap);
  if (model.is_markov()) {
    const auto& c = model.as_markov();
    return markov_block_probabilities(c.pi, c.transition, n);
  }
  if (model.is_iid() && model.as_iid().rho1.is_diagonal()) {
    const RealVector q = model.as_iid().rho1.diagonal_entries();
    std::vector<double> site(q.data(), q.data() + q.size());
    const RealMatrix rows = RealVector::Ones(q.size()) * q.transpose();
    return markov_block_probabilities(site, rows, n);
  }
  throw InvalidArgument("classical_block: model blocks are not diagonal");
}

namespace {

Matrix diagonal_matrix(const RealVector& v) {
  Matrix m = Matrix::Zero(v.size(), v.size());
  for (Index i = 0; i < v.size(); ++i) m(i, i) = v(i);
  return m;
}

Matrix fcs_block(const FinitelyCorrelatedModel& fcs, int n) {
  const Index b = fcs.bond_dim();
  const Index d = static_cast<Index>(fcs.kraus.size());
  // Rows of `x` are vec(A_{in} ... A_{i1} rho^{1/2}); the block is X X*.
  const EigenSystem es = EigenSystem::of(fcs.fixed_point);
  const Matrix root = es.apply([](double v) { return std::sqrt(std::max(v, 0.0)); });
  std::vector<Matrix> words{root};
  for (int k = 0; k < n; ++k) {
    std::vector<Matrix> next;
    next.reserve(words.size() * static_cast<std::size_t>(d));
    for (const Matrix& w : words)
      for (Index x = 0; x < d; ++x) next.push_back(fcs.kraus[static_cast<std::size_t>(x)] * w);
    words = std::move(next);
  }
  Matrix x(static_cast<Index>(words.size()), b * b);
  for (std::size_t i = 0; i < words.size(); ++i)
    x.row(static_cast<Index>(i)) = Eigen::Map<const ComplexVector>(words[i].data(), b * b).transpose();
  return x * x.adjoint();
}

}  // namespace

DensityOperator block_density(const StateModel& model, int n, Index dim_cap) {
  if (n < 1) throw InvalidArgument("block_density: n must be >= 1");
  checked_power_dim(model.site_dim(), n, dim_cap);
  return std::visit(
      [&](const auto& m) -> DensityOperator {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IidModel>) {
          return tensor_power(m.rho1, n, dim_cap);
        } else if constexpr (std::is_same_v<T, MarkovLiftModel>) {
          return DensityOperator(diagonal_matrix(markov_block_probabilities(m.pi, m.transition, n)));
        } else if constexpr (std::is_same_v<T, RotatedMarkovLiftModel>) {
          const Matrix base = diagonal_matrix(markov_block_probabilities(m.chain.pi, m.chain.transition, n));
          return DensityOperator(conjugate_by_site_unitary(base, m.unitary, n));
        } else {
          return DensityOperator(fcs_block(m, n), 1e-9);
        }
      },
      model.variant());
}

DensityOperator site_marginal(const StateModel& model) { return block_density(model, 1); }

// ---------------------------------------------------------------------------
// Rates

double markov_entropy_rate(const MarkovLiftModel& chain) {
  double h = 0.0;
  for (Index i = 0; i < chain.transition.rows(); ++i) {
    double row = 0.0;
    for (Index j = 0; j < chain.transition.cols(); ++j) {
      const double p = chain.transition(i, j);
      if (p > 0.0) row -= p * std::log(p);
    }
    h += chain.pi[static_cast<std::size_t>(i)] * row;
  }
  return h;
}

ExtendedReal markov_relative_entropy_rate(const MarkovLiftModel& chain, std::span<const double> q) {
  double d = 0.0;
  for (Index i = 0; i < chain.transition.rows(); ++i) {
    const double w = chain.pi[static_cast<std::size_t>(i)];
    if (w <= 0.0) continue;
    for (Index j = 0; j < chain.transition.cols(); ++j) {
      const double p = chain.transition(i, j);
      if (p <= 0.0) continue;
      if (q[static_cast<std::size_t>(j)] <= 0.0) return ExtendedReal::infinity();
      d += w * p * std::log(p / q[static_cast<std::size_t>(j)]);
    }
  }
  return ExtendedReal::finite(d);
}

RateReport rate_report(const StateModel& psi, const StateModel& phi, int extrapolation_n_max) {
  if (!phi.is_iid()) throw InvalidArgument("rate_report: phi must be an i.i.d. model");
  if (phi.site_dim() != psi.site_dim()) throw InvalidArgument("rate_report: site dimension mismatch");
  const DensityOperator& phi1 = phi.as_iid().rho1;
  const DensityOperator psi1 = site_marginal(psi);

  RateReport report;
  // On supp(phi1)^{⊗n} the cross term is additive; outside it the
  // relative entropy is infinite already at n = 1.
  const ExtendedReal one_site = relative_entropy(psi1, phi1);
  const Matrix log_phi = log_on_support(phi1.op()).matrix();
  report.cross_term = (psi1.matrix() * log_phi).trace().real();

  if (const MarkovLiftModel* c = psi.chain()) {
    report.mean_entropy = markov_entropy_rate(*c);
  } else if (psi.is_iid()) {
    report.mean_entropy = von_neumann_entropy(psi.as_iid().rho1);
  } else {
    int n_max = extrapolation_n_max;
    if (n_max <= 0) {
      n_max = 1;
      while (true) {
        try {
          checked_power_dim(psi.site_dim(), n_max + 1, 512);
        } catch (const DimensionCapExceeded&) {
          break;
        }
        ++n_max;
      }
    }
    // Conditional entropies S(n) - S(n-1) decrease to s(psi).
    const double s_n = von_neumann_entropy(block_density(psi, n_max));
    const double s_prev = n_max > 1 ? von_neumann_entropy(block_density(psi, n_max - 1)) : 0.0;
    report.mean_entropy = s_n - s_prev;
    report.method = RateMethod::kFiniteNExtrapolation;
    report.extrapolation_n = n_max;
  }

  if (one_site.is_infinite()) {
    report.mean_relative_entropy = ExtendedReal::infinity();
  } else {
    report.mean_relative_entropy = ExtendedReal::finite(-report.mean_entropy - report.cross_term);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Ergodicity

int chain_period(const RealMatrix& transition, std::span<const Index> states) {
  if (states.empty()) return 0;
  const Index d = transition.rows();
  std::vector<bool> in_set(static_cast<std::size_t>(d), false);
  for (Index s : states) in_set[static_cast<std::size_t>(s)] = true;

  auto reach = [&](bool forward) {
    std::vector<int> level(static_cast<std::size_t>(d), -1);
    std::queue<Index> q;
    level[static_cast<std::size_t>(states[0])] = 0;
    q.push(states[0]);
    while (!q.empty()) {
      const Index u = q.front();
      q.pop();
      for (Index v = 0; v < d; ++v) {
        if (!in_set[static_cast<std::size_t>(v)]) continue;
        const double w = forward ? transition(u, v) : transition(v, u);
        if (w > 0.0 && level[static_cast<std::size_t>(v)] < 0) {
          level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
          q.push(v);
        }
      }
    }
    return level;
  };
  const std::vector<int> fwd = reach(true);
  const std::vector<int> bwd = reach(false);
  for (Index s : states)
    if (fwd[static_cast<std::size_t>(s)] < 0 || bwd[static_cast<std::size_t>(s)] < 0) return 0;

  int period = 0;
  for (Index u : states)
    for (Index v : states)
      if (transition(u, v) > 0.0)
        period = std::gcd(period, std::abs(fwd[static_cast<std::size_t>(u)] + 1 - fwd[static_cast<std::size_t>(v)]));
  return period;
}

ErgodicityVerdict check_chain_ergodicity(const MarkovLiftModel& chain) {
  std::vector<Index> support;
  for (std::size_t i = 0; i < chain.pi.size(); ++i)
    if (chain.pi[i] > 0.0) support.push_back(static_cast<Index>(i));
  const int period = chain_period(chain.transition, support);
  if (period == 0) return {ErgodicityKind::kReducible, 0};
  if (period == 1) return {ErgodicityKind::kErgodic, 1};
  return {ErgodicityKind::kPeriodic, period};
}

ErgodicityVerdict check_ergodicity(const StateModel& model) {
  if (model.is_iid()) return {ErgodicityKind::kErgodic, 1};
  if (const MarkovLiftModel* c = model.chain()) return check_chain_ergodicity(*c);
  // Primitive transfer map: a single eigenvalue of modulus one.
  const Matrix t = model.as_finitely_correlated().transfer_matrix();
  Eigen::ComplexEigenSolver<Matrix> solver(t, false);
  int peripheral = 0;
  for (Index k = 0; k < solver.eigenvalues().size(); ++k)
    if (std::abs(solver.eigenvalues()(k)) > 1.0 - 1e-9) ++peripheral;
  if (peripheral == 1) return {ErgodicityKind::kErgodic, 1};
  return {ErgodicityKind::kUndetermined, 0};
}

}  // namespace qstein
