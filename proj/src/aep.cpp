#include "qstein/aep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qstein/csv.hpp"
#include "qstein/entropy.hpp"
#include "qstein/errors.hpp"
#include "qstein/random.hpp"

namespace qstein {

int LLRSample::infinite_count() const {
  return static_cast<int>(std::count(infinite.begin(), infinite.end(), true));
}

double LLRSample::mean() const {
  double sum = 0.0;
  int m = 0;
  for (std::size_t t = 0; t < values.size(); ++t)
    if (!infinite[t]) {
      sum += values[t];
      ++m;
    }
  return m > 0 ? sum / m : std::numeric_limits<double>::quiet_NaN();
}

double LLRSample::variance() const {
  const double mu = mean();
  double ss = 0.0;
  int m = 0;
  for (std::size_t t = 0; t < values.size(); ++t)
    if (!infinite[t]) {
      ss += (values[t] - mu) * (values[t] - mu);
      ++m;
    }
  return m > 1 ? ss / (m - 1) : std::numeric_limits<double>::quiet_NaN();
}

double LLRSample::standard_error() const {
  const int m = static_cast<int>(values.size()) - infinite_count();
  return m > 1 ? std::sqrt(variance() / m) : std::numeric_limits<double>::quiet_NaN();
}

namespace {

Index sample_index(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<Index>(static_cast<Index>(it - cdf.begin()), static_cast<Index>(cdf.size()) - 1);
}

std::vector<double> cumulative(const double* w, Index len, Index stride) {
  std::vector<double> c(static_cast<std::size_t>(len));
  double acc = 0.0;
  for (Index i = 0; i < len; ++i) {
    acc += w[i * stride];
    c[static_cast<std::size_t>(i)] = acc;
  }
  return c;
}

}  // namespace

LLRSample classical_llr_trajectories(const MarkovLiftModel& chain, std::span<const double> q, int n, int trials,
                                     std::uint64_t seed) {
  const Index d = chain.transition.rows();
  if (chain.transition.cols() != d || static_cast<Index>(chain.pi.size()) != d)
    throw InvalidArgument("classical_llr_trajectories: chain shape mismatch");
  for (Index i = 0; i < d; ++i) {
    if (chain.transition.row(i).minCoeff() < 0.0 || std::abs(chain.transition.row(i).sum() - 1.0) > 1e-12)
      throw InvalidArgument("classical_llr_trajectories: transition matrix is not row-stochastic");
  }
  if (static_cast<Index>(q.size()) != d) throw InvalidArgument("classical_llr_trajectories: Q has the wrong length");
  validate_simplex(q, 1e-12, "classical_llr_trajectories(Q)");
  if (n < 1 || trials < 1) throw InvalidArgument("classical_llr_trajectories: n and trials must be >= 1");

  const auto log_or = [](double x) { return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity(); };
  std::vector<double> log_pi(static_cast<std::size_t>(d)), log_q(static_cast<std::size_t>(d));
  RealMatrix log_p(d, d);
  for (Index i = 0; i < d; ++i) {
    log_pi[static_cast<std::size_t>(i)] = log_or(chain.pi[static_cast<std::size_t>(i)]);
    log_q[static_cast<std::size_t>(i)] = log_or(q[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < d; ++j) log_p(i, j) = log_or(chain.transition(i, j));
  }
  const std::vector<double> pi_cdf = cumulative(chain.pi.data(), d, 1);
  std::vector<std::vector<double>> row_cdf;
  for (Index i = 0; i < d; ++i) {
    const Eigen::VectorXd row = chain.transition.row(i).transpose();
    row_cdf.push_back(cumulative(row.data(), d, 1));
  }

  LLRSample s;
  s.n = n;
  s.seed = seed;
  s.target = markov_relative_entropy_rate(chain, q);
  s.values.resize(static_cast<std::size_t>(trials));
  s.infinite.resize(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    Index x = sample_index(pi_cdf, rng.uniform());
    double llr = log_pi[static_cast<std::size_t>(x)] - log_q[static_cast<std::size_t>(x)];
    for (int k = 1; k < n; ++k) {
      const Index y = sample_index(row_cdf[static_cast<std::size_t>(x)], rng.uniform());
      llr += log_p(x, y) - log_q[static_cast<std::size_t>(y)];
      x = y;
    }
    const bool inf = std::isinf(llr) && llr > 0;
    s.infinite[static_cast<std::size_t>(t)] = inf;
    s.values[static_cast<std::size_t>(t)] = inf ? std::numeric_limits<double>::infinity() : llr / n;
  }
  return s;
}

void write_llr_csv(std::ostream& os, const LLRSample& sample) {
  os << "trial,llr_per_site\n";
  for (std::size_t t = 0; t < sample.values.size(); ++t) os << t << ',' << csv::real(sample.values[t]) << '\n';
}

bool WindowSpec::contains(double statistic) const {
  return statistic > center - half_width && statistic < center + half_width;
}

WindowMembership window_membership(std::span<const double> statistics, std::span<const double> mass,
                                   const WindowSpec& spec) {
  if (!(spec.half_width > 0.0)) throw InvalidArgument("window half-width must be positive");
  if (!mass.empty() && mass.size() != statistics.size())
    throw InvalidArgument("window_membership: mass and statistics differ in length");
  WindowMembership w;
  w.mask.resize(statistics.size());
  for (std::size_t i = 0; i < statistics.size(); ++i) {
    const bool in = std::isfinite(statistics[i]) && spec.contains(statistics[i]);
    w.mask[i] = in;
    if (in) {
      ++w.count;
      if (!mass.empty()) w.captured_mass += mass[i];
    }
  }
  return w;
}

WindowMembership atom_window_membership(std::span<const double> weights, std::span<const double> mass, int n,
                                        const WindowSpec& spec) {
  if (n < 1) throw InvalidArgument("atom_window_membership: n must be >= 1");
  std::vector<double> stats(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i)
    stats[i] = weights[i] > 0.0 ? -std::log(weights[i]) / n : std::numeric_limits<double>::infinity();
  return window_membership(stats, mass, spec);
}

Matrix SeparatingProjectorReport::projector(Index dim_cap) const {
  if (classical) {
    if (atom_count() > dim_cap) throw DimensionCapExceeded(atom_count(), dim_cap);
    Matrix p = Matrix::Zero(atom_count(), atom_count());
    for (Index a : selected_atoms) p(a, a) = 1.0;
    return p;
  }
  if (tcd->dim() > dim_cap) throw DimensionCapExceeded(tcd->dim(), dim_cap);
  return restriction->atoms_projector(*tcd, selected_atoms);
}

SeparatingProjectorReport build_separating_projector(const StateModel& psi, const StateModel& phi, int n,
                                                     double epsilon, Index dim_cap) {
  if (!phi.is_iid()) throw InvalidArgument("build_separating_projector: phi must be i.i.d.");
  if (n < 1) throw InvalidArgument("build_separating_projector: n must be >= 1");
  if (!(epsilon > 0.0)) throw InvalidArgument("build_separating_projector: epsilon must be positive");
  if (psi.site_dim() != phi.site_dim()) throw InvalidArgument("build_separating_projector: site dimensions differ");

  const RateReport rates = rate_report(psi, phi);
  if (rates.mean_relative_entropy.is_infinite())
    throw InvalidArgument("build_separating_projector: mean relative entropy is infinite");

  SeparatingProjectorReport r;
  r.n = n;
  r.epsilon = epsilon;
  r.s_psi = rates.mean_entropy;
  r.s_rel = rates.mean_relative_entropy.value();
  r.entropy_window = {r.s_psi, epsilon, WindowKind::kEntropy};
  r.relative_window = {r.s_psi + r.s_rel, epsilon, WindowKind::kRelative};

  const DensityOperator& phi1 = phi.as_iid().rho1;
  if (psi.is_classical() && phi1.is_diagonal()) {
    r.classical = true;
    const RealVector p = classical_block(psi, n);
    const RealVector q = classical_block(phi, n);
    r.atom_psi_weights.assign(p.data(), p.data() + p.size());
    r.atom_phi_weights.assign(q.data(), q.data() + q.size());
  } else {
    const DensityOperator psi_n = block_density(psi, n, dim_cap);
    r.tcd = build_type_classes(phi1, n, kGroupingTol, dim_cap);
    r.restriction = abelian_restriction(psi_n, *r.tcd);
    r.atom_psi_weights = r.restriction->atom_psi_weights;
    r.atom_phi_weights = r.restriction->atom_phi_weights;
  }

  const WindowMembership ent = atom_window_membership(r.atom_psi_weights, r.atom_psi_weights, n, r.entropy_window);
  const WindowMembership rel = atom_window_membership(r.atom_phi_weights, r.atom_psi_weights, n, r.relative_window);
  r.selected.resize(r.atom_psi_weights.size());
  for (std::size_t a = 0; a < r.selected.size(); ++a) {
    r.selected[a] = ent.mask[a] && rel.mask[a];
    if (r.selected[a]) {
      r.selected_atoms.push_back(static_cast<Index>(a));
      r.psi_mass += r.atom_psi_weights[a];
      r.phi_mass += r.atom_phi_weights[a];
    }
  }
  return r;
}

void write_separating_csv(std::ostream& os, const SeparatingProjectorReport& report) {
  os << "atom_id,psi_weight,phi_weight,selected\n";
  for (std::size_t a = 0; a < report.atom_psi_weights.size(); ++a)
    os << a << ',' << csv::real(report.atom_psi_weights[a]) << ',' << csv::real(report.atom_phi_weights[a]) << ','
       << (report.selected[a] ? 1 : 0) << '\n';
}

TruncationSplit truncate_eigenvalues(std::span<const double> eigenvalues, int n, double delta, double s_psi) {
  if (n < 1) throw InvalidArgument("truncate: n must be >= 1");
  if (!(delta > 0.0)) throw InvalidArgument("truncate: delta must be positive");
  TruncationSplit t;
  t.n = n;
  t.delta = delta;
  t.s_psi = s_psi;
  t.threshold = std::exp(-n * (s_psi - delta));
  t.count_bound = std::exp(n * (s_psi - delta));
  t.eigenvalues.assign(eigenvalues.begin(), eigenvalues.end());
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues[i] <= t.threshold) {
      t.kept.push_back(static_cast<Index>(i));
      t.kept_mass += eigenvalues[i];
    } else {
      t.discarded.push_back(static_cast<Index>(i));
      t.discarded_mass += eigenvalues[i];
    }
  }
  t.count_bound_ok = static_cast<double>(t.discarded.size()) < t.count_bound;
  return t;
}

TruncationSplit truncate_spectrum(const Matrix& p, const DensityOperator& dpsi_n, int n, double delta, double s_psi) {
  if (p.rows() != dpsi_n.dim() || p.cols() != dpsi_n.dim())
    throw InvalidArgument("truncate_spectrum: projector and density differ in dimension");
  const HermitianOperator ph(p);
  const Matrix& pm = ph.matrix();
  if (max_abs_entry(pm * pm - pm) > 1e-8) throw InvalidArgument("truncate_spectrum: p is not a projector");

  const EigenSystem pe = EigenSystem::of(pm);
  Index rank = 0;
  while (rank < pe.dim() && pe.values()(rank) > 0.5) ++rank;
  std::vector<double> lambdas;
  if (rank > 0) {
    const Matrix v = pe.vectors().leftCols(rank);
    const Matrix restricted = v.adjoint() * dpsi_n.matrix() * v;
    const EigenSystem re = EigenSystem::of((restricted + restricted.adjoint()) * 0.5);
    for (Index k = 0; k < rank; ++k) lambdas.push_back(std::max(re.values()(k), 0.0));
  }
  return truncate_eigenvalues(lambdas, n, delta, s_psi);
}

TruncationSplit truncate_separating(const SeparatingProjectorReport& report, const StateModel& psi, double delta) {
  if (report.classical) {
    std::vector<double> lambdas;
    for (Index a : report.selected_atoms) lambdas.push_back(report.atom_psi_weights[static_cast<std::size_t>(a)]);
    return truncate_eigenvalues(lambdas, report.n, delta, report.s_psi);
  }
  const DensityOperator dpsi = block_density(psi, report.n, report.tcd->dim());
  return truncate_spectrum(report.projector(), dpsi, report.n, delta, report.s_psi);
}

}  // namespace qstein
