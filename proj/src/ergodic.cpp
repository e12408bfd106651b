#include "qstein/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "qstein/csv.hpp"
#include "qstein/entropy.hpp"
#include "qstein/errors.hpp"

namespace qstein {

namespace {

using BoolMatrix = std::vector<std::vector<bool>>;

BoolMatrix bool_product(const BoolMatrix& a, const BoolMatrix& b) {
  const std::size_t m = a.size();
  BoolMatrix c(m, std::vector<bool>(m, false));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < m; ++k)
      if (a[i][k])
        for (std::size_t j = 0; j < m; ++j)
          if (b[k][j]) c[i][j] = true;
  return c;
}

// Strongly connected classes of the graph of P^l restricted to `support`.
int l_step_classes(const RealMatrix& p, const std::vector<Index>& support, int l) {
  const std::size_t m = support.size();
  BoolMatrix step(m, std::vector<bool>(m, false));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) step[i][j] = p(support[i], support[j]) > 0.0;
  BoolMatrix power = step;
  for (int k = 1; k < l; ++k) power = bool_product(power, step);
  BoolMatrix reach = power;
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < m; ++i)
      if (reach[i][k])
        for (std::size_t j = 0; j < m; ++j)
          if (reach[k][j]) reach[i][j] = true;
  std::vector<int> label(m, -1);
  int classes = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (label[i] >= 0) continue;
    for (std::size_t j = i; j < m; ++j)
      if (j == i || (reach[i][j] && reach[j][i])) label[j] = classes;
    ++classes;
  }
  return classes;
}

}  // namespace

GlDecomposition gl_decompose(const StateModel& model, int l) {
  if (l < 1) throw InvalidArgument("gl_decompose: l must be >= 1");
  const MarkovLiftModel* chain = model.chain();
  if (chain == nullptr) throw InvalidArgument("gl_decompose: only (rotated) Markov lifts are supported");
  const ErgodicityVerdict verdict = check_chain_ergodicity(*chain);
  if (verdict.kind == ErgodicityKind::kReducible || verdict.kind == ErgodicityKind::kUndetermined)
    throw InvalidArgument("gl_decompose: chain is not irreducible on the support of pi");

  GlDecomposition dec;
  dec.l = l;
  dec.chain = *chain;
  if (model.is_rotated_markov()) dec.unitary = model.as_rotated_markov().unitary;
  dec.period = std::max(verdict.period, 1);
  dec.k_l = std::gcd(dec.period, l);

  const Index d = chain->transition.rows();
  std::vector<Index> support;
  for (Index i = 0; i < d; ++i)
    if (chain->pi[static_cast<std::size_t>(i)] > 0.0) support.push_back(i);

  // Breadth-first levels mod period give the cyclic classes.
  std::vector<int> level(static_cast<std::size_t>(d), -1);
  std::deque<Index> queue{support.front()};
  level[static_cast<std::size_t>(support.front())] = 0;
  while (!queue.empty()) {
    const Index i = queue.front();
    queue.pop_front();
    for (Index j : support)
      if (chain->transition(i, j) > 0.0 && level[static_cast<std::size_t>(j)] < 0) {
        level[static_cast<std::size_t>(j)] = level[static_cast<std::size_t>(i)] + 1;
        queue.push_back(j);
      }
  }
  dec.cyclic_classes.assign(static_cast<std::size_t>(dec.period), {});
  for (Index i : support)
    dec.cyclic_classes[static_cast<std::size_t>(level[static_cast<std::size_t>(i)] % dec.period)].push_back(i);

  dec.merged_classes.assign(static_cast<std::size_t>(dec.k_l), {});
  for (int r = 0; r < dec.period; ++r) {
    auto& target = dec.merged_classes[static_cast<std::size_t>(r % dec.k_l)];
    const auto& cls = dec.cyclic_classes[static_cast<std::size_t>(r)];
    target.insert(target.end(), cls.begin(), cls.end());
  }
  for (auto& m : dec.merged_classes) std::sort(m.begin(), m.end());

  for (const auto& m : dec.merged_classes) {
    std::vector<double> start(static_cast<std::size_t>(d), 0.0);
    double mass = 0.0;
    for (Index i : m) mass += chain->pi[static_cast<std::size_t>(i)];
    for (Index i : m) start[static_cast<std::size_t>(i)] = chain->pi[static_cast<std::size_t>(i)] / mass;
    dec.starts.push_back(std::move(start));
  }
  dec.weights.assign(static_cast<std::size_t>(dec.k_l), 1.0 / dec.k_l);
  dec.k_reachability = l_step_classes(chain->transition, support, l);
  return dec;
}

RealVector component_block(const GlDecomposition& dec, int x, int n) {
  if (x < 0 || x >= dec.k_l) throw InvalidArgument("component_block: component index out of range");
  return markov_block_probabilities(dec.starts[static_cast<std::size_t>(x)], dec.chain.transition, n);
}

DensityOperator component_block_density(const GlDecomposition& dec, int x, int n, Index dim_cap) {
  checked_power_dim(dec.site_dim(), n, dim_cap);
  const RealVector p = component_block(dec, x, n);
  Matrix m = Matrix::Zero(p.size(), p.size());
  for (Index i = 0; i < p.size(); ++i) m(i, i) = p(i);
  if (dec.unitary) m = conjugate_by_site_unitary(m, *dec.unitary, n);
  return DensityOperator(m, 1e-9);
}

namespace {

double spread(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (std::isinf(*lo) || std::isinf(*hi)) return *lo == *hi ? 0.0 : std::numeric_limits<double>::infinity();
  return *hi - *lo;
}

// tr(rho log phi1) for rho = U diag(mu) U*, or -infinity on support leak.
double site_cross_term(const std::vector<double>& mu, const std::optional<Matrix>& u, const DensityOperator& phi1) {
  const Index d = phi1.dim();
  Matrix rho = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) rho(i, i) = mu[static_cast<std::size_t>(i)];
  if (u) rho = (*u) * rho * u->adjoint();
  const EigenSystem& es = phi1.spectrum();
  const RealVector w = es.expectations(rho);
  double cross = 0.0;
  for (Index k = 0; k < d; ++k) {
    if (es.values()(k) > kSupportFloor) cross += w(k) * std::log(es.values()(k));
    else if (w(k) > kSupportLeakTol) return -std::numeric_limits<double>::infinity();
  }
  return cross;
}

std::vector<double> step(const std::vector<double>& mu, const RealMatrix& p) {
  std::vector<double> out(mu.size(), 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < mu.size(); ++j) out[j] += mu[i] * p(static_cast<Index>(i), static_cast<Index>(j));
  return out;
}

double row_entropy(const RealMatrix& p, Index i) {
  double h = 0.0;
  for (Index j = 0; j < p.cols(); ++j)
    if (p(i, j) > 0.0) h -= p(i, j) * std::log(p(i, j));
  return h;
}

int max_sites(Index d, int wanted, Index cap) {
  int n = 0;
  double len = 1.0;
  while (n < wanted && len * static_cast<double>(d) <= static_cast<double>(cap)) {
    len *= static_cast<double>(d);
    ++n;
  }
  return n;
}

}  // namespace

bool ComponentAudit::passed() const {
  bool ok = divides && reachability_agrees;
  ok = ok && closed_form_entropy_spread <= kTol && closed_form_entropy_residual <= kTol;
  ok = ok && closed_form_rel_spread <= kTol && closed_form_rel_residual <= kTol;
  ok = ok && mixture_residual <= kMixtureTol && translate_residual <= kMixtureTol;
  if (blocked_rel_rate) ok = ok && scaling_residual <= kTol;
  return ok;
}

ComponentAudit component_audit(const GlDecomposition& dec, const StateModel& phi, int n_max,
                               const std::vector<double>& etas) {
  if (!phi.is_iid()) throw InvalidArgument("component_audit: phi must be i.i.d.");
  if (phi.site_dim() != dec.site_dim()) throw InvalidArgument("component_audit: site dimensions differ");
  if (n_max < 1) throw InvalidArgument("component_audit: n_max must be >= 1");
  const DensityOperator& phi1 = phi.as_iid().rho1;
  const RealMatrix& p = dec.chain.transition;
  const Index d = dec.site_dim();
  const bool classical = !dec.unitary && phi1.is_diagonal();
  const int k = dec.k_l;
  const int l = dec.l;

  ComponentAudit a;
  a.l = l;
  a.k_l = k;
  a.divides = dec.divides();
  a.reachability_agrees = dec.k_reachability == dec.k_l;

  const StateModel psi = dec.unitary ? StateModel::rotated_markov(p, *dec.unitary, dec.chain.pi)
                                     : StateModel::markov(p, dec.chain.pi);
  const RateReport rates = rate_report(psi, phi);
  a.s_psi = rates.mean_entropy;
  a.s_rel = rates.mean_relative_entropy;

  // Finite-n rates per l-block.
  for (int n = 1; n <= n_max; ++n) {
    const int sites = l * n;
    std::vector<double> ent, rel;
    for (int x = 0; x < k; ++x) {
      const RealVector block = component_block(dec, x, sites);
      const std::span<const double> bs(block.data(), static_cast<std::size_t>(block.size()));
      ComponentRow row;
      row.component = x;
      row.n = n;
      row.entropy_rate = shannon_entropy(bs) / n;
      ExtendedReal s;
      if (classical) {
        const RealVector q = classical_block(phi, sites);
        s = classical_kl(bs, std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), 1e-9);
      } else {
        s = relative_entropy(component_block_density(dec, x, sites), tensor_power(phi1, sites));
      }
      row.rel_entropy_rate = s.is_infinite() ? s : ExtendedReal::finite(s.value() / n);
      ent.push_back(row.entropy_rate);
      rel.push_back(row.rel_entropy_rate.value());
      a.rows.push_back(row);
    }
    a.entropy_spread.push_back(spread(ent));
    a.rel_spread.push_back(spread(rel));
  }

  // Per l-block limits: sum over one l-period of the site marginals.
  std::vector<double> rel_values;
  for (int x = 0; x < k; ++x) {
    std::vector<double> mu = dec.starts[static_cast<std::size_t>(x)];
    double h = 0.0, cross = 0.0;
    for (int j = 0; j < l; ++j) {
      for (Index i = 0; i < d; ++i) h += mu[static_cast<std::size_t>(i)] * row_entropy(p, i);
      cross += site_cross_term(mu, dec.unitary, phi1);
      mu = step(mu, p);
    }
    a.closed_form_entropy.push_back(h);
    const ExtendedReal r = std::isinf(cross) ? ExtendedReal::infinity() : ExtendedReal::finite(-h - cross);
    a.closed_form_rel.push_back(r);
    rel_values.push_back(r.value());
    a.closed_form_entropy_residual = std::max(a.closed_form_entropy_residual, std::abs(h - l * a.s_psi));
    if (r.is_infinite() != a.s_rel.is_infinite())
      a.closed_form_rel_residual = std::numeric_limits<double>::infinity();
    else if (r.is_finite())
      a.closed_form_rel_residual = std::max(a.closed_form_rel_residual, std::abs(r.value() - l * a.s_rel.value()));
  }
  a.closed_form_entropy_spread = spread(a.closed_form_entropy);
  a.closed_form_rel_spread = spread(rel_values);

  // Mixture and translate identities on short windows.
  const int n_check = max_sites(d, 6, Index{1} << 16);
  for (int n = 1; n <= n_check; ++n) {
    const RealVector whole = markov_block_probabilities(dec.chain.pi, p, n);
    RealVector mix = RealVector::Zero(whole.size());
    for (int x = 0; x < k; ++x) mix += dec.weights[static_cast<std::size_t>(x)] * component_block(dec, x, n);
    a.mixture_residual = std::max(a.mixture_residual, (mix - whole).cwiseAbs().maxCoeff());
  }
  for (int x = 1; x < k; ++x) {
    const int n_t = std::min(n_check, max_sites(d, 6 + x, Index{1} << 16) - x);
    for (int n = 1; n <= n_t; ++n) {
      const RealVector longer = component_block(dec, 0, n + x);
      const RealVector target = component_block(dec, x, n);
      RealVector shifted = RealVector::Zero(target.size());
      for (Index i = 0; i < longer.size(); ++i) shifted(i % target.size()) += longer(i);
      a.translate_residual = std::max(a.translate_residual, (shifted - target).cwiseAbs().maxCoeff());
    }
  }

  // Relative entropy rate of the chain on l-tuples against phi^{⊗l}.
  if (classical && std::pow(static_cast<double>(d), l) <= 256.0) {
    const RealVector tuple_pi = markov_block_probabilities(dec.chain.pi, p, l);
    const RealVector q1 = phi1.diagonal_entries();
    const Index m = tuple_pi.size();
    auto digit = [&](Index a_idx, int pos) {  // pos 0 is the first site
      Index v = a_idx;
      for (int s = l - 1; s > pos; --s) v /= d;
      return v % d;
    };
    double rate = 0.0;
    bool infinite = false;
    for (Index ai = 0; ai < m && !infinite; ++ai) {
      if (tuple_pi(ai) <= 0.0) continue;
      const Index last = digit(ai, l - 1);
      for (Index bi = 0; bi < m; ++bi) {
        double t = p(last, digit(bi, 0));
        double qb = q1(digit(bi, 0));
        for (int s = 1; s < l; ++s) {
          t *= p(digit(bi, s - 1), digit(bi, s));
          qb *= q1(digit(bi, s));
        }
        if (t <= 0.0) continue;
        if (qb <= 0.0) {
          infinite = true;
          break;
        }
        rate += tuple_pi(ai) * t * std::log(t / qb);
      }
    }
    a.blocked_rel_rate = infinite ? std::numeric_limits<double>::infinity() : rate;
    if (infinite != a.s_rel.is_infinite()) a.scaling_residual = std::numeric_limits<double>::infinity();
    else if (!infinite) a.scaling_residual = std::abs(rate - l * a.s_rel.value());
  }

  // Components whose first l-block rate falls below s(psi, phi) - eta.
  std::vector<double> first_block;
  for (int x = 0; x < k; ++x) {
    ExtendedReal s;
    if (classical) {
      const RealVector b = component_block(dec, x, l);
      const RealVector q = classical_block(phi, l);
      s = classical_kl(std::span<const double>(b.data(), static_cast<std::size_t>(b.size())),
                       std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), 1e-9);
    } else {
      s = relative_entropy(component_block_density(dec, x, l), tensor_power(phi1, l));
    }
    first_block.push_back(s.value() / l);
  }
  for (double eta : etas) {
    LevelSetRow row;
    row.eta = eta;
    for (double v : first_block)
      if (v < a.s_rel.value() - eta) ++row.count;
    row.fraction = static_cast<double>(row.count) / k;
    a.level_sets.push_back(row);
  }
  return a;
}

void write_component_csv(std::ostream& os, const ComponentAudit& audit) {
  os << "component,n,entropy_rate,rel_entropy_rate\n";
  for (const ComponentRow& r : audit.rows)
    os << r.component << ',' << r.n << ',' << csv::real(r.entropy_rate) << ',' << csv::real(r.rel_entropy_rate.value())
       << '\n';
}

}  // namespace qstein
