#include "qstein/hypothesis_testing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qstein/errors.hpp"

namespace qstein {

namespace {

constexpr double kFeasibilityTol = 1e-12;
constexpr double kRelEqualTol = 1e-12;

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= kRelEqualTol * std::max(std::abs(a), std::abs(b));
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    std::ostringstream os;
    os << "epsilon must lie in (0, 1), got " << epsilon;
    throw InvalidArgument(os.str());
  }
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity(); }

// Smallest k with need - k * p <= tol.
Index units_needed(double need, double p) {
  if (need <= kFeasibilityTol) return 0;
  auto k = static_cast<Index>(std::ceil((need - kFeasibilityTol) / p));
  k = std::max<Index>(k, 0);
  while (need - static_cast<double>(k) * p > kFeasibilityTol) ++k;
  while (k > 0 && need - static_cast<double>(k - 1) * p <= kFeasibilityTol) --k;
  return k;
}

class SubsetSearch {
 public:
  SubsetSearch(std::vector<OutcomeClass> items, long long budget) : items_(std::move(items)), budget_(budget) {
    const std::size_t n = items_.size();
    prefix_p_.assign(n + 1, 0.0);
    prefix_q_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      prefix_p_[i + 1] = prefix_p_[i] + items_[i].p * static_cast<double>(items_[i].count);
      prefix_q_[i + 1] = prefix_q_[i] + items_[i].q * static_cast<double>(items_[i].count);
    }
    uniform_from_.assign(n + 1, true);
    for (std::size_t i = n; i-- > 0;) {
      uniform_from_[i] = (i + 1 == n) || (uniform_from_[i + 1] && nearly_equal(items_[i].q, items_[i + 1].q));
    }
    current_.assign(n, 0);
  }

  void seed_greedy(double need) {
    std::vector<Index> taken(items_.size(), 0);
    double cost = 0.0;
    for (std::size_t i = 0; i < items_.size() && need > kFeasibilityTol; ++i) {
      const Index k = std::min(items_[i].count, units_needed(need, items_[i].p));
      taken[i] = k;
      need -= static_cast<double>(k) * items_[i].p;
      cost += static_cast<double>(k) * items_[i].q;
    }
    if (need <= kFeasibilityTol) record(cost, taken);
  }

  void run(double need) { dfs(0, need, 0.0); }

  bool found() const { return !best_taken_.empty() || best_cost_ == 0.0; }
  double best_cost() const { return best_cost_; }
  const std::vector<Index>& best_taken() const { return best_taken_; }
  long long nodes() const { return nodes_; }

 private:
  // Fractional-relaxation cost of covering `need` with items i.., or +inf.
  double relaxation(std::size_t i, double need) const {
    if (need <= kFeasibilityTol) return 0.0;
    const double avail = prefix_p_.back() - prefix_p_[i];
    if (avail < need - kFeasibilityTol) return std::numeric_limits<double>::infinity();
    const double target = prefix_p_[i] + need;
    auto it = std::lower_bound(prefix_p_.begin() + static_cast<long>(i) + 1, prefix_p_.end(), target - kFeasibilityTol);
    if (it == prefix_p_.end()) --it;
    const std::size_t j = static_cast<std::size_t>(it - prefix_p_.begin()) - 1;  // critical item
    const double covered = prefix_p_[j] - prefix_p_[i];
    const double rest = std::max(0.0, need - covered);
    return prefix_q_[j] - prefix_q_[i] + rest * items_[j].q / items_[j].p;
  }

  bool prunable(double lower) const { return lower >= best_cost_ * (1.0 - 1e-12); }

  void record(double cost, const std::vector<Index>& taken) {
    if (cost < best_cost_) {
      best_cost_ = cost;
      best_taken_ = taken;
    }
  }

  void close_greedily(std::size_t i, double need, double cost) {
    std::vector<Index> taken = current_;
    for (std::size_t k = i; k < items_.size() && need > kFeasibilityTol; ++k) {
      const Index units = std::min(items_[k].count, units_needed(need, items_[k].p));
      taken[k] = units;
      need -= static_cast<double>(units) * items_[k].p;
      cost += static_cast<double>(units) * items_[k].q;
    }
    if (need <= kFeasibilityTol) record(cost, taken);
  }

  void dfs(std::size_t i, double need, double cost) {
    if (++nodes_ > budget_) throw NumericalError("subset selection exceeded its node budget");
    if (need <= kFeasibilityTol) {
      record(cost, current_);
      return;
    }
    if (i == items_.size()) return;
    if (prunable(cost + relaxation(i, need))) return;
    if (uniform_from_[i]) {
      // Equal q on the whole suffix: minimum cardinality, taken in p order.
      close_greedily(i, need, cost);
      return;
    }
    const OutcomeClass& item = items_[i];
    const Index kmax = std::min(item.count, units_needed(need, item.p));
    for (Index k = kmax; k >= 0; --k) {
      const double c = cost + static_cast<double>(k) * item.q;
      const double r = need - static_cast<double>(k) * item.p;
      // Below kmax the remainder stays positive and every later item has a
      // worse ratio, so fewer copies only raise the bound. At kmax the
      // last copy may overshoot, which breaks that monotonicity.
      if (prunable(c + relaxation(i + 1, r))) {
        if (k == kmax) continue;
        break;
      }
      current_[i] = k;
      dfs(i + 1, r, c);
      current_[i] = 0;
    }
  }

  std::vector<OutcomeClass> items_;
  std::vector<double> prefix_p_;
  std::vector<double> prefix_q_;
  std::vector<bool> uniform_from_;
  std::vector<Index> current_;
  std::vector<Index> best_taken_;
  double best_cost_ = std::numeric_limits<double>::infinity();
  long long budget_;
  long long nodes_ = 0;
};

}  // namespace

SubsetSolution solve_subset_selection(std::span<const OutcomeClass> classes, double epsilon, long long node_budget) {
  check_epsilon(epsilon);
  const double target = 1.0 - epsilon;

  SubsetSolution sol;
  sol.taken.assign(classes.size(), 0);
  double free_mass = 0.0;
  std::vector<std::size_t> useful;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const OutcomeClass& c = classes[i];
    if (c.count < 0 || c.p < 0.0 || c.q < 0.0) throw InvalidArgument("subset selection: negative mass or count");
    if (c.p <= 0.0 || c.count == 0) continue;
    if (c.q <= 0.0) {
      sol.taken[i] = c.count;
      free_mass += c.p * static_cast<double>(c.count);
      continue;
    }
    useful.push_back(i);
  }
  std::stable_sort(useful.begin(), useful.end(), [&](std::size_t a, std::size_t b) {
    const double ra = classes[a].p / classes[a].q;
    const double rb = classes[b].p / classes[b].q;
    if (ra != rb) return ra > rb;
    return classes[a].p > classes[b].p;
  });

  double need = target - free_mass;
  if (need > kFeasibilityTol) {
    std::vector<OutcomeClass> ordered;
    for (std::size_t i : useful) ordered.push_back(classes[i]);
    SubsetSearch search(std::move(ordered), node_budget);
    search.seed_greedy(need);
    search.run(need);
    if (search.best_taken().empty()) throw InvalidArgument("subset selection: infeasible (total p-mass below 1 - eps)");
    for (std::size_t k = 0; k < useful.size(); ++k) sol.taken[useful[k]] = search.best_taken()[k];
    sol.nodes = search.nodes();
  }
  for (std::size_t i = 0; i < classes.size(); ++i) {
    sol.p_mass += classes[i].p * static_cast<double>(sol.taken[i]);
    sol.q_mass += classes[i].q * static_cast<double>(sol.taken[i]);
  }
  return sol;
}

namespace {

struct SubsetChoice {
  std::vector<Index> outcomes;
  double p_mass = 0.0;
  double q_mass = 0.0;
};

SubsetChoice exhaustive_subset(std::span<const double> p, std::span<const double> q, double target) {
  const std::size_t m = p.size();
  SubsetChoice best;
  best.q_mass = std::numeric_limits<double>::infinity();
  std::uint64_t best_mask = 0;
  const std::uint64_t total = std::uint64_t{1} << m;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double pm = 0.0, qm = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      if (mask >> i & 1U) {
        pm += p[i];
        qm += q[i];
      }
    if (pm >= target - kFeasibilityTol && qm < best.q_mass) {
      best.q_mass = qm;
      best.p_mass = pm;
      best_mask = mask;
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    if (best_mask >> i & 1U) best.outcomes.push_back(static_cast<Index>(i));
  return best;
}

SubsetChoice grouped_subset(std::span<const double> p, std::span<const double> q, double epsilon) {
  std::vector<Index> order(p.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (p[static_cast<std::size_t>(a)] != p[static_cast<std::size_t>(b)]) return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)];
    return q[static_cast<std::size_t>(a)] < q[static_cast<std::size_t>(b)];
  });
  std::vector<OutcomeClass> classes;
  std::vector<std::vector<Index>> members;
  for (Index idx : order) {
    const double pi = p[static_cast<std::size_t>(idx)];
    const double qi = q[static_cast<std::size_t>(idx)];
    if (!classes.empty() && nearly_equal(classes.back().p, pi) && nearly_equal(classes.back().q, qi)) {
      ++classes.back().count;
      members.back().push_back(idx);
    } else {
      classes.push_back({pi, qi, 1});
      members.push_back({idx});
    }
  }
  const SubsetSolution sol = solve_subset_selection(classes, epsilon);
  SubsetChoice choice;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<Index>& mem = members[c];
    std::sort(mem.begin(), mem.end());
    for (Index k = 0; k < sol.taken[c]; ++k) choice.outcomes.push_back(mem[static_cast<std::size_t>(k)]);
  }
  std::sort(choice.outcomes.begin(), choice.outcomes.end());
  // Masses from the selected members themselves, not the class representatives.
  for (Index i : choice.outcomes) {
    choice.p_mass += p[static_cast<std::size_t>(i)];
    choice.q_mass += q[static_cast<std::size_t>(i)];
  }
  return choice;
}

}  // namespace

BetaBracket classical_np_exact(std::span<const double> p, std::span<const double> q, double epsilon, Index exact_cap) {
  check_epsilon(epsilon);
  if (p.size() != q.size() || p.empty()) throw InvalidArgument("classical_np_exact: p and q must be nonempty and of equal length");
  validate_simplex(p, 1e-9, "classical_np_exact(p)");
  validate_simplex(q, 1e-9, "classical_np_exact(q)");

  const SubsetChoice choice = static_cast<Index>(p.size()) <= std::min<Index>(exact_cap, 30)
                                  ? exhaustive_subset(p, q, 1.0 - epsilon)
                                  : grouped_subset(p, q, epsilon);
  BetaBracket b;
  b.epsilon = epsilon;
  b.beta_hi = safe_log(choice.q_mass);
  b.beta_lo = b.beta_hi;
  b.tight = true;
  b.witness_outcomes = choice.outcomes;
  b.witness_psi_mass = choice.p_mass;
  b.witness_phi_mass = choice.q_mass;
  b.witness_kind = "classical-subset";
  return b;
}

// ---------------------------------------------------------------------------
// Spectral tests

std::vector<TestPoint> np_spectral_curve(const DensityOperator& psi, const DensityOperator& phi,
                                         std::span<const double> lambdas) {
  if (psi.dim() != phi.dim()) throw InvalidArgument("np_spectral_curve: dimension mismatch");
  std::vector<TestPoint> out;
  out.reserve(lambdas.size());
  for (double lambda : lambdas) {
    if (!(lambda > 0.0)) throw InvalidArgument("np_spectral_curve: lambdas must be positive");
    const Matrix x = lambda * psi.matrix() - phi.matrix();
    const EigenSystem es = EigenSystem::of(x);
    const double tol = 1e-12 * std::max(1.0, lambda);
    const RealVector gp = es.expectations(psi.matrix());
    const RealVector gf = es.expectations(phi.matrix());
    TestPoint tp;
    tp.lambda = lambda;
    double accept_psi = 0.0, accept_phi = 0.0;
    for (Index k = 0; k < es.dim(); ++k)
      if (es.values()(k) > tol) {
        accept_psi += gp(k);
        accept_phi += gf(k);
        ++tp.rank;
      }
    tp.type1 = std::clamp(1.0 - accept_psi, 0.0, 1.0);
    tp.type2 = std::clamp(accept_phi, 0.0, 1.0);
    out.push_back(tp);
  }
  return out;
}

std::optional<CommutingSpectra> commuting_spectra(const DensityOperator& psi, const DensityOperator& phi) {
  if (psi.dim() != phi.dim()) throw InvalidArgument("commuting_spectra: dimension mismatch");
  const Index dim = psi.dim();
  CommutingSpectra cs;
  if (psi.is_diagonal() && phi.is_diagonal()) {
    cs.coordinate = true;
    const RealVector a = psi.diagonal_entries();
    const RealVector b = phi.diagonal_entries();
    cs.p.assign(a.data(), a.data() + dim);
    cs.q.assign(b.data(), b.data() + dim);
    for (double& x : cs.p) x = std::max(x, 0.0);
    for (double& x : cs.q) x = std::max(x, 0.0);
    return cs;
  }
  const Matrix comm = psi.matrix() * phi.matrix() - phi.matrix() * psi.matrix();
  if (max_abs_entry(comm) > kCommutatorTol) return std::nullopt;

  const SpectralDecomposition sd = spectral_decompose(phi.op());
  cs.basis = Matrix(dim, dim);
  Index col = 0;
  for (std::size_t k = 0; k < sd.size(); ++k) {
    const Matrix v = sd.group_vectors(k);
    const Matrix inner = v.adjoint() * psi.matrix() * v;
    const EigenSystem es = EigenSystem::of((inner + inner.adjoint()) * 0.5);
    const Matrix w = v * es.vectors();
    cs.basis.middleCols(col, w.cols()) = w;
    col += w.cols();
  }
  const Matrix psi_b = psi.matrix() * cs.basis;
  const Matrix phi_b = phi.matrix() * cs.basis;
  for (Index k = 0; k < dim; ++k) {
    cs.p.push_back(std::max(0.0, cs.basis.col(k).dot(psi_b.col(k)).real()));
    cs.q.push_back(std::max(0.0, cs.basis.col(k).dot(phi_b.col(k)).real()));
  }
  return cs;
}

namespace {

struct Candidate {
  double phi_mass = std::numeric_limits<double>::infinity();
  double psi_mass = 0.0;
  double lambda = 0.0;
  Matrix vectors;
  std::string kind;
};

class SpectralTestSearch {
 public:
  SpectralTestSearch(const DensityOperator& psi, const DensityOperator& phi, double epsilon)
      : psi_(psi), phi_(phi), target_(1.0 - epsilon) {}

  struct Evaluation {
    double bound = 0.0;      // lambda (1 - eps) - tr (lambda psi - phi)_+
    bool positive_feasible = false;
  };

  Evaluation evaluate(double lambda) {
    const Matrix x = lambda * psi_.matrix() - phi_.matrix();
    const EigenSystem es = EigenSystem::of(x);
    const RealVector gp = es.expectations(psi_.matrix());
    const RealVector gf = es.expectations(phi_.matrix());
    const double tol = 1e-12 * std::max(1.0, lambda);

    Evaluation ev;
    double positive_part = 0.0;
    std::vector<Index> chosen;
    double mass = 0.0, cost = 0.0;
    for (Index k = 0; k < es.dim(); ++k)
      if (es.values()(k) > tol) {
        positive_part += es.values()(k);
        chosen.push_back(k);
        mass += gp(k);
        cost += gf(k);
      }
    ev.bound = lambda * target_ - positive_part;
    if (mass >= target_ - kFeasibilityTol) {
      ev.positive_feasible = true;
      offer(es, chosen, mass, cost, lambda, "spectral");
      return ev;
    }
    // Augment by the remaining eigenvectors in order of psi-gain per phi-cost.
    std::vector<Index> rest;
    for (Index k = 0; k < es.dim(); ++k)
      if (!(es.values()(k) > tol)) rest.push_back(k);
    std::stable_sort(rest.begin(), rest.end(), [&](Index a, Index b) {
      return gp(a) * std::max(gf(b), 0.0) > gp(b) * std::max(gf(a), 0.0);
    });
    for (Index k : rest) {
      if (mass >= target_ - kFeasibilityTol) break;
      chosen.push_back(k);
      mass += gp(k);
      cost += gf(k);
    }
    if (mass >= target_ - kFeasibilityTol) offer(es, chosen, mass, cost, lambda, "spectral+greedy");
    return ev;
  }

  const Candidate& best() const { return best_; }

 private:
  void offer(const EigenSystem& es, const std::vector<Index>& chosen, double mass, double cost, double lambda,
             const char* kind) {
    cost = std::max(cost, 0.0);
    if (cost >= best_.phi_mass) return;
    best_.phi_mass = cost;
    best_.psi_mass = mass;
    best_.lambda = lambda;
    best_.kind = kind;
    best_.vectors = Matrix(es.dim(), static_cast<Index>(chosen.size()));
    for (std::size_t j = 0; j < chosen.size(); ++j) best_.vectors.col(static_cast<Index>(j)) = es.vector(chosen[j]);
  }

  const DensityOperator& psi_;
  const DensityOperator& phi_;
  double target_;
  Candidate best_;
};

double min_positive(const RealVector& v) {
  double m = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < v.size(); ++k)
    if (v(k) > kSupportFloor) m = std::min(m, v(k));
  return std::isfinite(m) ? m : kSupportFloor;
}

}  // namespace

BetaBracket beta_bracket(const DensityOperator& psi, const DensityOperator& phi, double epsilon, int lambda_grid_size) {
  check_epsilon(epsilon);
  if (psi.dim() != phi.dim()) throw InvalidArgument("beta_bracket: dimension mismatch");
  if (lambda_grid_size < 2) throw InvalidArgument("beta_bracket: lambda grid needs at least 2 points");

  if (auto cs = commuting_spectra(psi, phi)) {
    BetaBracket b = classical_np_exact(cs->p, cs->q, epsilon);
    if (!cs->coordinate) {
      b.witness_vectors = Matrix(psi.dim(), static_cast<Index>(b.witness_outcomes.size()));
      for (std::size_t j = 0; j < b.witness_outcomes.size(); ++j)
        b.witness_vectors.col(static_cast<Index>(j)) = cs->basis.col(b.witness_outcomes[j]);
    }
    b.witness_kind = "commuting-exact";
    return b;
  }

  const RealVector& ev_psi = psi.spectrum().values();
  const RealVector& ev_phi = phi.spectrum().values();
  const double lo = std::log(min_positive(ev_phi) / std::max(ev_psi(0), kSupportFloor)) - 4.0;
  const double hi = std::log(std::max(ev_phi(0), kSupportFloor) / min_positive(ev_psi)) + 4.0;

  SpectralTestSearch search(psi, phi, epsilon);
  std::vector<double> grid(static_cast<std::size_t>(lambda_grid_size));
  std::vector<SpectralTestSearch::Evaluation> evals;
  for (int i = 0; i < lambda_grid_size; ++i) {
    grid[static_cast<std::size_t>(i)] = std::exp(lo + (hi - lo) * i / (lambda_grid_size - 1));
    evals.push_back(search.evaluate(grid[static_cast<std::size_t>(i)]));
  }

  // Bisect every infeasible -> feasible transition of the plain spectral test.
  for (int i = 0; i + 1 < lambda_grid_size; ++i) {
    if (evals[static_cast<std::size_t>(i)].positive_feasible || !evals[static_cast<std::size_t>(i) + 1].positive_feasible) continue;
    double a = std::log(grid[static_cast<std::size_t>(i)]);
    double b = std::log(grid[static_cast<std::size_t>(i) + 1]);
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (a + b);
      if (search.evaluate(std::exp(mid)).positive_feasible) b = mid;
      else a = mid;
    }
  }

  // The dual function is concave in lambda: golden-section around the grid maximum.
  std::size_t arg = 0;
  for (std::size_t i = 1; i < evals.size(); ++i)
    if (evals[i].bound > evals[arg].bound) arg = i;
  double best_bound = evals[arg].bound;
  {
    double a = grid[arg > 0 ? arg - 1 : 0];
    double b = grid[std::min(arg + 1, grid.size() - 1)];
    const double phi_ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi_ratio * (b - a);
    double d = a + phi_ratio * (b - a);
    double fc = search.evaluate(c).bound;
    double fd = search.evaluate(d).bound;
    for (int it = 0; it < 80; ++it) {
      if (fc > fd) {
        b = d; d = c; fd = fc;
        c = b - phi_ratio * (b - a);
        fc = search.evaluate(c).bound;
      } else {
        a = c; c = d; fc = fd;
        d = a + phi_ratio * (b - a);
        fd = search.evaluate(d).bound;
      }
    }
    best_bound = std::max({best_bound, fc, fd});
  }

  const Candidate& best = search.best();
  BetaBracket br;
  br.epsilon = epsilon;
  br.beta_hi = safe_log(best.phi_mass);
  br.beta_lo = best_bound > 0.0 ? std::log(std::min(best_bound, 1.0)) : -std::numeric_limits<double>::infinity();
  if (br.beta_lo > br.beta_hi) {
    if (br.beta_lo - br.beta_hi > 1e-9) throw NumericalError("beta_bracket: dual bound exceeds feasible projector value");
    br.beta_lo = br.beta_hi;
  }
  br.witness_vectors = best.vectors;
  br.witness_psi_mass = best.psi_mass;
  br.witness_phi_mass = best.phi_mass;
  br.witness_lambda = best.lambda;
  br.witness_kind = best.kind;
  return br;
}

// ---------------------------------------------------------------------------
// Converse and Stein scan

double weak_converse_bound(ExtendedReal relative_entropy_value, double epsilon) {
  check_epsilon(epsilon);
  if (relative_entropy_value.is_infinite()) return std::numeric_limits<double>::infinity();
  return (relative_entropy_value.value() + std::log(2.0)) / (1.0 - epsilon);
}

double weak_converse_bound(const DensityOperator& psi, const DensityOperator& phi, double epsilon) {
  return weak_converse_bound(relative_entropy(psi, phi), epsilon);
}

namespace {

double log_multinomial(int n, const std::vector<int>& parts) {
  double r = std::lgamma(n + 1.0);
  for (int k : parts) r -= std::lgamma(k + 1.0);
  return r;
}

void compositions(int remaining, int parts, std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    prefix.push_back(remaining);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int k = remaining; k >= 0; --k) {
    prefix.push_back(k);
    compositions(remaining - k, parts - 1, prefix, out);
    prefix.pop_back();
  }
}

// Exact bracket for commuting i.i.d. blocks, one outcome class per type.
BetaBracket iid_type_bracket(const std::vector<double>& p1, const std::vector<double>& q1, int n, double epsilon) {
  std::vector<std::vector<int>> types;
  std::vector<int> prefix;
  compositions(n, static_cast<int>(p1.size()), prefix, types);
  std::vector<OutcomeClass> classes;
  for (const auto& t : types) {
    double p = 1.0, q = 1.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      p *= std::pow(p1[k], t[k]);
      q *= std::pow(q1[k], t[k]);
    }
    const double count = std::round(std::exp(log_multinomial(n, t)));
    classes.push_back({p, q, static_cast<Index>(count)});
  }
  const SubsetSolution sol = solve_subset_selection(classes, epsilon);
  BetaBracket b;
  b.epsilon = epsilon;
  b.beta_hi = safe_log(sol.q_mass);
  b.beta_lo = b.beta_hi;
  b.tight = true;
  b.witness_psi_mass = sol.p_mass;
  b.witness_phi_mass = sol.q_mass;
  b.witness_kind = "type-classes";
  for (std::size_t c = 0; c < classes.size(); ++c) b.witness_outcomes.push_back(sol.taken[c]);
  return b;
}

}  // namespace

std::vector<SteinRow> stein_scan(const StateModel& psi, const StateModel& phi, double epsilon, int n_max,
                                 const SteinScanOptions& options) {
  check_epsilon(epsilon);
  if (!phi.is_iid()) throw InvalidArgument("stein_scan: phi must be an i.i.d. model");
  if (n_max < 1) throw InvalidArgument("stein_scan: n_max must be >= 1");
  const DensityOperator& phi1 = phi.as_iid().rho1;

  const RateReport rates = rate_report(psi, phi);
  const double s_target = rates.mean_relative_entropy.value();

  std::optional<CommutingSpectra> site_pair;
  if (psi.is_iid()) site_pair = commuting_spectra(psi.as_iid().rho1, phi1);
  const bool classical_vectors = psi.is_classical() && phi1.is_diagonal();
  if (!site_pair && !classical_vectors) checked_power_dim(psi.site_dim(), n_max, options.dim_cap);

  std::vector<SteinRow> rows;
  for (int n = 1; n <= n_max; ++n) {
    SteinRow row;
    row.n = n;
    BetaBracket b;
    ExtendedReal s_n;
    if (site_pair) {
      b = iid_type_bracket(site_pair->p, site_pair->q, n, epsilon);
      const ExtendedReal s1 = classical_kl(site_pair->p, site_pair->q, 1e-9);
      s_n = s1.is_infinite() ? s1 : ExtendedReal::finite(n * s1.value());
    } else if (classical_vectors) {
      const RealVector p = classical_block(psi, n);
      const RealVector q = classical_block(phi, n);
      const std::span<const double> ps(p.data(), static_cast<std::size_t>(p.size()));
      const std::span<const double> qs(q.data(), static_cast<std::size_t>(q.size()));
      b = classical_np_exact(ps, qs, epsilon);
      s_n = classical_kl(ps, qs, 1e-9);
    } else {
      const DensityOperator dpsi = block_density(psi, n, options.dim_cap);
      const DensityOperator dphi = tensor_power(phi1, n, options.dim_cap);
      b = beta_bracket(dpsi, dphi, epsilon, options.lambda_grid_size);
      s_n = relative_entropy(dpsi, dphi);
    }
    row.beta_lo_per_n = b.beta_lo / n;
    row.beta_hi_per_n = b.beta_hi / n;
    row.tight = b.tight;
    row.s_target = s_target;
    row.gap = std::abs(-row.beta_hi_per_n - s_target);
    row.block_relative_entropy = s_n.value();
    row.converse_bound = weak_converse_bound(s_n, epsilon) / n;
    row.converse_ok = -row.beta_lo_per_n <= row.converse_bound + 1e-9;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qstein
