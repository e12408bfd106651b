// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Tolerances and instance parameters are fixed here.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qstein/aep.hpp"
#include "qstein/entropy.hpp"
#include "qstein/ergodic.hpp"
#include "qstein/hypothesis_testing.hpp"
#include "qstein/pinching.hpp"
#include "qstein/random.hpp"

namespace fs = std::filesystem;
using namespace qstein;

namespace {

constexpr double kHiaiPetzTol = 1e-8;
constexpr double kChainTol = 1e-9;
constexpr double kCrossTermTol = 1e-9;
constexpr double kConverseSlack = 1e-9;
constexpr double kCollapseTol = 1e-10;
constexpr double kBlochTol = 1e-3;
constexpr int kBlochPoints = 10000;
constexpr double kWindowSlack = 1e-12;
constexpr double kMixtureTol = 1e-10;
constexpr double kScalingTol = 1e-9;

constexpr double kIidTarget = 0.368064;
constexpr double kMarkovTarget = 0.309624;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::string failed;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    failed += (failed.empty() ? "" : "; ") + what;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

RealMatrix standard_chain() {
  RealMatrix p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  return p;
}

Matrix hadamard() {
  Matrix h(2, 2);
  h << 1, 1, 1, -1;
  return h / std::sqrt(2.0);
}

const DensityOperator& phi73() {
  static const DensityOperator d = DensityOperator::diagonal(std::vector<double>{0.7, 0.3});
  return d;
}

StateModel uniform_qubit() { return StateModel::iid(DensityOperator::maximally_mixed(2)); }
StateModel iid91() { return StateModel::iid(DensityOperator::diagonal(std::vector<double>{0.9, 0.1})); }

// Random instances shared by criteria 1 and 2.
std::vector<std::pair<int, HiaiPetzReport>> hiai_petz_instances() {
  std::vector<std::pair<int, HiaiPetzReport>> out;
  Rng rng(20240101);
  for (int n = 1; n <= 5; ++n)
    for (int t = 0; t < 20; ++t) out.emplace_back(n, hiai_petz_audit(random_density(Index{1} << n, rng), phi73(), n));
  return out;
}

Outcome criterion1(const std::vector<std::pair<int, HiaiPetzReport>>& reports, double elapsed) {
  Outcome o;
  double worst = 0, gap_lo = 1e300, gap_hi_ratio = 0;
  for (const auto& [n, r] : reports) {
    worst = std::max(worst, r.residual);
    gap_lo = std::min(gap_lo, r.pinch_gap);
    gap_hi_ratio = std::max(gap_hi_ratio, r.pinch_gap / (2 * std::log(n + 1.0)));
    o.require(r.residual <= kHiaiPetzTol, "residual at n=" + std::to_string(n));
    o.require(r.pinch_gap >= 0 && r.pinch_gap <= 2 * std::log(n + 1.0), "pinch gap range at n=" + std::to_string(n));
  }
  o.require(elapsed <= 60, "runtime");
  o.detail << "100 instances, max residual " << worst << ", min gap " << gap_lo << ", max gap/bound "
           << gap_hi_ratio << ", " << elapsed << " s";
  return o;
}

Outcome criterion2(const std::vector<std::pair<int, HiaiPetzReport>>& reports) {
  Outcome o;
  double worst_db = -1e300, worst_bl = -1e300;
  for (const auto& [n, r] : reports) {
    const double db = r.d_term.value() - r.b_term.value();
    const double bl = r.b_term.value() - r.lhs.value();
    worst_db = std::max(worst_db, db);
    worst_bl = std::max(worst_bl, bl);
    o.require(db <= kChainTol && bl <= kChainTol, "chain at n=" + std::to_string(n));
  }
  o.detail << "max S(D)-S(B) " << worst_db << ", max S(B)-S " << worst_bl;
  return o;
}

Outcome criterion3() {
  Outcome o;
  Rng rng(303);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const int n = 1 + t % 3;
    const TypeClassDecomposition tcd = build_type_classes(phi73(), n);
    const CrossTermCheck c =
        cross_term_identity_check(random_density(tcd.dim(), rng), tcd, tensor_power(phi73(), n));
    worst = std::max(worst, c.residual);
  }
  o.require(worst <= kCrossTermTol, "residual");
  o.detail << "50 instances, max residual " << worst;
  return o;
}

Outcome criterion4() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::vector<double> q{0.5, 0.5};
  const MarkovLiftModel chain = StateModel::markov(standard_chain()).as_markov();
  const LLRSample large = classical_llr_trajectories(chain, q, 2000, 200, 1);
  const LLRSample small = classical_llr_trajectories(chain, q, 200, 200, 1);
  const double elapsed = seconds_since(t0);
  const double z = std::abs(large.mean() - kMarkovTarget) / large.standard_error();
  o.require(z <= 3.0, "mean within 3 se");
  o.require(large.variance() < small.variance(), "variance decrease");
  o.require(large.infinite_count() == 0, "finite values");
  o.require(elapsed <= 30, "runtime");
  o.detail << "mean " << large.mean() << ", se " << large.standard_error() << ", |z| " << z << ", var(200) "
           << small.variance() << ", var(2000) " << large.variance() << ", " << elapsed << " s";
  return o;
}

void stein_protocol(Outcome& o, const std::string& label, const StateModel& psi, double target, int baseline_n) {
  const auto rows = stein_scan(psi, uniform_qubit(), 0.1, 12);
  const SteinRow& base = rows[static_cast<std::size_t>(baseline_n - 1)];
  const SteinRow& last = rows.back();
  o.require(std::abs(last.s_target - target) <= 1e-6, label + " target");
  o.require(last.gap < base.gap, label + " gap_12 < gap_" + std::to_string(baseline_n));
  for (const SteinRow& r : rows) {
    // Weak converse recomputed from the exact block relative entropy.
    const double bound = (r.block_relative_entropy / r.n + std::log(2.0) / r.n) / 0.9;
    o.require(-r.beta_lo_per_n <= bound + kConverseSlack, label + " converse at n=" + std::to_string(r.n));
  }
  o.detail << label << ": gap_" << baseline_n << " " << base.gap << ", gap_12 " << last.gap << " (-beta_hi/12 "
           << -last.beta_hi_per_n << "); ";
}

Outcome criterion5() {
  Outcome o;
  const auto t0 = Clock::now();
  stein_protocol(o, "iid", iid91(), kIidTarget, 2);
  stein_protocol(o, "markov", StateModel::markov(standard_chain()), kMarkovTarget, 4);
  const double elapsed = seconds_since(t0);
  o.require(elapsed <= 120, "runtime");
  o.detail << elapsed << " s";
  return o;
}

Outcome criterion6() {
  Outcome o;
  double worst_collapse = 0, worst_exact = 0;
  auto check_commuting = [&](const DensityOperator& psi, const DensityOperator& phi, const std::vector<double>& p,
                             const std::vector<double>& q) {
    const BetaBracket b = beta_bracket(psi, phi, 0.1);
    const BetaBracket exact = classical_np_exact(p, q, 0.1);
    worst_collapse = std::max(worst_collapse, std::abs(b.beta_hi - b.beta_lo));
    worst_exact = std::max(worst_exact, std::abs(b.beta_hi - exact.beta_hi));
  };
  // Product blocks up to 2^12 = 4096 dimensions.
  const DensityOperator site = DensityOperator::diagonal(std::vector<double>{0.9, 0.1});
  const StateModel markov = StateModel::markov(standard_chain());
  for (int n : {2, 6, 10, 12}) {
    for (const DensityOperator& psi : {tensor_power(site, n), block_density(markov, n)}) {
      const DensityOperator phi = tensor_power(DensityOperator::maximally_mixed(2), n);
      const RealVector pd = psi.diagonal_entries(), qd = phi.diagonal_entries();
      check_commuting(psi, phi, {pd.data(), pd.data() + pd.size()}, {qd.data(), qd.data() + qd.size()});
    }
  }
  // Commuting pairs in a rotated basis.
  Rng rng(606);
  for (Index dim : {4, 16, 64}) {
    std::vector<double> p(static_cast<std::size_t>(dim)), q(p.size());
    double tp = 0, tq = 0;
    for (std::size_t i = 0; i < p.size(); ++i) tp += (p[i] = rng.uniform() + 1e-3), tq += (q[i] = rng.uniform() + 1e-3);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] /= tp, q[i] /= tq;
    const Matrix u = random_unitary(dim, rng);
    check_commuting(DensityOperator(u * DensityOperator::diagonal(p).matrix() * u.adjoint()),
                    DensityOperator(u * DensityOperator::diagonal(q).matrix() * u.adjoint()), p, q);
  }
  o.require(worst_collapse <= kCollapseTol, "collapse");
  o.require(worst_exact <= kCollapseTol, "equals classical exact");

  double worst_scan = 0;
  std::vector<std::pair<DensityOperator, DensityOperator>> pairs;
  pairs.emplace_back(DensityOperator(hadamard() * DensityOperator::diagonal(std::vector<double>{0.9, 0.1}).matrix() *
                                     hadamard().adjoint()),
                     phi73());
  for (int t = 0; t < 10; ++t) pairs.emplace_back(random_density(2, rng), random_density(2, rng));
  for (const auto& [psi, phi] : pairs) {
    const double scan = std::log(oracle::bloch_scan_min(psi.matrix(), phi.matrix(), 0.15, kBlochPoints));
    worst_scan = std::max(worst_scan, std::abs(beta_bracket(psi, phi, 0.15).beta_hi - scan));
  }
  o.require(worst_scan <= kBlochTol, "Bloch scan");
  o.detail << "max |hi-lo| " << worst_collapse << ", max |hi-exact| " << worst_exact << ", max |hi-scan| "
           << worst_scan << " over " << pairs.size() << " qubit pairs";
  return o;
}

void check_report(Outcome& o, const SeparatingProjectorReport& r) {
  double pm = 0, fm = 0;
  for (Index a : r.selected_atoms) {
    const double wp = r.atom_psi_weights[static_cast<std::size_t>(a)];
    const double wf = r.atom_phi_weights[static_cast<std::size_t>(a)];
    pm += wp;
    fm += wf;
    const bool inside = wp > std::exp(-r.n * (r.s_psi + r.epsilon)) * (1 - kWindowSlack) &&
                        wp < std::exp(-r.n * (r.s_psi - r.epsilon)) * (1 + kWindowSlack) &&
                        wf > std::exp(-r.n * (r.s_psi + r.s_rel + r.epsilon)) * (1 - kWindowSlack) &&
                        wf < std::exp(-r.n * (r.s_psi + r.s_rel - r.epsilon)) * (1 + kWindowSlack);
    if (!inside) {
      o.require(false, "window at n=" + std::to_string(r.n));
      break;
    }
  }
  o.require(std::abs(pm - r.psi_mass) <= 1e-10 && std::abs(fm - r.phi_mass) <= 1e-10,
            "mass bookkeeping at n=" + std::to_string(r.n));
}

double binomial_oracle_mass(int n, double eps) {
  const double s = -0.9 * std::log(0.9) - 0.1 * std::log(0.1);
  double mass = 0;
  for (int k = 0; k <= n; ++k) {
    const double w = std::pow(0.9, n - k) * std::pow(0.1, k);
    const double stat = -std::log(w) / n;
    // Relative window: phi weight 2^-n sits exactly at s + s_rel = log 2.
    if (std::abs(stat - s) < eps) mass += oracle::binomial(n, k) * w;
  }
  return mass;
}

Outcome criterion7() {
  Outcome o;
  std::vector<double> masses;
  for (int n : {4, 8, 12}) {
    const SeparatingProjectorReport r = build_separating_projector(iid91(), uniform_qubit(), n, 0.15);
    check_report(o, r);
    const double oracle_mass = binomial_oracle_mass(n, 0.15);
    o.require(std::abs(r.psi_mass - oracle_mass) <= 1e-12, "binomial oracle at n=" + std::to_string(n));
    masses.push_back(r.psi_mass);
  }
  o.require(masses[0] <= masses[1] && masses[1] <= masses[2], "nondecreasing");
  o.require(masses[2] >= 0.9, "mass >= 0.9 at n=12");
  o.detail << "iid masses n=4,8,12: " << masses[0] << ", " << masses[1] << ", " << masses[2] << "; ";

  const StateModel rotated = StateModel::rotated_markov(standard_chain(), hadamard());
  const StateModel phi = StateModel::iid(phi73());
  const SeparatingProjectorReport r4 = build_separating_projector(rotated, phi, 4, 0.25);
  const SeparatingProjectorReport r8 = build_separating_projector(rotated, phi, 8, 0.25);
  for (const auto* r : {&r4, &r8}) {
    check_report(o, *r);
    const Matrix p = r->projector();
    const double trace_phi = (tensor_power(phi73(), r->n).matrix() * p).trace().real();
    o.require(std::abs(trace_phi - r->phi_mass) <= 1e-10, "operator phi mass at n=" + std::to_string(r->n));
  }
  o.require(r8.psi_mass >= r4.psi_mass, "rotated mass n=8 >= n=4");
  o.detail << "rotated masses n=4,8: " << r4.psi_mass << ", " << r8.psi_mass;
  return o;
}

Outcome criterion8() {
  Outcome o;
  // Window half-width for the separating projectors. Narrower windows
  // leave no eigenvalue above the threshold at either size.
  constexpr double kEps = 0.25;
  constexpr double kDelta = 0.1;
  const StateModel psi = StateModel::markov(standard_chain());
  std::vector<TruncationSplit> splits;
  for (int n : {5, 10}) {
    const SeparatingProjectorReport r = build_separating_projector(psi, uniform_qubit(), n, kEps);
    splits.push_back(truncate_separating(r, psi, kDelta));
    const TruncationSplit& t = splits.back();
    o.require(static_cast<double>(t.discarded.size()) < t.count_bound, "count bound at n=" + std::to_string(n));
  }
  o.require(splits[1].discarded_mass < splits[0].discarded_mass, "discarded mass decreases");
  o.detail << "eps " << kEps << ", discarded n=5 " << splits[0].discarded_mass << " (" << splits[0].discarded.size()
           << " < " << splits[0].count_bound << "), n=10 " << splits[1].discarded_mass << " ("
           << splits[1].discarded.size() << " < " << splits[1].count_bound << ")";
  return o;
}

Outcome criterion9() {
  Outcome o;
  RealMatrix cycle(2, 2);
  cycle << 0, 1, 1, 0;
  const GlDecomposition d = gl_decompose(StateModel::markov(cycle), 2);
  o.require(d.k_l == 2 && d.divides(), "k_l = 2 divides l");
  const ComponentAudit a = component_audit(d, uniform_qubit(), 6);
  o.require(a.mixture_residual <= kMixtureTol, "mixture");
  double max_rate = 0;
  for (const ComponentRow& r : a.rows) max_rate = std::max(max_rate, std::abs(r.entropy_rate));
  for (double h : a.closed_form_entropy) max_rate = std::max(max_rate, std::abs(h));
  o.require(max_rate == 0.0, "component entropy rates exactly 0");
  const GlDecomposition aperiodic = gl_decompose(StateModel::markov(standard_chain()), 2);
  o.require(aperiodic.k_l == 1, "aperiodic k_l = 1");
  const ComponentAudit b = component_audit(aperiodic, uniform_qubit(), 3);
  o.require(b.blocked_rel_rate.has_value() && std::abs(*b.blocked_rel_rate - 2 * kMarkovTarget) <= 1e-6 &&
                b.scaling_residual <= kScalingTol,
            "scaling");
  o.detail << "k_l " << d.k_l << ", mixture residual " << a.mixture_residual << ", max |entropy rate| " << max_rate
           << ", aperiodic k_l " << aperiodic.k_l << ", s(G_2) " << b.blocked_rel_rate.value_or(NAN)
           << ", scaling residual " << b.scaling_residual;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome criterion10() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "qstein_acceptance_determinism";
  fs::remove_all(root);
  int configs = 0;
  for (const auto& entry : fs::directory_iterator(QSTEIN_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    ++configs;
    const std::string stem = entry.path().stem().string();
    for (const char* run : {"a", "b"}) {
      const fs::path dir = root / stem / run;
      fs::create_directories(dir);
      const std::string cmd = std::string("\"") + QSTEIN_CLI_PATH + "\" --config \"" + entry.path().string() +
                              "\" --out \"" + dir.string() + "\" > /dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
      o.require(code == 0 || code == 1, stem + " ran");
    }
    for (const auto& csv : fs::directory_iterator(root / stem / "a")) {
      const std::string first = slurp(csv.path());
      o.require(!first.empty() && first == slurp(root / stem / "b" / csv.path().filename()), stem + " identical");
    }
  }
  o.detail << configs << " configs rerun";
  return o;
}

}  // namespace

int main() {
  std::cout.precision(6);
  int failures = 0;
  auto report = [&](int k, const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << name << ": " << o.detail.str();
    if (!o.failed.empty()) std::cout << " [failed: " << o.failed << "]";
    std::cout << std::endl;
  };

  const auto t0 = Clock::now();
  const auto reports = hiai_petz_instances();
  const double hp_elapsed = seconds_since(t0);
  report(1, "pinching entropy identity", [&] { return criterion1(reports, hp_elapsed); });
  report(2, "monotonicity chain", [&] { return criterion2(reports); });
  report(3, "cross-term identity", criterion3);
  report(4, "classical relative AEP", criterion4);
  report(5, "Stein exponent trend", criterion5);
  report(6, "quantum/classical consistency", criterion6);
  report(7, "separating projector", criterion7);
  report(8, "truncation decay", criterion8);
  report(9, "ergodic decomposition", criterion9);
  report(10, "determinism", criterion10);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
