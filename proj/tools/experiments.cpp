#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "qstein/aep.hpp"
#include "qstein/cli.hpp"
#include "qstein/csv.hpp"
#include "qstein/entropy.hpp"
#include "qstein/ergodic.hpp"
#include "qstein/errors.hpp"
#include "qstein/hypothesis_testing.hpp"
#include "qstein/pinching.hpp"
#include "qstein/random.hpp"

namespace qstein::cli {

namespace {

[[noreturn]] void config_fail(const ExperimentConfig& c, const std::string& key, const std::string& message) {
  throw ConfigError(c.source, 0, key, message);
}

const ModelConfig& need_model(const ExperimentConfig& c, const std::optional<ModelConfig>& m, const char* role) {
  if (!m) config_fail(c, role, std::string("experiment '") + c.experiment + "' needs a [" + role + "] section");
  return *m;
}

int need_int(const ExperimentConfig& c, const std::optional<int>& v, const char* key) {
  if (!v) config_fail(c, key, std::string("experiment '") + c.experiment + "' needs '" + key + "'");
  return *v;
}

void need_epsilon_open(const ExperimentConfig& c) {
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) config_fail(c, "epsilon", "must lie in (0, 1)");
}

StateModel need_iid_phi(const ExperimentConfig& c) {
  StateModel phi = build_model(need_model(c, c.phi, "phi"), "phi");
  if (!phi.is_iid()) config_fail(c, "phi", "reference state must have variant = iid");
  return phi;
}

bool classical_pair(const StateModel& psi, const StateModel& phi) {
  return psi.is_classical() && phi.is_iid() && phi.as_iid().rho1.is_diagonal();
}

std::vector<int> block_lengths(const ExperimentConfig& c) {
  if (c.n_max) {
    std::vector<int> out;
    for (int n = 1; n <= *c.n_max; ++n) out.push_back(n);
    return out;
  }
  return {need_int(c, c.n, "n")};
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  std::string csv;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

// ---------------------------------------------------------------------------

Outcome entropy_rates(const ExperimentConfig& c) {
  const StateModel psi = build_model(need_model(c, c.psi, "psi"), "psi");
  const StateModel phi = need_iid_phi(c);
  const int n_max = need_int(c, c.n_max, "n_max");
  const RateReport rates = rate_report(psi, phi);
  const bool classical = classical_pair(psi, phi);
  Outcome o;
  std::ostringstream os;
  os << "n,entropy_per_site,rel_entropy_per_site,s_psi,s_rel\n";
  for (int n = 1; n <= n_max; ++n) {
    double entropy = 0.0;
    if (classical) {
      const RealVector p = classical_block(psi, n);
      entropy = shannon_entropy(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
    } else {
      entropy = von_neumann_entropy(block_density(psi, n, c.dim_cap));
    }
    const ExtendedReal rel = block_relative_entropy(psi, phi.as_iid().rho1, n, c.dim_cap);
    const double rel_rate = rel.is_infinite() ? rel.value() : rel.value() / n;
    os << n << ',' << csv::real(entropy / n) << ',' << csv::real(rel_rate) << ',' << csv::real(rates.mean_entropy)
       << ',' << csv::real(rates.mean_relative_entropy.value()) << '\n';
    if (rates.method == RateMethod::kClosedForm) {
      o.check(entropy / n >= rates.mean_entropy - 1e-9, "S_n/n >= s(psi) at n=" + std::to_string(n));
      o.check(rel_rate <= rates.mean_relative_entropy.value() + 1e-9, "S(psi_n,phi_n)/n <= s(psi,phi) at n=" + std::to_string(n));
    }
  }
  o.note("s_psi=" + fmt(rates.mean_entropy) + " s_rel=" + fmt(rates.mean_relative_entropy.value()));
  o.csv = os.str();
  return o;
}

Outcome pinch_audit(const ExperimentConfig& c) {
  const StateModel phi = need_iid_phi(c);
  const ModelConfig& pm = need_model(c, c.psi, "psi");
  const bool random = pm.variant == "random";
  std::optional<StateModel> psi;
  if (!random) psi = build_model(pm, "psi");
  const DensityOperator& phi1 = phi.as_iid().rho1;
  Rng rng(pm.seed.value_or(c.seed));

  Outcome o;
  std::ostringstream os;
  os << "n,trial,lhs,d_term,b_term,pinch_gap,bound,residual\n";
  double worst = 0.0;
  for (int n : block_lengths(c)) {
    const Index dim = checked_power_dim(phi1.dim(), n, c.dim_cap);
    const int trials = random ? c.trials : 1;
    for (int t = 0; t < trials; ++t) {
      const DensityOperator psi_n = random ? random_density(dim, rng) : block_density(*psi, n, c.dim_cap);
      const HiaiPetzReport r = hiai_petz_audit(psi_n, phi1, n);
      os << n << ',' << t << ',' << csv::real(r.lhs.value()) << ',' << csv::real(r.d_term.value()) << ','
         << csv::real(r.b_term.value()) << ',' << csv::real(r.pinch_gap) << ',' << csv::real(r.bound) << ','
         << csv::real(r.residual) << '\n';
      const std::string at = " (n=" + std::to_string(n) + ", trial " + std::to_string(t) + ")";
      if (!r.infinite_term.empty()) {
        o.note("infinite term " + r.infinite_term + at);
        continue;
      }
      worst = std::max(worst, r.residual);
      o.check(r.residual <= 1e-8, "residual <= 1e-8" + at);
      o.check(r.pinch_gap >= -1e-9 && r.pinch_gap <= r.bound + 1e-9, "0 <= pinch_gap <= d log(n+1)" + at);
      o.check(r.d_term.value() <= r.b_term.value() + 1e-9 && r.b_term.value() <= r.lhs.value() + 1e-9,
              "S(psi|D) <= S(psi|B) <= S(psi,phi)" + at);
    }
  }
  o.note("max residual=" + fmt(worst));
  o.csv = os.str();
  return o;
}

Outcome np_curve(const ExperimentConfig& c) {
  need_epsilon_open(c);
  const StateModel psi = build_model(need_model(c, c.psi, "psi"), "psi");
  const StateModel phi = build_model(need_model(c, c.phi, "phi"), "phi");
  const int n = need_int(c, c.n, "n");
  const DensityOperator dpsi = block_density(psi, n, c.dim_cap);
  const DensityOperator dphi = block_density(phi, n, c.dim_cap);
  const double lo = c.lambda_min.value_or(1e-3), hi = c.lambda_max.value_or(1e3);
  if (!(lo > 0.0 && hi > lo)) config_fail(c, "lambda_min", "need 0 < lambda_min < lambda_max");
  const int g = std::max(c.lambda_grid, 2);
  std::vector<double> lambdas;
  for (int i = 0; i < g; ++i) lambdas.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (g - 1)));

  Outcome o;
  std::ostringstream os;
  os << "lambda,type1,type2,rank\n";
  for (const TestPoint& tp : np_spectral_curve(dpsi, dphi, lambdas)) {
    os << csv::real(tp.lambda) << ',' << csv::real(tp.type1) << ',' << csv::real(tp.type2) << ',' << tp.rank << '\n';
    o.check(tp.type1 >= 0.0 && tp.type1 <= 1.0 && tp.type2 >= 0.0 && tp.type2 <= 1.0,
            "error probabilities in [0,1] at lambda=" + fmt(tp.lambda));
  }
  const BetaBracket b = beta_bracket(dpsi, dphi, c.epsilon, c.lambda_grid);
  o.check(b.beta_lo <= b.beta_hi + 1e-12, "beta_lo <= beta_hi");
  o.check(b.witness_psi_mass >= 1.0 - c.epsilon - 1e-10, "witness psi(q) >= 1 - eps");
  o.note("beta_lo=" + fmt(b.beta_lo) + " beta_hi=" + fmt(b.beta_hi) + " witness=" + b.witness_kind);
  o.csv = os.str();
  return o;
}

Outcome stein(const ExperimentConfig& c) {
  need_epsilon_open(c);
  const StateModel psi = build_model(need_model(c, c.psi, "psi"), "psi");
  const StateModel phi = need_iid_phi(c);
  const int n_max = need_int(c, c.n_max, "n_max");
  const auto rows = stein_scan(psi, phi, c.epsilon, n_max, {c.lambda_grid, c.dim_cap});
  Outcome o;
  std::ostringstream os;
  os << "n,beta_lo_per_n,beta_hi_per_n,s_target,gap,converse_bound,converse_ok\n";
  for (const SteinRow& r : rows) {
    os << r.n << ',' << csv::real(r.beta_lo_per_n) << ',' << csv::real(r.beta_hi_per_n) << ','
       << csv::real(r.s_target) << ',' << csv::real(r.gap) << ',' << csv::real(r.converse_bound) << ','
       << (r.converse_ok ? 1 : 0) << '\n';
    o.check(r.converse_ok, "weak converse at n=" + std::to_string(r.n));
    o.check(r.beta_lo_per_n <= r.beta_hi_per_n + 1e-12, "beta_lo <= beta_hi at n=" + std::to_string(r.n));
  }
  o.note("gap_" + std::to_string(n_max) + "=" + fmt(rows.back().gap) + " s_target=" + fmt(rows.back().s_target));
  o.csv = os.str();
  return o;
}

Outcome aep_classical(const ExperimentConfig& c) {
  const StateModel psi = build_model(need_model(c, c.psi, "psi"), "psi");
  const StateModel phi = need_iid_phi(c);
  if (!psi.is_markov()) config_fail(c, "psi", "aep-classical needs variant = markov");
  if (!phi.as_iid().rho1.is_diagonal()) config_fail(c, "phi", "aep-classical needs a diagonal reference");
  const int n = need_int(c, c.n, "n");
  const RealVector q = phi.as_iid().rho1.diagonal_entries();
  const std::vector<double> qv(q.data(), q.data() + q.size());
  const LLRSample s = classical_llr_trajectories(psi.as_markov(), qv, n, c.trials, c.seed);

  Outcome o;
  std::ostringstream os;
  write_llr_csv(os, s);
  const bool q_positive = std::all_of(qv.begin(), qv.end(), [](double x) { return x > 0.0; });
  if (q_positive) o.check(s.infinite_count() == 0, "finite log-likelihood ratios for strictly positive Q");
  else if (s.infinite_count() > 0) o.note(std::to_string(s.infinite_count()) + " trajectories with infinite ratio");
  o.note("mean=" + fmt(s.mean()) + " se=" + fmt(s.standard_error()) + " target=" + fmt(s.target.value()));
  o.csv = os.str();
  return o;
}

Outcome qaep_build(const ExperimentConfig& c) {
  const StateModel psi = build_model(need_model(c, c.psi, "psi"), "psi");
  const StateModel phi = need_iid_phi(c);
  const int n = need_int(c, c.n, "n");
  if (!(c.epsilon > 0.0)) config_fail(c, "epsilon", "must be positive");
  if (!(c.delta > 0.0)) config_fail(c, "delta", "must be positive");
  const SeparatingProjectorReport r = build_separating_projector(psi, phi, n, c.epsilon, c.dim_cap);

  Outcome o;
  std::ostringstream os;
  write_separating_csv(os, r);
  double psi_sum = 0.0, phi_sum = 0.0;
  const double lo_psi = std::exp(-n * (r.s_psi + c.epsilon)), hi_psi = std::exp(-n * (r.s_psi - c.epsilon));
  const double lo_phi = std::exp(-n * (r.s_psi + r.s_rel + c.epsilon));
  const double hi_phi = std::exp(-n * (r.s_psi + r.s_rel - c.epsilon));
  bool windows_ok = true;
  for (Index a : r.selected_atoms) {
    const double w = r.atom_psi_weights[static_cast<std::size_t>(a)];
    const double v = r.atom_phi_weights[static_cast<std::size_t>(a)];
    psi_sum += w;
    phi_sum += v;
    windows_ok = windows_ok && w > lo_psi * (1 - 1e-12) && w < hi_psi * (1 + 1e-12) && v > lo_phi * (1 - 1e-12) &&
                 v < hi_phi * (1 + 1e-12);
  }
  o.check(std::abs(psi_sum - r.psi_mass) <= 1e-10 && std::abs(phi_sum - r.phi_mass) <= 1e-10, "mass bookkeeping");
  o.check(windows_ok, "per-atom weight windows");
  if (!r.classical) {
    const Matrix p = r.projector(c.dim_cap);
    const double trace_phi = (tensor_power(phi.as_iid().rho1, n, c.dim_cap).matrix() * p).trace().real();
    o.check(std::abs(trace_phi - r.phi_mass) <= 1e-10, "tr(D_phi p) equals the selected phi weights");
  }
  const TruncationSplit t = truncate_separating(r, psi, c.delta);
  o.check(t.count_bound_ok, "count bound tr(p_Tc) < exp(n(s - delta))");
  o.note("psi_mass=" + fmt(r.psi_mass) + " phi_mass=" + fmt(r.phi_mass) + " atoms=" +
         std::to_string(r.selected_atoms.size()) + "/" + std::to_string(r.atom_count()) +
         " discarded=" + fmt(t.discarded_mass));
  o.csv = os.str();
  return o;
}

Outcome ergodic_audit(const ExperimentConfig& c) {
  const StateModel psi = build_model(need_model(c, c.psi, "psi"), "psi");
  const StateModel phi = need_iid_phi(c);
  const int n_max = c.n_max.value_or(3);
  const GlDecomposition dec = gl_decompose(psi, c.l);
  const ComponentAudit a = component_audit(dec, phi, n_max);
  Outcome o;
  std::ostringstream os;
  write_component_csv(os, a);
  o.check(a.divides, "k_l divides l");
  o.check(a.reachability_agrees, "k_l matches the l-step reachability classes");
  o.check(a.mixture_residual <= ComponentAudit::kMixtureTol, "mixture reconstructs psi");
  o.check(a.translate_residual <= ComponentAudit::kMixtureTol, "components are translates");
  o.check(a.closed_form_entropy_spread <= ComponentAudit::kTol && a.closed_form_rel_spread <= ComponentAudit::kTol,
          "equal component rates");
  o.check(a.closed_form_entropy_residual <= ComponentAudit::kTol && a.closed_form_rel_residual <= ComponentAudit::kTol,
          "component rates equal l times the mean rates");
  if (a.blocked_rel_rate) o.check(a.scaling_residual <= ComponentAudit::kTol, "s(psi,phi,G_l) = l s(psi,phi)");
  o.note("period=" + std::to_string(dec.period) + " k_l=" + std::to_string(dec.k_l) + " l=" + std::to_string(c.l));
  o.csv = os.str();
  return o;
}

using Experiment = std::function<Outcome(const ExperimentConfig&)>;

const std::map<std::string, Experiment>& registry() {
  static const std::map<std::string, Experiment> r{
      {"entropy-rates", entropy_rates}, {"pinch-audit", pinch_audit}, {"np-curve", np_curve},
      {"stein-scan", stein},            {"aep-classical", aep_classical}, {"qaep-build", qaep_build},
      {"ergodic-audit", ergodic_audit}};
  return r;
}

void check_caps(const ExperimentConfig& c, const std::optional<StateModel>& psi, const StateModel* phi) {
  const auto lengths = [&]() -> int {
    if (c.experiment == "ergodic-audit") return c.l * c.n_max.value_or(3);
    if (c.n_max) return *c.n_max;
    return c.n.value_or(1);
  }();
  if (!psi || phi == nullptr) return;
  const bool commuting_iid = psi->is_iid() && phi->is_iid() &&
                             psi->as_iid().rho1.is_diagonal() && phi->as_iid().rho1.is_diagonal();
  if (c.experiment == "stein-scan" && (commuting_iid || classical_pair(*psi, *phi))) return;
  if (c.experiment == "aep-classical") return;
  if (classical_pair(*psi, *phi) && c.experiment != "np-curve" && c.experiment != "pinch-audit") {
    checked_power_dim(psi->site_dim(), lengths, Index{1} << 22);
    return;
  }
  checked_power_dim(psi->site_dim(), lengths, c.dim_cap);
}

}  // namespace

void validate(const ExperimentConfig& c) {
  if (c.experiment.empty()) config_fail(c, "experiment", "missing");
  if (!(c.delta > 0.0)) config_fail(c, "delta", "must be positive");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) config_fail(c, "epsilon", "must lie in (0, 1)");
  if (c.n && c.n_max) config_fail(c, "n_max", "give either 'n' or 'n_max'");
  const bool needs_n = c.experiment == "np-curve" || c.experiment == "aep-classical" || c.experiment == "qaep-build";
  const bool needs_n_max = c.experiment == "entropy-rates" || c.experiment == "stein-scan";
  if (needs_n) need_int(c, c.n, "n");
  if (needs_n_max) need_int(c, c.n_max, "n_max");
  if (c.experiment == "pinch-audit" && !c.n && !c.n_max) config_fail(c, "n", "pinch-audit needs 'n' or 'n_max'");

  const ModelConfig& pm = need_model(c, c.psi, "psi");
  std::optional<StateModel> phi;
  phi = build_model(need_model(c, c.phi, "phi"), "phi");
  std::optional<StateModel> psi;
  if (pm.variant == "random") {
    if (c.experiment != "pinch-audit") config_fail(c, "psi", "variant = random is only valid for pinch-audit");
  } else {
    psi = build_model(pm, "psi");
    if (psi->site_dim() != phi->site_dim()) config_fail(c, "psi", "psi and phi have different site dimensions");
  }
  if (c.experiment != "np-curve" && !phi->is_iid()) config_fail(c, "phi", "reference state must have variant = iid");
  if (c.experiment == "pinch-audit") {
    const int n = c.n_max.value_or(c.n.value_or(1));
    checked_power_dim(phi->site_dim(), n, c.dim_cap);
  }
  check_caps(c, psi, &*phi);
}

RunResult run(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  RunResult result;
  try {
    validate(config);
    const Outcome o = registry().at(config.experiment)(config);
    std::filesystem::create_directories(out_dir);
    result.csv_path = out_dir / (config.output.empty() ? config.experiment + ".csv" : config.output);
    std::ofstream out(result.csv_path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + result.csv_path.string());
    out << o.csv;
    out.close();
    std::ostringstream s;
    s << config.experiment << ": " << (o.pass ? "PASS" : "FAIL");
    for (const auto& note : o.notes) s << "; " << note;
    result.summary = s.str();
    result.exit_code = o.pass ? 0 : 1;
  } catch (const std::exception& e) {
    result.exit_code = 2;
    result.summary = config.experiment + ": ERROR " + e.what();
  }
  return result;
}

}  // namespace qstein::cli
