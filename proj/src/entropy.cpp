#include "qstein/entropy.hpp"

#include <cmath>
#include <sstream>

#include "qstein/errors.hpp"

namespace qstein {

double shannon_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

double von_neumann_entropy(const DensityOperator& rho) {
  const RealVector& ev = rho.spectrum().values();
  double h = 0.0;
  for (Index k = 0; k < ev.size(); ++k)
    if (ev(k) > kSupportFloor) h -= ev(k) * std::log(ev(k));
  return std::max(h, 0.0);
}

namespace {

double clamp_divergence(double value, const char* what) {
  if (value >= 0.0) return value;
  if (value >= -kNegativeClamp) return 0.0;
  std::ostringstream os;
  os << what << ": negative divergence " << value << " beyond float noise";
  throw NumericalError(os.str());
}

}  // namespace

ExtendedReal relative_entropy(const DensityOperator& sigma, const DensityOperator& tau,
                              double support_leak_tol) {
  if (sigma.dim() != tau.dim()) {
    std::ostringstream os;
    os << "relative_entropy: dimension mismatch " << sigma.dim() << " vs " << tau.dim();
    throw InvalidArgument(os.str());
  }
  const EigenSystem& tau_spec = tau.spectrum();
  const RealVector sigma_in_tau = tau_spec.expectations(sigma.matrix());

  double leak = 0.0;
  double cross = 0.0;
  for (Index k = 0; k < tau_spec.dim(); ++k) {
    const double t = tau_spec.values()(k);
    if (t > kSupportFloor) {
      cross += sigma_in_tau(k) * std::log(t);
    } else {
      leak += sigma_in_tau(k);
    }
  }
  if (leak > support_leak_tol) return ExtendedReal::infinity();

  const double self = -von_neumann_entropy(sigma);
  return ExtendedReal::finite(clamp_divergence(self - cross, "relative_entropy"));
}

void validate_simplex(std::span<const double> p, double tol, const char* what) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= -tol)) {
      std::ostringstream os;
      os << what << ": negative entry " << x;
      throw InvalidArgument(os.str());
    }
    sum += x;
  }
  if (!(std::abs(sum - 1.0) <= tol)) {
    std::ostringstream os;
    os << what << ": entries sum to " << sum << ", not 1 within " << tol;
    throw InvalidArgument(os.str());
  }
}

ExtendedReal classical_kl(std::span<const double> p, std::span<const double> q, double simplex_tol) {
  if (p.size() != q.size()) throw InvalidArgument("classical_kl: length mismatch");
  validate_simplex(p, simplex_tol, "classical_kl(p)");
  validate_simplex(q, simplex_tol, "classical_kl(q)");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return ExtendedReal::infinity();
    d += p[i] * std::log(p[i] / q[i]);
  }
  return ExtendedReal::finite(clamp_divergence(d, "classical_kl"));
}

ExtendedReal block_relative_entropy(const StateModel& psi, const DensityOperator& phi1, int n,
                                    Index dim_cap) {
  if (phi1.dim() != psi.site_dim()) throw InvalidArgument("block_relative_entropy: site dimension mismatch");
  if (psi.is_classical() && phi1.is_diagonal()) {
    const RealVector p = classical_block(psi, n);
    const RealVector q1 = phi1.diagonal_entries();
    std::vector<double> site(q1.data(), q1.data() + q1.size());
    const RealVector q = markov_block_probabilities(
        site, RealMatrix(RealVector::Ones(q1.size()) * q1.transpose()), n);
    return classical_kl(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                        std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), 1e-9);
  }
  return relative_entropy(block_density(psi, n, dim_cap), tensor_power(phi1, n, dim_cap));
}

MeanRelEntropySequence mean_relative_entropy_sequence(const StateModel& psi, const StateModel& phi,
                                                      int n_max, Index dim_cap) {
  if (!phi.is_iid()) throw InvalidArgument("mean_relative_entropy_sequence: phi must be i.i.d.");
  if (n_max < 1) throw InvalidArgument("mean_relative_entropy_sequence: n_max must be >= 1");
  if (!(psi.is_classical() && phi.as_iid().rho1.is_diagonal()))
    checked_power_dim(psi.site_dim(), n_max, dim_cap);

  MeanRelEntropySequence seq;
  for (int n = 1; n <= n_max; ++n) {
    const ExtendedReal s = block_relative_entropy(psi, phi.as_iid().rho1, n, dim_cap);
    if (s.is_infinite()) {
      seq.infinite = true;
      seq.first_infinite_n = n;
      seq.sup_estimate = s.value();
      return seq;
    }
    const double per_site = s.value() / n;
    if (!seq.values.empty() && per_site < seq.values.back().second - MeanRelEntropySequence::kMonotoneSlack)
      seq.monotone = false;
    seq.values.emplace_back(n, per_site);
  }
  seq.sup_estimate = seq.values.back().second;
  return seq;
}

}  // namespace qstein
