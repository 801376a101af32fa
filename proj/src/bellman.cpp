#include "rapc/bellman.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rapc/errors.hpp"

namespace rapc {

namespace {

double clamp_gh(const FiniteMdp& mdp, std::size_t s, double continuation) {
  const auto i = static_cast<Eigen::Index>(s);
  return std::max(mdp.h_values[i], std::min(mdp.g_values[i], continuation));
}

enum class Branch { kLow, kHigh, kLinear };

}  // namespace

ValueTable clamped_backup(const FiniteMdp& mdp, const TabularPolicy& policy, const ValueTable& v) {
  const Matrix next = expected_next_values(mdp, v);
  ValueTable out(static_cast<Eigen::Index>(mdp.n_states));
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto i = static_cast<Eigen::Index>(s);
    const double e = policy.probs.row(i).dot(next.row(i));
    out[i] = clamp_gh(mdp, s, mdp.gamma * e);
  }
  return out;
}

long default_max_sweeps(double gamma, double tol) {
  if (!(tol > 0.0 && tol < 1.0)) throw std::invalid_argument("default_max_sweeps: tol must lie in (0, 1)");
  return 10 * static_cast<long>(std::ceil(std::log(tol) / std::log(gamma)));
}

FixedPointResult solve_fixed_point(const FiniteMdp& mdp, const TabularPolicy& policy, double tol,
                                   long max_sweeps) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_fixed_point: tol must be positive");
  if (max_sweeps <= 0) max_sweeps = default_max_sweeps(mdp.gamma, std::min(tol, 0.5));
  FixedPointResult out;
  out.values = ValueTable::Zero(static_cast<Eigen::Index>(mdp.n_states));
  double change = 0.0;
  for (long k = 1; k <= max_sweeps; ++k) {
    ValueTable next = clamped_backup(mdp, policy, out.values);
    change = (next - out.values).lpNorm<Eigen::Infinity>();
    out.values = std::move(next);
    if (change <= tol) {
      out.iterations = k;
      out.residual = change;
      return out;
    }
  }
  throw ConvergenceError("solve_fixed_point: sweep cap reached", change, max_sweeps);
}

ValueTable polish_fixed_point(const FiniteMdp& mdp, const TabularPolicy& policy, const ValueTable& v) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  const Matrix induced = induced_transition(mdp, policy);
  const ValueTable cont = mdp.gamma * (induced * v);

  std::vector<Branch> branch(mdp.n_states);
  Matrix a = Matrix::Identity(n, n);
  Vector b = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lo = mdp.h_values[i];
    const double hi = mdp.g_values[i];
    if (std::min(hi, cont[i]) <= lo) {
      branch[i] = Branch::kLow;
      b[i] = lo;
    } else if (cont[i] >= hi) {
      branch[i] = Branch::kHigh;
      b[i] = hi;
    } else {
      branch[i] = Branch::kLinear;
      a.row(i) -= mdp.gamma * induced.row(i);
    }
  }
  const ValueTable w = Eigen::PartialPivLU<Matrix>(a).solve(b);
  if (!w.allFinite()) return v;

  // Accept only if w is itself a fixed point to rounding level.
  const ValueTable bw = clamped_backup(mdp, policy, w);
  const double scale = std::max(1.0, w.lpNorm<Eigen::Infinity>());
  if ((bw - w).lpNorm<Eigen::Infinity>() > 1e-13 * scale) return v;
  return w;
}

QTable q_from_v(const FiniteMdp& mdp, const ValueTable& v) {
  QTable q = mdp.gamma * expected_next_values(mdp, v);
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      auto& x = q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      x = clamp_gh(mdp, s, x);
    }
  return q;
}

ValueTable certificate_bound(const ValueTable& v, double big_m) {
  if (!(big_m > 0.0)) throw std::invalid_argument("certificate_bound: big_m must be positive");
  return (-v / big_m).cwiseMax(0.0);
}

NormalizedEstimate normalized_estimate(const ValueTable& v, const ValueTable& phi, double big_m,
                                       double floor) {
  if (!(floor > 0.0)) throw std::invalid_argument("normalized_estimate: floor must be positive");
  if (phi.size() != v.size()) throw std::invalid_argument("normalized_estimate: size mismatch");
  NormalizedEstimate out;
  out.raw = -v.array() / (big_m * phi.array().max(floor));
  out.clipped = out.raw.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

std::vector<bool> feasible_set(const ValueTable& v, const ValueTable& phi, double big_m, double p) {
  if (phi.size() != v.size()) throw std::invalid_argument("feasible_set: size mismatch");
  std::vector<bool> mask(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    mask[static_cast<std::size_t>(i)] = v[i] <= -p * big_m * phi[i] && phi[i] >= 0.0;
  return mask;
}

ValueTable phi_for_division(const CompensationTable& phi, double floor) {
  ValueTable out(static_cast<Eigen::Index>(phi.values.size()));
  for (std::size_t s = 0; s < phi.values.size(); ++s)
    out[static_cast<Eigen::Index>(s)] = std::max(phi.values[s].value_or(floor), floor);
  return out;
}

CertificateReport certify(const FiniteMdp& mdp, const TabularPolicy& policy, double p,
                          const CertifyOptions& options) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("certify: p must lie in (0, 1)");
  validate_policy(policy, mdp);
  const FixedPointResult fp = solve_fixed_point(mdp, policy, options.tol);
  const CompensationTable phi = compensation_exact(mdp, policy);

  CertificateReport r;
  r.value_table = fp.values;
  r.iterations = fp.iterations;
  r.residual = fp.residual;
  r.threshold_p = p;
  r.bound = certificate_bound(fp.values, mdp.big_m);
  r.phi_used = phi_for_division(phi, options.floor);
  r.phi_defined.resize(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) r.phi_defined[s] = phi.defined(s);
  r.p_hat = normalized_estimate(fp.values, r.phi_used, mdp.big_m, options.floor);
  r.feasible_mask = feasible_set(fp.values, r.phi_used, mdp.big_m, p);
  return r;
}

}  // namespace rapc
