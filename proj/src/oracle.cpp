#include "rapc/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "rapc/errors.hpp"
#include "rapc/rng.hpp"

namespace rapc {

namespace {

Vector policy_cost(const FiniteMdp& mdp, const TabularPolicy& policy, AbsorbingCost absorbing) {
  Vector c = (policy.probs.array() * mdp.cost.array()).rowwise().sum();
  if (absorbing == AbsorbingCost::kZero)
    for (std::size_t s = 0; s < mdp.n_states; ++s)
      if (mdp.is_boundary(s)) c[static_cast<Eigen::Index>(s)] = 0.0;
  return c;
}

std::size_t sample_row(Rng& rng, const Matrix& m, std::size_t row) {
  const auto r = m.row(static_cast<Eigen::Index>(row));
  const Vector w = r.transpose();
  return rng.categorical({w.data(), static_cast<std::size_t>(w.size())});
}

}  // namespace

ValueTable reach_avoid_sweep(const FiniteMdp& mdp, const Matrix& induced, const ValueTable& p) {
  ValueTable next = induced * p;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_target(s)) next[static_cast<Eigen::Index>(s)] = 1.0;
    else if (mdp.is_failure(s)) next[static_cast<Eigen::Index>(s)] = 0.0;
  }
  return next;
}

ValueTable reach_avoid_prob(const FiniteMdp& mdp, const TabularPolicy& policy,
                            const ReachAvoidOptions& options) {
  const Matrix induced = induced_transition(mdp, policy);
  ValueTable p = ValueTable::Zero(static_cast<Eigen::Index>(mdp.n_states));
  double previous_change = 0.0;
  for (long sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    ValueTable next = reach_avoid_sweep(mdp, induced, p);
    const double change = (next - p).lpNorm<Eigen::Infinity>();
    p = std::move(next);
    if (change <= options.tol) {
      // The iteration contracts geometrically once the transient phase has
      // passed; the remaining error is about change * r / (1 - r).
      const double ratio = previous_change > 0.0 ? change / previous_change : 0.0;
      if (change <= 1e-3 * options.tol || (ratio < 1.0 && change * ratio / (1.0 - ratio) <= options.tol)) {
        return p.cwiseMax(0.0).cwiseMin(1.0);
      }
    }
    previous_change = change;
  }
  throw ConvergenceError("reach_avoid_prob did not converge", previous_change, options.max_sweeps);
}

ValueTable indicator_value(const FiniteMdp& mdp, const TabularPolicy& policy, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("indicator_value: gamma must lie in (0, 1)");
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  Matrix a = Matrix::Identity(n, n);
  Vector b = Vector::Zero(n);
  const Matrix induced = induced_transition(mdp, policy);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto us = static_cast<std::size_t>(s);
    if (mdp.is_target(us)) b[s] = 1.0;
    else if (!mdp.is_failure(us)) a.row(s) -= gamma * induced.row(s);
  }
  Eigen::PartialPivLU<Matrix> lu(a);
  ValueTable v = lu.solve(b);
  if (!v.allFinite()) throw std::logic_error("indicator_value: singular system");
  return v;
}

CompensationTable compensation_exact(const FiniteMdp& mdp, const TabularPolicy& policy) {
  const ValueTable p = reach_avoid_prob(mdp, policy);
  const ValueTable v = indicator_value(mdp, policy, mdp.gamma);
  CompensationTable out;
  out.values.resize(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto is = static_cast<Eigen::Index>(s);
    if (p[is] > 1e-12) out.values[s] = std::min(1.0, std::max(0.0, v[is] / p[is]));
  }
  return out;
}

ValueTable discounted_cost(const FiniteMdp& mdp, const TabularPolicy& policy, AbsorbingCost absorbing) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  Matrix induced = induced_transition(mdp, policy);
  Vector c = policy_cost(mdp, policy, absorbing);
  if (absorbing == AbsorbingCost::kZero) {
    // Cost stops at absorption: no continuation out of target/failure states.
    for (std::size_t s = 0; s < mdp.n_states; ++s)
      if (mdp.is_boundary(s)) induced.row(static_cast<Eigen::Index>(s)).setZero();
  }
  const Matrix a = Matrix::Identity(n, n) - mdp.gamma * induced;
  return Eigen::PartialPivLU<Matrix>(a).solve(c);
}

Vector occupancy(const FiniteMdp& mdp, const TabularPolicy& policy, const Vector& rho,
                 OccupancyKind kind) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  if (rho.size() != n) throw std::invalid_argument("occupancy: rho has the wrong size");
  if ((rho.array() < 0.0).any() || std::abs(rho.sum() - 1.0) > kStochasticTol)
    throw std::invalid_argument("occupancy: rho must be a distribution");
  const Matrix induced = induced_transition(mdp, policy);
  Vector d;
  if (kind == OccupancyKind::kDiscounted) {
    const Matrix a = (Matrix::Identity(n, n) - mdp.gamma * induced).transpose();
    d = Eigen::PartialPivLU<Matrix>(a).solve(rho);
  } else {
    // The lazy chain (I + P) / 2 has the same Cesaro limit as P and is
    // aperiodic, so plain power iteration converges to it.
    const Matrix lazy = 0.5 * (Matrix::Identity(n, n) + induced);
    d = rho;
    for (long it = 0; it < 1'000'000; ++it) {
      Vector next = lazy.transpose() * d;
      const double change = (next - d).lpNorm<1>();
      d = std::move(next);
      if (change < 1e-15) break;
    }
  }
  return d / d.sum();
}

MonteCarloRa monte_carlo_ra(const FiniteMdp& mdp, const TabularPolicy& policy, std::size_t start,
                            std::size_t n_episodes, std::size_t horizon, std::uint64_t seed) {
  if (start >= mdp.n_states) throw std::invalid_argument("monte_carlo_ra: start out of range");
  if (n_episodes == 0) throw std::invalid_argument("monte_carlo_ra: need at least one episode");
  MonteCarloRa out;
  out.n_episodes = n_episodes;
  double hits = 0.0, disc_sum = 0.0, disc_sq = 0.0;
  for (std::size_t ep = 0; ep < n_episodes; ++ep) {
    Rng rng = Rng::substream(seed, ep);
    std::size_t x = start;
    double discount = 1.0;
    bool done = false;
    for (std::size_t t = 0; t <= horizon; ++t) {
      if (mdp.is_target(x)) {
        hits += 1.0;
        disc_sum += discount;
        disc_sq += discount * discount;
        done = true;
        break;
      }
      if (mdp.is_failure(x)) {
        done = true;
        break;
      }
      if (t == horizon) break;
      const std::size_t a = sample_row(rng, policy.probs, x);
      const auto next = mdp.next_distribution(x, a);
      x = rng.categorical(next);
      discount *= mdp.gamma;
    }
    if (!done) ++out.truncated;
  }
  const double n = static_cast<double>(n_episodes);
  out.estimate = hits / n;
  out.standard_error = std::sqrt(out.estimate * (1.0 - out.estimate) / n);
  out.discounted_estimate = disc_sum / n;
  const double var = std::max(0.0, disc_sq / n - out.discounted_estimate * out.discounted_estimate);
  out.discounted_standard_error = std::sqrt(var / n);
  return out;
}

MonteCarloReturn monte_carlo_cost(const FiniteMdp& mdp, const TabularPolicy& policy,
                                  std::size_t start, std::size_t n_episodes, std::size_t horizon,
                                  std::uint64_t seed, AbsorbingCost absorbing) {
  if (start >= mdp.n_states) throw std::invalid_argument("monte_carlo_cost: start out of range");
  if (n_episodes == 0) throw std::invalid_argument("monte_carlo_cost: need at least one episode");
  double sum = 0.0, sq = 0.0;
  for (std::size_t ep = 0; ep < n_episodes; ++ep) {
    Rng rng = Rng::substream(seed, ep);
    std::size_t x = start;
    double discount = 1.0, total = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      if (absorbing == AbsorbingCost::kZero && mdp.is_boundary(x)) break;
      const std::size_t a = sample_row(rng, policy.probs, x);
      total += discount * mdp.cost(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(a));
      x = rng.categorical(mdp.next_distribution(x, a));
      discount *= mdp.gamma;
    }
    sum += total;
    sq += total * total;
  }
  const double n = static_cast<double>(n_episodes);
  MonteCarloReturn out;
  out.n_episodes = n_episodes;
  out.mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sq - n * out.mean * out.mean) / (n - 1.0)) : 0.0;
  out.standard_error = std::sqrt(var / n);
  return out;
}

}  // namespace rapc
