#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rapc/mdp.hpp"

namespace rapc {

/// Exact ground-truth quantities for a fixed stationary policy.

/// Compensation factor per state; empty where the reach-avoid probability
/// is zero and the conditional expectation is undefined.
struct CompensationTable {
  std::vector<std::optional<double>> values;

  bool defined(std::size_t s) const { return values[s].has_value(); }
};

enum class AbsorbingCost {
  kZero,   ///< target/failure states accrue no cost (cost stops at absorption)
  kModel,  ///< use the model's cost rows on absorbing states as given
};

enum class OccupancyKind { kDiscounted, kStationary };

struct ReachAvoidOptions {
  double tol = 1e-12;
  long max_sweeps = 1'000'000;
};

/// One monotone sweep p <- 1_T + 1_{not T, not F} P_pi p.
ValueTable reach_avoid_sweep(const FiniteMdp& mdp, const Matrix& induced, const ValueTable& p);

/// P_pi(RA_x): the minimal nonnegative solution of the hitting equations,
/// by monotone iteration from zero. Stops once the sweep change and the
/// geometric tail estimate are both below tol; throws ConvergenceError
/// carrying the last change otherwise.
ValueTable reach_avoid_prob(const FiniteMdp& mdp, const TabularPolicy& policy,
                            const ReachAvoidOptions& options = {});

/// Unique bounded solution of v = 1_T + gamma 1_{not T, not F} E[v(x')],
/// i.e. E[gamma^T 1_RA | x0 = x], by a direct linear solve.
ValueTable indicator_value(const FiniteMdp& mdp, const TabularPolicy& policy, double gamma);

/// indicator_value / reach_avoid_prob where P(RA) > 1e-12.
CompensationTable compensation_exact(const FiniteMdp& mdp, const TabularPolicy& policy);

/// V_c = E_pi[c + gamma V_c(x')] by a direct linear solve.
ValueTable discounted_cost(const FiniteMdp& mdp, const TabularPolicy& policy,
                           AbsorbingCost absorbing = AbsorbingCost::kZero);

/// Normalized state occupancy from `rho`: discounted (default) or the
/// long-run (Cesaro) limit of the induced chain.
Vector occupancy(const FiniteMdp& mdp, const TabularPolicy& policy, const Vector& rho,
                 OccupancyKind kind = OccupancyKind::kDiscounted);

struct MonteCarloRa {
  double estimate = 0.0;
  double standard_error = 0.0;
  /// Episodes that ended at the horizon in neither set.
  std::size_t truncated = 0;
  std::size_t n_episodes = 0;
  /// Same rollouts, scored by gamma^T on success.
  double discounted_estimate = 0.0;
  double discounted_standard_error = 0.0;
};

/// Fraction of seeded rollouts from `start` that hit the target set before
/// the failure set within `horizon` steps. Episode i uses its own stream
/// derived from (seed, i).
MonteCarloRa monte_carlo_ra(const FiniteMdp& mdp, const TabularPolicy& policy, std::size_t start,
                            std::size_t n_episodes, std::size_t horizon, std::uint64_t seed);

struct MonteCarloReturn {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t n_episodes = 0;
};

/// Mean discounted cost over seeded rollouts truncated at `horizon`.
MonteCarloReturn monte_carlo_cost(const FiniteMdp& mdp, const TabularPolicy& policy,
                                  std::size_t start, std::size_t n_episodes, std::size_t horizon,
                                  std::uint64_t seed,
                                  AbsorbingCost absorbing = AbsorbingCost::kZero);

}  // namespace rapc
