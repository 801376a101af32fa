#pragma once

#include <vector>

#include "rapc/mdp.hpp"
#include "rapc/oracle.hpp"

namespace rapc {

inline constexpr double kPhiFloor = 1e-6;

/// (B v)(x) = max{ h(x), min{ g(x), gamma E_{a~pi, x'~P}[v(x')] } }.
ValueTable clamped_backup(const FiniteMdp& mdp, const TabularPolicy& policy, const ValueTable& v);

struct FixedPointResult {
  ValueTable values;
  long iterations = 0;
  /// Sup-norm change of the last sweep.
  double residual = 0.0;
};

/// 10 * ceil(log(tol) / log(gamma)).
long default_max_sweeps(double gamma, double tol);

/// Iterates v <- B v from v = 0 until the sup-norm change is <= tol.
/// `max_sweeps <= 0` selects default_max_sweeps. Throws ConvergenceError
/// with the last change when the cap is reached.
FixedPointResult solve_fixed_point(const FiniteMdp& mdp, const TabularPolicy& policy,
                                   double tol = 1e-10, long max_sweeps = 0);

/// Refines an approximate fixed point to rounding accuracy: freezes which
/// clamp branch is active at every state and solves the remaining linear
/// system directly. Returns `v` unchanged if the branch pattern of the
/// solution disagrees with the one it was solved for.
ValueTable polish_fixed_point(const FiniteMdp& mdp, const TabularPolicy& policy,
                              const ValueTable& v);

/// Q(x, a) = max{ h(x), min{ g(x), gamma sum_x' P(x'|x,a) v(x') } }.
QTable q_from_v(const FiniteMdp& mdp, const ValueTable& v);

/// max(0, -v / M). A lower bound on P(RA) wherever v < 0 (and only there).
ValueTable certificate_bound(const ValueTable& v, double big_m);

struct NormalizedEstimate {
  ValueTable raw;
  /// raw clipped to [0, 1], for reporting.
  ValueTable clipped;
};

/// p_hat = -v / (M max(phi, floor)). Not a certified bound.
NormalizedEstimate normalized_estimate(const ValueTable& v, const ValueTable& phi, double big_m,
                                       double floor = kPhiFloor);

/// x is feasible iff v(x) <= -p M phi(x) and phi(x) >= 0.
std::vector<bool> feasible_set(const ValueTable& v, const ValueTable& phi, double big_m, double p);

/// phi from the exact compensation factor, floored; the floor also stands in
/// where phi is undefined.
ValueTable phi_for_division(const CompensationTable& phi, double floor = kPhiFloor);

struct CertificateReport {
  ValueTable value_table;
  ValueTable bound;
  ValueTable phi_used;
  std::vector<bool> phi_defined;
  NormalizedEstimate p_hat;
  std::vector<bool> feasible_mask;
  double threshold_p = 0.5;
  long iterations = 0;
  double residual = 0.0;
};

struct CertifyOptions {
  double tol = 1e-10;
  double floor = kPhiFloor;
};

/// Exact certificate analysis of a fixed policy: fixed point, bound,
/// exact compensation factor, p_hat, and the feasible set for threshold p.
CertificateReport certify(const FiniteMdp& mdp, const TabularPolicy& policy, double p,
                          const CertifyOptions& options = {});

}  // namespace rapc
