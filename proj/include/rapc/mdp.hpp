#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rapc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Real value per state.
using ValueTable = Eigen::VectorXd;
/// Real value per (state, action); rows are states.
using QTable = Eigen::MatrixXd;

inline constexpr double kStochasticTol = 1e-12;

/// Finite MDP with reach-avoid signals.
///
/// `transition` is dense and flattened as [state][action][next_state].
/// The target set and failure set are disjoint; g is -M on the target set
/// and positive elsewhere, h is M on the failure set and -M elsewhere.
struct FiniteMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> transition;
  Matrix cost;
  std::vector<bool> target_mask;
  std::vector<bool> failure_mask;
  double gamma = 0.99;
  double big_m = 1.0;
  Vector g_values;
  Vector h_values;
  /// Optional initial-state distribution; empty when unspecified.
  Vector initial;

  double prob(std::size_t s, std::size_t a, std::size_t next) const {
    return transition[(s * n_actions + a) * n_states + next];
  }
  std::span<const double> next_distribution(std::size_t s, std::size_t a) const {
    return {transition.data() + (s * n_actions + a) * n_states, n_states};
  }
  bool is_target(std::size_t s) const { return target_mask[s]; }
  bool is_failure(std::size_t s) const { return failure_mask[s]; }
  bool is_boundary(std::size_t s) const { return target_mask[s] || failure_mask[s]; }

  /// `initial` if present, otherwise uniform over states outside both sets.
  Vector start_distribution() const;
};

/// Row-stochastic action distribution; rows are states.
struct TabularPolicy {
  Matrix probs;

  std::size_t n_states() const { return static_cast<std::size_t>(probs.rows()); }
  std::size_t n_actions() const { return static_cast<std::size_t>(probs.cols()); }
};

struct Violation {
  enum class Kind {
    kDimension,
    kNegativeProbability,
    kRowSum,
    kMaskOverlap,
    kGamma,
    kBigM,
    kTargetShaping,
    kFailureShaping,
    kCost,
    kInitialDistribution,
  };
  Kind kind;
  std::size_t state = 0;
  std::size_t action = 0;
  /// Offending quantity; for kRowSum this is the deficit 1 - sum.
  double value = 0.0;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate(const FiniteMdp& mdp);

/// Throws ValidationError carrying the report summary unless `mdp` is valid.
void require_valid(const FiniteMdp& mdp);

/// g = -M on the target set and `g_off_target` elsewhere; h = M on the
/// failure set and -M elsewhere.
std::pair<Vector, Vector> default_shaping(const std::vector<bool>& target_mask,
                                          const std::vector<bool>& failure_mask,
                                          double big_m, double g_off_target);

/// Fills g/h of `mdp` from its masks. `g_off_target <= 0` means "use M".
void apply_default_shaping(FiniteMdp& mdp, double g_off_target = 0.0);

TabularPolicy uniform_policy(std::size_t n_states, std::size_t n_actions);

/// Row-wise softmax with max subtraction.
TabularPolicy softmax_policy(const Matrix& logits);

/// Deterministic policy choosing `actions[s]` in state s.
TabularPolicy deterministic_policy(const std::vector<std::size_t>& actions,
                                   std::size_t n_actions);

/// Throws ValidationError if shapes mismatch or a row is not a distribution.
void validate_policy(const TabularPolicy& policy, const FiniteMdp& mdp);

/// P_pi(x' | x) as an n_states x n_states matrix.
Matrix induced_transition(const FiniteMdp& mdp, const TabularPolicy& policy);

/// sum_x' P(x' | x, a) v(x') for every (x, a).
Matrix expected_next_values(const FiniteMdp& mdp, const ValueTable& v);

}  // namespace rapc
