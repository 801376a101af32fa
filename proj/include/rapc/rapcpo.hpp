#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rapc/bellman.hpp"
#include "rapc/mdp.hpp"

namespace rapc {

/// Tabular critics: Q_{g,h}, Q_c and the compensation factor phi.
struct CriticState {
  QTable q_gh;
  QTable q_c;
  ValueTable phi;

  static CriticState zeros(std::size_t n_states, std::size_t n_actions, double phi_init = 1.0);

  /// max(phi, floor), the form used whenever phi divides.
  ValueTable phi_clamped(double floor = kPhiFloor) const { return phi.cwiseMax(floor); }
  /// E_{a~pi} q_gh(x, a).
  ValueTable state_value_gh(const TabularPolicy& policy) const;
};

/// Softmax logits confined to the box [-box_radius, box_radius].
struct PolicyParams {
  Matrix logits;
  double box_radius = 10.0;

  static PolicyParams zeros(std::size_t n_states, std::size_t n_actions, double box_radius = 10.0);
  TabularPolicy policy() const { return softmax_policy(logits); }
};

/// Three step-size sequences indexed by iteration.
struct StepSchedule {
  std::function<double(long)> zeta1;  ///< critics
  std::function<double(long)> zeta2;  ///< policy
  std::function<double(long)> zeta3;  ///< compensation factor
};

/// zeta_i(k) = a_i / (1 + k / timescale)^e_i with exponents 0.55, 0.75, 0.95.
/// timescale = 1 gives the plain a_i / (1 + k)^e_i form. `timescale` only
/// stretches the index; the asymptotic ratios are unchanged.
StepSchedule default_schedule(double a1, double a2, double a3, double timescale = 1.0);

struct Transition {
  std::size_t state = 0;
  std::size_t action = 0;
  double cost = 0.0;
  double g_value = 0.0;
  double h_value = 0.0;
  std::size_t next_state = 0;
  /// The state itself is absorbing (target or failure). Targets of a done
  /// transition use zero continuation.
  bool done = false;
};

/// Transition record read off the model. For boundary states the cost is
/// zeroed (cost stops at absorption) and done is set.
Transition make_transition(const FiniteMdp& mdp, std::size_t state, std::size_t action,
                           std::size_t next_state);

enum class TdTarget {
  kSampled,   ///< bootstrap from q(x', a') at the sampled a'
  kExpected,  ///< bootstrap from sum_a' pi(a'|x') q(x', a')
};

/// Semi-gradient step toward max{h, min{g, gamma q_gh(x', a')}}.
void td_update_ra_critic(CriticState& critic, const Transition& t, const TabularPolicy& policy,
                         std::size_t next_action, double step, double gamma,
                         TdTarget target = TdTarget::kSampled);

/// Semi-gradient step toward c + gamma q_c(x', a'), or toward c when done.
void td_update_cost_critic(CriticState& critic, const Transition& t, const TabularPolicy& policy,
                           std::size_t next_action, double step, double gamma,
                           TdTarget target = TdTarget::kSampled);

enum class EpisodeOutcome { kReached, kFailed, kTruncated };

struct Episode {
  /// Transitions out of x_0, ..., x_{T-1}; the absorbing step is excluded.
  std::vector<Transition> steps;
  EpisodeOutcome outcome = EpisodeOutcome::kTruncated;
};

/// On a reached episode with hitting time T = steps.size(), moves phi(x_t)
/// toward gamma^(T - t) for every t < T, in order. No-op otherwise.
void phi_regression_update(CriticState& critic, const Episode& episode, double step, double gamma);

struct GradientSample {
  std::size_t state = 0;
  std::size_t action = 0;
  double weight = 1.0;
};

enum class GradientEstimator {
  /// weight * Q(x, a) * grad log pi(a | x) at the sampled action.
  kSampled,
  /// weight * sum_b grad pi(b | x) Q(x, b); the sampled action is ignored.
  kAllActions,
};

struct GradientComponents {
  Matrix g_r_in;
  Matrix g_r_out;
  Matrix g_c_in;
};

/// The three policy-gradient components over a batch. The RA term uses
/// q_gh / max(phi, floor); it is routed by `feasible_mask` to g_r_in or
/// g_r_out. The cost term uses q_c on feasible states only. Mask and phi
/// are read as constants.
GradientComponents gradient_components(const PolicyParams& params, const CriticState& critic,
                                       const std::vector<GradientSample>& batch,
                                       const std::vector<bool>& feasible_mask,
                                       double floor = kPhiFloor,
                                       GradientEstimator estimator = GradientEstimator::kSampled);

struct ProjectionResult {
  Matrix g_r;
  Matrix g_c;
  bool applied = false;
};

/// Symmetric conflict projection: when <g_r, g_c> < 0 each vector loses its
/// component along the other (with delta added to the squared norms).
/// Vectors and matrices are treated as flat arrays.
ProjectionResult symmetric_projection(const Matrix& g_r, const Matrix& g_c, double delta = 1e-12);

/// g_r_out + (projected or plain) g_r_in + g_c_in.
Matrix mixed_direction(const Matrix& g_r_in, const Matrix& g_c_in, const Matrix& g_r_out,
                       double delta = 1e-12);

/// Clips every logit into [-box_radius, box_radius].
PolicyParams project_params(PolicyParams params);

/// Exact mean-field Bellman residuals of a critic for `policy`:
/// sup |q - B q| with the expected next action.
double critic_residual_gh(const FiniteMdp& mdp, const TabularPolicy& policy, const QTable& q);
double critic_residual_cost(const FiniteMdp& mdp, const TabularPolicy& policy, const QTable& q);

/// Exact action values of the cost objective (zero cost after absorption).
QTable exact_cost_q(const FiniteMdp& mdp, const TabularPolicy& policy);

/// TD evaluation of a frozen policy: `n_updates` SARSA updates of both
/// critics along seeded episodes from the start distribution, step
/// schedule.zeta1 indexed by update count. Episodes end at absorption (after
/// one done update) or after `horizon` steps.
CriticState evaluate_policy_td(const FiniteMdp& mdp, const TabularPolicy& policy, long n_updates,
                               const StepSchedule& schedule, std::uint64_t seed,
                               std::size_t horizon = 1000, TdTarget target = TdTarget::kSampled);

enum class GradientObjective {
  kReachAvoid,  ///< sum_x rho(x) V_{g,h}(x)
  kCost,        ///< sum_x rho(x) V_c(x)
};

struct ExactGradientOptions {
  double step = 1e-5;
  /// Initial distribution; empty means mdp.start_distribution().
  Vector rho;
};

/// Central finite differences of the chosen objective over every logit,
/// with each value computed from a polished fixed point.
Matrix policy_gradient_exact(const FiniteMdp& mdp, const PolicyParams& params,
                             GradientObjective objective, const ExactGradientOptions& options = {});

/// The objective itself at `params`.
double exact_objective(const FiniteMdp& mdp, const PolicyParams& params, GradientObjective objective,
                       const Vector& rho);

enum class MaskMode {
  kCritic,  ///< live critic values and live phi
  kExact,   ///< exact fixed point and exact compensation factor (diagnostics)
};

struct TrainConfig {
  long episodes = 2000;
  std::size_t horizon = 200;
  double p = 0.5;
  double a1 = 0.5;
  double a2 = 1.0;
  double a3 = 0.2;
  double timescale = 1.0;
  double box_radius = 10.0;
  double phi_floor = kPhiFloor;
  double phi_init = 1.0;
  double delta = 1e-12;
  long checkpoint_every = 100;
  bool use_cost_term = true;
  bool project_conflicts = true;
  GradientEstimator estimator = GradientEstimator::kAllActions;
  TdTarget td_target = TdTarget::kSampled;
  MaskMode mask_mode = MaskMode::kCritic;
  /// Margin epsilon of the strict-feasibility check logged at checkpoints.
  double a3_epsilon = 1e-3;

  /// Optional values that must agree with the MDP when present.
  std::optional<double> gamma;
  std::optional<double> big_m;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

/// Reads the JSON training config. Unknown keys are rejected.
TrainConfig load_train_config(std::string_view text);
/// Canonical JSON with every field written; the basis of the config hash.
std::string dump_train_config(const TrainConfig& config);

struct Checkpoint {
  long iteration = 0;
  double p_ra_exact = 0.0;
  double v_cost_exact = 0.0;
  std::size_t feasible_count = 0;
  double p_hat_mean = 0.0;
  double grad_norm = 0.0;
  double residual_gh = 0.0;
  double residual_c = 0.0;
  /// Feasible states where the exact value misses -epsilon * phi.
  std::size_t a3_violations = 0;
};

struct TrainReport {
  std::vector<Checkpoint> checkpoints;
  std::uint64_t seed = 0;
  std::string config_hash;
  PolicyParams final_params;
  CriticState final_critic;
  std::size_t projections_applied = 0;

  TabularPolicy final_policy() const { return final_params.policy(); }
};

/// Tabular RAPCPO actor-critic. Deterministic in (mdp, config, seed).
TrainReport train(const FiniteMdp& mdp, const TrainConfig& config, std::uint64_t seed);

/// One CSV row per checkpoint: iter, p_ra_exact, v_cost_exact,
/// feasible_count, p_hat_mean, grad_norm, residual_gh, residual_c.
std::string report_csv(const TrainReport& report);

}  // namespace rapc
