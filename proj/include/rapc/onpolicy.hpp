#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rapc/mdp.hpp"
#include "rapc/rapcpo.hpp"

namespace rapc {

struct SegmentStep {
  std::size_t state = 0;
  std::size_t action = 0;
  double cost = 0.0;
  double g_value = 0.0;
  double h_value = 0.0;
  std::size_t next_state = 0;
  /// pi_behavior(action | state) at collection time.
  double behavior_prob = 1.0;
};

/// Contiguous stretch of one episode, x_0 .. x_n with n = steps.size().
/// `values` and `cost_values` hold the critic snapshot at every visited
/// state, n + 1 entries each. An absorbing x_n carries its clamp value
/// (-M on the target set, M on the failure set) and zero cost-to-go.
struct RolloutSegment {
  std::vector<SegmentStep> steps;
  std::vector<double> values;
  std::vector<double> cost_values;
  double gamma = 0.99;

  /// Throws std::invalid_argument on broken contiguity, snapshot sizes, or
  /// nonpositive behavior probabilities.
  void validate() const;
};

struct AdvantagePair {
  std::vector<double> a_gh;
  std::vector<double> a_c;
};

/// T(x, v_next) = max{h(x), min{g(x), gamma v_next}}.
inline double clamp_target(const SegmentStep& s, double gamma, double v_next) {
  return std::max(s.h_value, std::min(s.g_value, gamma * v_next));
}

/// Phi^(k) at `start`: T applied k times down from v_snapshot[start + k].
/// Requires 1 <= k and start + k <= steps.size().
double k_step_target(const RolloutSegment& segment, std::size_t start, std::size_t k,
                     const std::vector<double>& v_snapshot);

/// Per-step sum_k w_k (Phi^(k) - V(x_t)), w_k proportional to lambda^(k-1)
/// and normalized over k = 1 .. min(k_max, n - t). k_max = 0 means "to the
/// end of the segment".
std::vector<double> gae_advantage(const RolloutSegment& segment, double lambda, std::size_t k_max = 0);

/// Additive GAE on the cost critic: sum_j (gamma lambda)^j delta_{t+j}.
std::vector<double> cost_gae(const RolloutSegment& segment, double lambda);

AdvantagePair compute_advantages(const RolloutSegment& segment, double lambda, std::size_t k_max = 0);

/// max(r A, clip(r, 1 - eps, 1 + eps) A).
double clipped_loss(double ratio, double advantage, double epsilon);

/// d clipped_loss / d ratio: A where the unclipped branch is active, else 0.
double clipped_loss_slope(double ratio, double advantage, double epsilon);

struct PpoSample {
  std::size_t state = 0;
  std::size_t action = 0;
  double behavior_prob = 1.0;
  double adv_gh = 0.0;
  double adv_c = 0.0;
};

struct Partition {
  std::vector<PpoSample> feasible;    ///< B1
  std::vector<PpoSample> infeasible;  ///< B0
};

Partition partition_minibatch(const std::vector<PpoSample>& batch, const std::vector<bool>& feasible_mask);

struct PpoOptions {
  double epsilon = 0.2;
  double delta = 1e-12;
  double step = 0.1;
  double phi_floor = kPhiFloor;
  /// Divide B0's reach-avoid advantages by phi as well.
  bool normalize_outside = true;
  bool use_cost_term = true;
  bool project_conflicts = true;
};

struct PpoGradients {
  Matrix g_r_in;   ///< from B1, RA loss
  Matrix g_c_in;   ///< from B1, cost loss
  Matrix g_r_out;  ///< from B0, RA loss
  bool projected = false;
  Matrix direction;
};

/// Gradients of the clipped losses averaged over |B1| + |B0| samples, and
/// the combined direction g_R0 + g_mix. `phi` is read as a constant.
PpoGradients ppo_gradients(const PolicyParams& params, const Partition& batches, const ValueTable& phi,
                           const PpoOptions& options);

/// theta <- Gamma(theta - step * (g_R0 + g_mix)).
PolicyParams ppo_update(const PolicyParams& params, const Partition& batches, const ValueTable& phi,
                        const PpoOptions& options, PpoGradients* gradients = nullptr);

struct OnPolicyConfig {
  long iterations = 300;
  std::size_t rollout_length = 512;
  std::size_t horizon = 200;
  std::size_t minibatch_size = 128;
  std::size_t epochs_per_batch = 4;
  double lambda = 0.95;
  double clip_epsilon = 0.2;
  std::size_t k_max = 0;
  double p = 0.5;
  double a1 = 0.5;
  double a2 = 1.0;
  double a3 = 0.2;
  double timescale = 1.0;
  double box_radius = 10.0;
  double phi_floor = kPhiFloor;
  double phi_init = 1.0;
  double delta = 1e-12;
  long checkpoint_every = 10;
  bool use_cost_term = true;
  bool project_conflicts = true;
  bool normalize_outside = true;
  std::optional<double> gamma;
  std::optional<double> big_m;

  void validate() const;
};

OnPolicyConfig load_onpolicy_config(std::string_view text);
std::string dump_onpolicy_config(const OnPolicyConfig& config);

/// On-policy clipped/GAE variant with tabular state-value critics. The
/// report's q tables hold the state values repeated across actions.
TrainReport train_onpolicy(const FiniteMdp& mdp, const OnPolicyConfig& config, std::uint64_t seed);

}  // namespace rapc
