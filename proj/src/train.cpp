#include <cmath>
#include <sstream>
#include <stdexcept>

#include "config_fields.hpp"
#include "rapc/csv.hpp"
#include "rapc/errors.hpp"
#include "rapc/mdp_io.hpp"
#include "rapc/oracle.hpp"
#include "rapc/rapcpo.hpp"
#include "rapc/rng.hpp"

namespace rapc {

namespace {

using Idx = Eigen::Index;
using detail::read_field;

Idx ix(std::size_t i) { return static_cast<Idx>(i); }

const char* estimator_name(GradientEstimator e) {
  return e == GradientEstimator::kSampled ? "sampled" : "all_actions";
}
const char* target_name(TdTarget t) { return t == TdTarget::kSampled ? "sampled" : "expected"; }
const char* mask_name(MaskMode m) { return m == MaskMode::kCritic ? "critic" : "exact"; }

std::size_t sample_action(Rng& rng, const TabularPolicy& policy, std::size_t s) {
  const Vector w = policy.probs.row(ix(s)).transpose();
  return rng.categorical({w.data(), static_cast<std::size_t>(w.size())});
}

std::vector<bool> current_mask(const FiniteMdp& mdp, const TabularPolicy& policy,
                               const CriticState& critic, const TrainConfig& config) {
  if (config.mask_mode == MaskMode::kCritic)
    return feasible_set(critic.state_value_gh(policy), critic.phi, mdp.big_m, config.p);
  const FixedPointResult fp = solve_fixed_point(mdp, policy);
  const CompensationTable phi = compensation_exact(mdp, policy);
  ValueTable phi_vec(ix(mdp.n_states));
  // Undefined phi marks the state infeasible through the phi >= 0 test.
  for (std::size_t s = 0; s < mdp.n_states; ++s) phi_vec[ix(s)] = phi.values[s].value_or(-1.0);
  return feasible_set(fp.values, phi_vec, mdp.big_m, config.p);
}

Checkpoint make_checkpoint(const FiniteMdp& mdp, const PolicyParams& params, const CriticState& critic,
                           const TrainConfig& config, const Vector& rho, long iteration,
                           double grad_norm) {
  const TabularPolicy policy = params.policy();
  Checkpoint c;
  c.iteration = iteration;
  c.p_ra_exact = rho.dot(reach_avoid_prob(mdp, policy));
  c.v_cost_exact = rho.dot(discounted_cost(mdp, policy));
  c.grad_norm = grad_norm;
  c.residual_gh = critic_residual_gh(mdp, policy, critic.q_gh);
  c.residual_c = critic_residual_cost(mdp, policy, critic.q_c);

  const std::vector<bool> mask = current_mask(mdp, policy, critic, config);
  const ValueTable v_critic = critic.state_value_gh(policy);
  const NormalizedEstimate p_hat = normalized_estimate(v_critic, critic.phi, mdp.big_m, config.phi_floor);
  double p_hat_sum = 0.0;
  std::size_t interior = 0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (mask[s]) ++c.feasible_count;
    if (!mdp.is_boundary(s)) {
      p_hat_sum += p_hat.raw[ix(s)];
      ++interior;
    }
  }
  c.p_hat_mean = interior > 0 ? p_hat_sum / static_cast<double>(interior) : 0.0;

  const ValueTable v_exact = solve_fixed_point(mdp, policy).values;
  const CompensationTable phi_exact = compensation_exact(mdp, policy);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (!mask[s] || !phi_exact.defined(s)) continue;
    if (v_exact[ix(s)] > -config.a3_epsilon * *phi_exact.values[s]) ++c.a3_violations;
  }
  return c;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
  if (episodes <= 0) fail("episodes must be positive");
  if (horizon == 0) fail("horizon must be positive");
  if (!(p >= 0.0 && p < 1.0)) fail("p must lie in [0, 1)");
  if (!(a1 > 0.0 && a2 > 0.0 && a3 > 0.0)) fail("a1, a2, a3 must be positive");
  if (!(timescale > 0.0)) fail("timescale must be positive");
  if (!(box_radius > 0.0)) fail("box_radius must be positive");
  if (!(phi_floor > 0.0)) fail("phi_floor must be positive");
  if (!(phi_init >= 0.0 && phi_init <= 1.0)) fail("phi_init must lie in [0, 1]");
  if (!(delta > 0.0)) fail("delta must be positive");
  if (checkpoint_every <= 0) fail("checkpoint_every must be positive");
  if (!(a3_epsilon >= 0.0)) fail("a3_epsilon must be nonnegative");
  if (gamma && !(*gamma > 0.0 && *gamma < 1.0)) fail("gamma must lie in (0, 1)");
  if (big_m && !(*big_m > 0.0)) fail("big_m must be positive");
}

TrainConfig load_train_config(std::string_view text) {
  const auto doc = detail::parse_object(text, "train config");
  detail::reject_unknown(doc,
                         {"episodes", "horizon", "p", "a1", "a2", "a3", "timescale", "box_radius",
                          "phi_floor", "phi_init", "delta", "checkpoint_every", "use_cost_term",
                          "project_conflicts", "estimator", "td_target", "mask_mode", "a3_epsilon",
                          "gamma", "big_m"},
                         "train config");

  TrainConfig c;
  c.episodes = read_field(doc, "episodes", c.episodes);
  c.horizon = read_field(doc, "horizon", c.horizon);
  c.p = read_field(doc, "p", c.p);
  c.a1 = read_field(doc, "a1", c.a1);
  c.a2 = read_field(doc, "a2", c.a2);
  c.a3 = read_field(doc, "a3", c.a3);
  c.timescale = read_field(doc, "timescale", c.timescale);
  c.box_radius = read_field(doc, "box_radius", c.box_radius);
  c.phi_floor = read_field(doc, "phi_floor", c.phi_floor);
  c.phi_init = read_field(doc, "phi_init", c.phi_init);
  c.delta = read_field(doc, "delta", c.delta);
  c.checkpoint_every = read_field(doc, "checkpoint_every", c.checkpoint_every);
  c.use_cost_term = read_field(doc, "use_cost_term", c.use_cost_term);
  c.project_conflicts = read_field(doc, "project_conflicts", c.project_conflicts);
  c.a3_epsilon = read_field(doc, "a3_epsilon", c.a3_epsilon);

  const std::string est = read_field<std::string>(doc, "estimator", estimator_name(c.estimator));
  if (est == "sampled") c.estimator = GradientEstimator::kSampled;
  else if (est == "all_actions") c.estimator = GradientEstimator::kAllActions;
  else throw ConfigError("train config: estimator must be \"sampled\" or \"all_actions\"");

  const std::string tgt = read_field<std::string>(doc, "td_target", target_name(c.td_target));
  if (tgt == "sampled") c.td_target = TdTarget::kSampled;
  else if (tgt == "expected") c.td_target = TdTarget::kExpected;
  else throw ConfigError("train config: td_target must be \"sampled\" or \"expected\"");

  const std::string mask = read_field<std::string>(doc, "mask_mode", mask_name(c.mask_mode));
  if (mask == "critic") c.mask_mode = MaskMode::kCritic;
  else if (mask == "exact") c.mask_mode = MaskMode::kExact;
  else throw ConfigError("train config: mask_mode must be \"critic\" or \"exact\"");

  if (doc.contains("gamma")) c.gamma = read_field(doc, "gamma", 0.0);
  if (doc.contains("big_m")) c.big_m = read_field(doc, "big_m", 0.0);
  c.validate();
  return c;
}

std::string dump_train_config(const TrainConfig& c) {
  // Numbers go through format_real so the text (and its hash) is exact.
  std::ostringstream out;
  out << "{\n";
  auto num = [&](const char* key, double v) { out << "  \"" << key << "\": " << format_real(v) << ",\n"; };
  auto str = [&](const char* key, const char* v) { out << "  \"" << key << "\": \"" << v << "\",\n"; };
  auto flag = [&](const char* key, bool v) { out << "  \"" << key << "\": " << (v ? "true" : "false") << ",\n"; };
  out << "  \"episodes\": " << c.episodes << ",\n";
  out << "  \"horizon\": " << c.horizon << ",\n";
  num("p", c.p);
  num("a1", c.a1);
  num("a2", c.a2);
  num("a3", c.a3);
  num("timescale", c.timescale);
  num("box_radius", c.box_radius);
  num("phi_floor", c.phi_floor);
  num("phi_init", c.phi_init);
  num("delta", c.delta);
  out << "  \"checkpoint_every\": " << c.checkpoint_every << ",\n";
  flag("use_cost_term", c.use_cost_term);
  flag("project_conflicts", c.project_conflicts);
  str("estimator", estimator_name(c.estimator));
  str("td_target", target_name(c.td_target));
  str("mask_mode", mask_name(c.mask_mode));
  if (c.gamma) num("gamma", *c.gamma);
  if (c.big_m) num("big_m", *c.big_m);
  out << "  \"a3_epsilon\": " << format_real(c.a3_epsilon) << "\n}\n";
  return out.str();
}

TrainReport train(const FiniteMdp& mdp, const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  require_valid(mdp);
  if (config.gamma && *config.gamma != mdp.gamma)
    throw ConfigError("train config: gamma disagrees with the MDP");
  if (config.big_m && *config.big_m != mdp.big_m)
    throw ConfigError("train config: big_m disagrees with the MDP");

  const double gamma = mdp.gamma;
  const StepSchedule schedule = default_schedule(config.a1, config.a2, config.a3, config.timescale);
  const Vector rho = mdp.start_distribution();
  PolicyParams params = PolicyParams::zeros(mdp.n_states, mdp.n_actions, config.box_radius);
  CriticState critic = CriticState::zeros(mdp.n_states, mdp.n_actions, config.phi_init);
  TabularPolicy policy = params.policy();

  TrainReport report;
  report.seed = seed;
  report.config_hash = stable_hash(dump_train_config(config) + dump_mdp(mdp));

  double grad_norm_sum = 0.0;
  long grad_count = 0;
  const Matrix zero = Matrix::Zero(ix(mdp.n_states), ix(mdp.n_actions));

  for (long l = 0; l < config.episodes; ++l) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(l));
    const double z1 = schedule.zeta1(l);
    const double z2 = schedule.zeta2(l);
    const double z3 = schedule.zeta3(l);
    const std::vector<bool> mask = current_mask(mdp, policy, critic, config);

    std::size_t x = rng.categorical({rho.data(), static_cast<std::size_t>(rho.size())});
    std::size_t a = sample_action(rng, policy, x);
    Episode episode;
    for (std::size_t t = 0; t < config.horizon && !mdp.is_boundary(x); ++t) {
      const std::size_t next = rng.categorical(mdp.next_distribution(x, a));
      const std::size_t next_a = sample_action(rng, policy, next);
      const Transition tr = make_transition(mdp, x, a, next);
      td_update_ra_critic(critic, tr, policy, next_a, z1, gamma, config.td_target);
      td_update_cost_critic(critic, tr, policy, next_a, z1, gamma, config.td_target);
      if (mdp.is_boundary(next)) {
        const Transition done = make_transition(mdp, next, next_a, next);
        td_update_ra_critic(critic, done, policy, next_a, z1, gamma, config.td_target);
        td_update_cost_critic(critic, done, policy, next_a, z1, gamma, config.td_target);
      }

      GradientComponents g = gradient_components(params, critic, {{x, a, 1.0}}, mask,
                                                 config.phi_floor, config.estimator);
      if (!config.use_cost_term) g.g_c_in = zero;
      Matrix direction;
      if (config.project_conflicts) {
        const ProjectionResult proj = symmetric_projection(g.g_r_in, g.g_c_in, config.delta);
        if (proj.applied) ++report.projections_applied;
        direction = g.g_r_out + proj.g_r + proj.g_c;
      } else {
        direction = g.g_r_out + g.g_r_in + g.g_c_in;
      }
      params.logits.row(ix(x)) -= z2 * direction.row(ix(x));
      params = project_params(std::move(params));
      policy.probs.row(ix(x)) = softmax_policy(params.logits.row(ix(x))).probs.row(0);
      grad_norm_sum += direction.norm();
      ++grad_count;

      episode.steps.push_back(tr);
      x = next;
      a = next_a;
    }
    if (mdp.is_target(x)) episode.outcome = EpisodeOutcome::kReached;
    else if (mdp.is_failure(x)) episode.outcome = EpisodeOutcome::kFailed;
    else episode.outcome = EpisodeOutcome::kTruncated;
    phi_regression_update(critic, episode, z3, gamma);

    if ((l + 1) % config.checkpoint_every == 0 || l + 1 == config.episodes) {
      const double mean_norm = grad_count > 0 ? grad_norm_sum / static_cast<double>(grad_count) : 0.0;
      report.checkpoints.push_back(make_checkpoint(mdp, params, critic, config, rho, l + 1, mean_norm));
      grad_norm_sum = 0.0;
      grad_count = 0;
    }
  }
  report.final_params = params;
  report.final_critic = critic;
  return report;
}

std::string report_csv(const TrainReport& report) {
  CsvWriter csv({"iter", "p_ra_exact", "v_cost_exact", "feasible_count", "p_hat_mean", "grad_norm",
                 "residual_gh", "residual_c"});
  for (const auto& c : report.checkpoints) {
    csv.cell(static_cast<std::int64_t>(c.iteration))
        .cell(c.p_ra_exact)
        .cell(c.v_cost_exact)
        .cell(c.feasible_count)
        .cell(c.p_hat_mean)
        .cell(c.grad_norm)
        .cell(c.residual_gh)
        .cell(c.residual_c);
    csv.end_row();
  }
  return csv.str(report.config_hash);
}

}  // namespace rapc
