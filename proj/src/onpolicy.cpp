#include "rapc/onpolicy.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "config_fields.hpp"
#include "rapc/csv.hpp"
#include "rapc/mdp_io.hpp"
#include "rapc/oracle.hpp"
#include "rapc/rng.hpp"

namespace rapc {

namespace {

using Idx = Eigen::Index;
using detail::read_field;

Idx ix(std::size_t i) { return static_cast<Idx>(i); }

struct ValueCritic {
  ValueTable v_gh;
  ValueTable v_c;
  ValueTable phi;
};

double terminal_value(const FiniteMdp& mdp, std::size_t s) {
  return mdp.is_target(s) ? -mdp.big_m : mdp.big_m;
}

}  // namespace

void RolloutSegment::validate() const {
  const std::size_t n = steps.size();
  if (values.size() != n + 1) throw std::invalid_argument("segment: values needs steps + 1 entries");
  if (cost_values.size() != n + 1) throw std::invalid_argument("segment: cost_values needs steps + 1 entries");
  for (std::size_t t = 0; t < n; ++t) {
    if (!(steps[t].behavior_prob > 0.0)) throw std::invalid_argument("segment: behavior probability must be positive");
    if (t + 1 < n && steps[t].next_state != steps[t + 1].state)
      throw std::invalid_argument("segment: steps are not contiguous");
  }
}

double k_step_target(const RolloutSegment& segment, std::size_t start, std::size_t k,
                     const std::vector<double>& v_snapshot) {
  if (k == 0 || start + k > segment.steps.size())
    throw std::out_of_range("k_step_target: k out of range for this segment");
  if (v_snapshot.size() < start + k + 1) throw std::invalid_argument("k_step_target: snapshot too short");
  double v = v_snapshot[start + k];
  for (std::size_t j = k; j-- > 0;) v = clamp_target(segment.steps[start + j], segment.gamma, v);
  return v;
}

std::vector<double> gae_advantage(const RolloutSegment& segment, double lambda, std::size_t k_max) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw std::invalid_argument("gae_advantage: lambda must lie in [0, 1)");
  segment.validate();
  const std::size_t n = segment.steps.size();
  const std::size_t depth = k_max == 0 ? n : std::min(k_max, n);

  // phi[t] holds Phi^(k)(x_t, ...) for the current k; built bottom-up so
  // each level costs one clamp per step.
  std::vector<double> phi(segment.values.begin(), segment.values.end());
  std::vector<double> acc(n, 0.0), norm(n, 0.0);
  double weight = 1.0;
  for (std::size_t k = 1; k <= depth; ++k) {
    for (std::size_t t = 0; t + k <= n; ++t) phi[t] = clamp_target(segment.steps[t], segment.gamma, phi[t + 1]);
    for (std::size_t t = 0; t + k <= n; ++t) {
      acc[t] += weight * (phi[t] - segment.values[t]);
      norm[t] += weight;
    }
    weight *= lambda;
  }
  for (std::size_t t = 0; t < n; ++t) acc[t] /= norm[t];
  return acc;
}

std::vector<double> cost_gae(const RolloutSegment& segment, double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw std::invalid_argument("cost_gae: lambda must lie in [0, 1)");
  segment.validate();
  const std::size_t n = segment.steps.size();
  std::vector<double> adv(n, 0.0);
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double delta = segment.steps[t].cost + segment.gamma * segment.cost_values[t + 1] - segment.cost_values[t];
    running = delta + segment.gamma * lambda * running;
    adv[t] = running;
  }
  return adv;
}

AdvantagePair compute_advantages(const RolloutSegment& segment, double lambda, std::size_t k_max) {
  return {gae_advantage(segment, lambda, k_max), cost_gae(segment, lambda)};
}

double clipped_loss(double ratio, double advantage, double epsilon) {
  if (!(ratio > 0.0)) throw std::invalid_argument("clipped_loss: ratio must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("clipped_loss: epsilon must lie in (0, 1)");
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::max(ratio * advantage, clipped * advantage);
}

double clipped_loss_slope(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return ratio * advantage >= clipped * advantage ? advantage : 0.0;
}

Partition partition_minibatch(const std::vector<PpoSample>& batch, const std::vector<bool>& feasible_mask) {
  Partition out;
  for (const auto& s : batch) {
    if (s.state >= feasible_mask.size()) throw std::out_of_range("partition_minibatch: state outside the mask");
    (feasible_mask[s.state] ? out.feasible : out.infeasible).push_back(s);
  }
  return out;
}

PpoGradients ppo_gradients(const PolicyParams& params, const Partition& batches, const ValueTable& phi,
                           const PpoOptions& options) {
  const Idx ns = params.logits.rows();
  const Idx na = params.logits.cols();
  PpoGradients g{Matrix::Zero(ns, na), Matrix::Zero(ns, na), Matrix::Zero(ns, na), false, Matrix::Zero(ns, na)};
  const std::size_t total = batches.feasible.size() + batches.infeasible.size();
  if (total == 0) return g;
  const double scale = 1.0 / static_cast<double>(total);
  const TabularPolicy policy = params.policy();

  // d/dtheta of the clipped loss for one sample: slope * r * grad log pi.
  auto accumulate = [&](Matrix& into, const PpoSample& s, double advantage) {
    const Idx x = ix(s.state);
    const double pi_a = policy.probs(x, ix(s.action));
    const double ratio = pi_a / s.behavior_prob;
    const double slope = clipped_loss_slope(ratio, advantage, options.epsilon);
    if (slope == 0.0) return;
    Vector score = -policy.probs.row(x).transpose();
    score[ix(s.action)] += 1.0;
    into.row(x) += (scale * slope * ratio) * score.transpose();
  };
  auto inv_phi = [&](std::size_t s) { return 1.0 / std::max(phi[ix(s)], options.phi_floor); };

  for (const auto& s : batches.feasible) {
    accumulate(g.g_r_in, s, s.adv_gh * inv_phi(s.state));
    if (options.use_cost_term) accumulate(g.g_c_in, s, s.adv_c);
  }
  for (const auto& s : batches.infeasible)
    accumulate(g.g_r_out, s, options.normalize_outside ? s.adv_gh * inv_phi(s.state) : s.adv_gh);

  if (options.project_conflicts) {
    const ProjectionResult proj = symmetric_projection(g.g_r_in, g.g_c_in, options.delta);
    g.projected = proj.applied;
    g.direction = g.g_r_out + proj.g_r + proj.g_c;
  } else {
    g.direction = g.g_r_out + g.g_r_in + g.g_c_in;
  }
  return g;
}

PolicyParams ppo_update(const PolicyParams& params, const Partition& batches, const ValueTable& phi,
                        const PpoOptions& options, PpoGradients* gradients) {
  PpoGradients g = ppo_gradients(params, batches, phi, options);
  PolicyParams next = params;
  next.logits -= options.step * g.direction;
  next = project_params(std::move(next));
  if (gradients) *gradients = std::move(g);
  return next;
}

void OnPolicyConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("onpolicy config: " + what); };
  if (iterations <= 0) fail("iterations must be positive");
  if (rollout_length == 0) fail("rollout_length must be positive");
  if (horizon == 0) fail("horizon must be positive");
  if (minibatch_size == 0) fail("minibatch_size must be positive");
  if (epochs_per_batch == 0) fail("epochs_per_batch must be positive");
  if (!(lambda >= 0.0 && lambda < 1.0)) fail("lambda must lie in [0, 1)");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) fail("clip_epsilon must lie in (0, 1)");
  if (!(p >= 0.0 && p < 1.0)) fail("p must lie in [0, 1)");
  if (!(a1 > 0.0 && a2 > 0.0 && a3 > 0.0)) fail("a1, a2, a3 must be positive");
  if (!(timescale > 0.0)) fail("timescale must be positive");
  if (!(box_radius > 0.0)) fail("box_radius must be positive");
  if (!(phi_floor > 0.0)) fail("phi_floor must be positive");
  if (!(phi_init >= 0.0 && phi_init <= 1.0)) fail("phi_init must lie in [0, 1]");
  if (!(delta > 0.0)) fail("delta must be positive");
  if (checkpoint_every <= 0) fail("checkpoint_every must be positive");
  if (gamma && !(*gamma > 0.0 && *gamma < 1.0)) fail("gamma must lie in (0, 1)");
  if (big_m && !(*big_m > 0.0)) fail("big_m must be positive");
}

OnPolicyConfig load_onpolicy_config(std::string_view text) {
  const auto doc = detail::parse_object(text, "onpolicy config");
  detail::reject_unknown(
      doc,
      {"iterations", "rollout_length", "horizon", "minibatch_size", "epochs_per_batch", "lambda",
       "clip_epsilon", "k_max", "p", "a1", "a2", "a3", "timescale", "box_radius", "phi_floor", "phi_init",
       "delta", "checkpoint_every", "use_cost_term", "project_conflicts", "normalize_outside", "gamma",
       "big_m"},
      "onpolicy config");
  OnPolicyConfig c;
  c.iterations = read_field(doc, "iterations", c.iterations);
  c.rollout_length = read_field(doc, "rollout_length", c.rollout_length);
  c.horizon = read_field(doc, "horizon", c.horizon);
  c.minibatch_size = read_field(doc, "minibatch_size", c.minibatch_size);
  c.epochs_per_batch = read_field(doc, "epochs_per_batch", c.epochs_per_batch);
  c.lambda = read_field(doc, "lambda", c.lambda);
  c.clip_epsilon = read_field(doc, "clip_epsilon", c.clip_epsilon);
  c.k_max = read_field(doc, "k_max", c.k_max);
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
  c.normalize_outside = read_field(doc, "normalize_outside", c.normalize_outside);
  if (doc.contains("gamma")) c.gamma = read_field(doc, "gamma", 0.0);
  if (doc.contains("big_m")) c.big_m = read_field(doc, "big_m", 0.0);
  c.validate();
  return c;
}

std::string dump_onpolicy_config(const OnPolicyConfig& c) {
  std::ostringstream out;
  out << "{\n";
  auto num = [&](const char* key, double v) { out << "  \"" << key << "\": " << format_real(v) << ",\n"; };
  auto count = [&](const char* key, long long v) { out << "  \"" << key << "\": " << v << ",\n"; };
  auto flag = [&](const char* key, bool v) { out << "  \"" << key << "\": " << (v ? "true" : "false") << ",\n"; };
  count("iterations", c.iterations);
  count("rollout_length", static_cast<long long>(c.rollout_length));
  count("horizon", static_cast<long long>(c.horizon));
  count("minibatch_size", static_cast<long long>(c.minibatch_size));
  count("epochs_per_batch", static_cast<long long>(c.epochs_per_batch));
  num("lambda", c.lambda);
  num("clip_epsilon", c.clip_epsilon);
  count("k_max", static_cast<long long>(c.k_max));
  num("p", c.p);
  num("a1", c.a1);
  num("a2", c.a2);
  num("a3", c.a3);
  num("timescale", c.timescale);
  num("box_radius", c.box_radius);
  num("phi_floor", c.phi_floor);
  num("phi_init", c.phi_init);
  num("delta", c.delta);
  flag("use_cost_term", c.use_cost_term);
  flag("project_conflicts", c.project_conflicts);
  flag("normalize_outside", c.normalize_outside);
  if (c.gamma) num("gamma", *c.gamma);
  if (c.big_m) num("big_m", *c.big_m);
  out << "  \"checkpoint_every\": " << c.checkpoint_every << "\n}\n";
  return out.str();
}

TrainReport train_onpolicy(const FiniteMdp& mdp, const OnPolicyConfig& config, std::uint64_t seed) {
  config.validate();
  require_valid(mdp);
  if (config.gamma && *config.gamma != mdp.gamma) throw ConfigError("onpolicy config: gamma disagrees with the MDP");
  if (config.big_m && *config.big_m != mdp.big_m) throw ConfigError("onpolicy config: big_m disagrees with the MDP");

  const auto ns = ix(mdp.n_states);
  const StepSchedule schedule = default_schedule(config.a1, config.a2, config.a3, config.timescale);
  const Vector rho = mdp.start_distribution();
  PolicyParams params = PolicyParams::zeros(mdp.n_states, mdp.n_actions, config.box_radius);
  ValueCritic critic{ValueTable::Zero(ns), ValueTable::Zero(ns), ValueTable::Constant(ns, config.phi_init)};
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    if (mdp.is_boundary(s)) critic.v_gh[ix(s)] = terminal_value(mdp, s);

  TrainReport report;
  report.seed = seed;
  report.config_hash = stable_hash(dump_onpolicy_config(config) + dump_mdp(mdp));

  PpoOptions ppo;
  ppo.epsilon = config.clip_epsilon;
  ppo.delta = config.delta;
  ppo.phi_floor = config.phi_floor;
  ppo.normalize_outside = config.normalize_outside;
  ppo.use_cost_term = config.use_cost_term;
  ppo.project_conflicts = config.project_conflicts;

  double grad_norm_sum = 0.0;
  long grad_count = 0;

  for (long it = 0; it < config.iterations; ++it) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(it));
    const TabularPolicy policy = params.policy();
    const ValueCritic snapshot = critic;
    const std::vector<bool> mask = feasible_set(snapshot.v_gh, snapshot.phi, mdp.big_m, config.p);

    std::vector<PpoSample> samples;
    std::vector<RolloutSegment> segments;
    std::vector<Episode> episodes;
    while (samples.size() < config.rollout_length) {
      RolloutSegment seg;
      seg.gamma = mdp.gamma;
      Episode ep;
      std::size_t x = rng.categorical({rho.data(), static_cast<std::size_t>(rho.size())});
      for (std::size_t t = 0; t < config.horizon && !mdp.is_boundary(x); ++t) {
        const Vector w = policy.probs.row(ix(x)).transpose();
        const std::size_t a = rng.categorical({w.data(), static_cast<std::size_t>(w.size())});
        const std::size_t next = rng.categorical(mdp.next_distribution(x, a));
        seg.steps.push_back({x, a, mdp.cost(ix(x), ix(a)), mdp.g_values[ix(x)], mdp.h_values[ix(x)], next, w[ix(a)]});
        seg.values.push_back(snapshot.v_gh[ix(x)]);
        seg.cost_values.push_back(snapshot.v_c[ix(x)]);
        ep.steps.push_back(make_transition(mdp, x, a, next));
        x = next;
      }
      if (seg.steps.empty()) continue;
      seg.values.push_back(mdp.is_boundary(x) ? terminal_value(mdp, x) : snapshot.v_gh[ix(x)]);
      seg.cost_values.push_back(mdp.is_boundary(x) ? 0.0 : snapshot.v_c[ix(x)]);
      ep.outcome = mdp.is_target(x)    ? EpisodeOutcome::kReached
                   : mdp.is_failure(x) ? EpisodeOutcome::kFailed
                                       : EpisodeOutcome::kTruncated;

      const AdvantagePair adv = compute_advantages(seg, config.lambda, config.k_max);
      for (std::size_t t = 0; t < seg.steps.size(); ++t) {
        const auto& st = seg.steps[t];
        samples.push_back({st.state, st.action, st.behavior_prob, adv.a_gh[t], adv.a_c[t]});
      }
      segments.push_back(std::move(seg));
      episodes.push_back(std::move(ep));
    }

    // Critic regression toward the lambda-targets V + A of the snapshot.
    const double z1 = schedule.zeta1(it);
    std::size_t cursor = 0;
    for (const auto& seg : segments) {
      for (std::size_t t = 0; t < seg.steps.size(); ++t, ++cursor) {
        const Idx x = ix(seg.steps[t].state);
        critic.v_gh[x] += z1 * (seg.values[t] + samples[cursor].adv_gh - critic.v_gh[x]);
        critic.v_c[x] += z1 * (seg.cost_values[t] + samples[cursor].adv_c - critic.v_c[x]);
      }
    }
    const double z3 = schedule.zeta3(it);
    for (const auto& ep : episodes) {
      CriticState view;
      view.phi = critic.phi;
      phi_regression_update(view, ep, z3, mdp.gamma);
      critic.phi = view.phi;
    }

    ppo.step = schedule.zeta2(it);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t epoch = 0; epoch < config.epochs_per_batch; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
      for (std::size_t begin = 0; begin < order.size(); begin += config.minibatch_size) {
        const std::size_t end = std::min(order.size(), begin + config.minibatch_size);
        std::vector<PpoSample> mb;
        mb.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) mb.push_back(samples[order[i]]);
        PpoGradients g;
        params = ppo_update(params, partition_minibatch(mb, mask), snapshot.phi, ppo, &g);
        if (g.projected) ++report.projections_applied;
        grad_norm_sum += g.direction.norm();
        ++grad_count;
      }
    }

    if ((it + 1) % config.checkpoint_every == 0 || it + 1 == config.iterations) {
      const TabularPolicy pol = params.policy();
      Checkpoint c;
      c.iteration = it + 1;
      c.p_ra_exact = rho.dot(reach_avoid_prob(mdp, pol));
      c.v_cost_exact = rho.dot(discounted_cost(mdp, pol));
      c.grad_norm = grad_count > 0 ? grad_norm_sum / static_cast<double>(grad_count) : 0.0;
      c.residual_gh = (critic.v_gh - clamped_backup(mdp, pol, critic.v_gh)).lpNorm<Eigen::Infinity>();
      Matrix induced = induced_transition(mdp, pol);
      Vector cpi = (pol.probs.array() * mdp.cost.array()).rowwise().sum();
      for (std::size_t s = 0; s < mdp.n_states; ++s)
        if (mdp.is_boundary(s)) {
          induced.row(ix(s)).setZero();
          cpi[ix(s)] = 0.0;
        }
      c.residual_c = (critic.v_c - cpi - mdp.gamma * induced * critic.v_c).lpNorm<Eigen::Infinity>();
      const std::vector<bool> now = feasible_set(critic.v_gh, critic.phi, mdp.big_m, config.p);
      const NormalizedEstimate p_hat = normalized_estimate(critic.v_gh, critic.phi, mdp.big_m, config.phi_floor);
      double sum = 0.0;
      std::size_t interior = 0;
      for (std::size_t s = 0; s < mdp.n_states; ++s) {
        if (now[s]) ++c.feasible_count;
        if (!mdp.is_boundary(s)) {
          sum += p_hat.raw[ix(s)];
          ++interior;
        }
      }
      c.p_hat_mean = interior > 0 ? sum / static_cast<double>(interior) : 0.0;
      report.checkpoints.push_back(c);
      grad_norm_sum = 0.0;
      grad_count = 0;
    }
  }

  report.final_params = params;
  report.final_critic.q_gh = critic.v_gh.replicate(1, ix(mdp.n_actions));
  report.final_critic.q_c = critic.v_c.replicate(1, ix(mdp.n_actions));
  report.final_critic.phi = critic.phi;
  return report;
}

}  // namespace rapc
