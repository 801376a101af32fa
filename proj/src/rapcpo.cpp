#include "rapc/rapcpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rapc/oracle.hpp"
#include "rapc/rng.hpp"

namespace rapc {

namespace {

using Idx = Eigen::Index;

Idx ix(std::size_t i) { return static_cast<Idx>(i); }

double flat_dot(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("gradient vectors differ in shape");
  return a.cwiseProduct(b).sum();
}

double next_q(const QTable& q, const TabularPolicy& policy, std::size_t next_state,
              std::size_t next_action, TdTarget target) {
  if (target == TdTarget::kSampled) return q(ix(next_state), ix(next_action));
  return policy.probs.row(ix(next_state)).dot(q.row(ix(next_state)));
}

std::size_t sample_action(Rng& rng, const TabularPolicy& policy, std::size_t s) {
  const Vector w = policy.probs.row(ix(s)).transpose();
  return rng.categorical({w.data(), static_cast<std::size_t>(w.size())});
}

}  // namespace

CriticState CriticState::zeros(std::size_t n_states, std::size_t n_actions, double phi_init) {
  CriticState c;
  c.q_gh = QTable::Zero(ix(n_states), ix(n_actions));
  c.q_c = QTable::Zero(ix(n_states), ix(n_actions));
  c.phi = ValueTable::Constant(ix(n_states), phi_init);
  return c;
}

ValueTable CriticState::state_value_gh(const TabularPolicy& policy) const {
  return (policy.probs.array() * q_gh.array()).rowwise().sum();
}

PolicyParams PolicyParams::zeros(std::size_t n_states, std::size_t n_actions, double box_radius) {
  return {Matrix::Zero(ix(n_states), ix(n_actions)), box_radius};
}

StepSchedule default_schedule(double a1, double a2, double a3, double timescale) {
  if (!(a1 > 0.0 && a2 > 0.0 && a3 > 0.0)) throw std::invalid_argument("default_schedule: a1, a2, a3 must be positive");
  if (!(timescale > 0.0)) throw std::invalid_argument("default_schedule: timescale must be positive");
  auto make = [timescale](double a, double e) {
    return [a, e, timescale](long k) { return a / std::pow(1.0 + static_cast<double>(k) / timescale, e); };
  };
  return {make(a1, 0.55), make(a2, 0.75), make(a3, 0.95)};
}

Transition make_transition(const FiniteMdp& mdp, std::size_t state, std::size_t action,
                           std::size_t next_state) {
  Transition t;
  t.state = state;
  t.action = action;
  t.g_value = mdp.g_values[ix(state)];
  t.h_value = mdp.h_values[ix(state)];
  t.done = mdp.is_boundary(state);
  t.cost = t.done ? 0.0 : mdp.cost(ix(state), ix(action));
  t.next_state = t.done ? state : next_state;
  return t;
}

void td_update_ra_critic(CriticState& critic, const Transition& t, const TabularPolicy& policy,
                         std::size_t next_action, double step, double gamma, TdTarget target) {
  if (!(step > 0.0)) throw std::invalid_argument("td_update_ra_critic: step must be positive");
  const double cont = t.done ? 0.0 : gamma * next_q(critic.q_gh, policy, t.next_state, next_action, target);
  const double y = std::max(t.h_value, std::min(t.g_value, cont));
  double& q = critic.q_gh(ix(t.state), ix(t.action));
  q -= step * (q - y);
}

void td_update_cost_critic(CriticState& critic, const Transition& t, const TabularPolicy& policy,
                           std::size_t next_action, double step, double gamma, TdTarget target) {
  if (!(step > 0.0)) throw std::invalid_argument("td_update_cost_critic: step must be positive");
  const double y =
      t.cost + (t.done ? 0.0 : gamma * next_q(critic.q_c, policy, t.next_state, next_action, target));
  double& q = critic.q_c(ix(t.state), ix(t.action));
  q -= step * (q - y);
}

void phi_regression_update(CriticState& critic, const Episode& episode, double step, double gamma) {
  if (!(step > 0.0)) throw std::invalid_argument("phi_regression_update: step must be positive");
  if (episode.outcome != EpisodeOutcome::kReached) return;
  const std::size_t hit = episode.steps.size();
  for (std::size_t t = 0; t < hit; ++t) {
    const double y = std::pow(gamma, static_cast<double>(hit - t));
    double& phi = critic.phi[ix(episode.steps[t].state)];
    phi -= step * (phi - y);
  }
}

GradientComponents gradient_components(const PolicyParams& params, const CriticState& critic,
                                       const std::vector<GradientSample>& batch,
                                       const std::vector<bool>& feasible_mask, double floor,
                                       GradientEstimator estimator) {
  const Idx ns = params.logits.rows();
  const Idx na = params.logits.cols();
  if (feasible_mask.size() != static_cast<std::size_t>(ns))
    throw std::invalid_argument("gradient_components: mask has the wrong size");
  GradientComponents out{Matrix::Zero(ns, na), Matrix::Zero(ns, na), Matrix::Zero(ns, na)};
  for (const auto& sample : batch) {
    const Idx x = ix(sample.state);
    const Vector pi = softmax_policy(params.logits.row(x)).probs.row(0).transpose();
    const double inv_phi = 1.0 / std::max(critic.phi[x], floor);
    const bool inside = feasible_mask[sample.state];

    // Score-function row for the RA and cost action values at state x.
    Vector r_row, c_row;
    if (estimator == GradientEstimator::kSampled) {
      Vector score = -pi;
      score[ix(sample.action)] += 1.0;
      r_row = critic.q_gh(x, ix(sample.action)) * inv_phi * score;
      c_row = critic.q_c(x, ix(sample.action)) * score;
    } else {
      const Vector qr = critic.q_gh.row(x).transpose() * inv_phi;
      const Vector qc = critic.q_c.row(x).transpose();
      r_row = pi.cwiseProduct(qr.array().matrix() - Vector::Constant(na, pi.dot(qr)));
      c_row = pi.cwiseProduct(qc - Vector::Constant(na, pi.dot(qc)));
    }
    if (inside) {
      out.g_r_in.row(x) += sample.weight * r_row.transpose();
      out.g_c_in.row(x) += sample.weight * c_row.transpose();
    } else {
      out.g_r_out.row(x) += sample.weight * r_row.transpose();
    }
  }
  return out;
}

ProjectionResult symmetric_projection(const Matrix& g_r, const Matrix& g_c, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("symmetric_projection: delta must be positive");
  const double rc = flat_dot(g_r, g_c);
  if (!(rc < 0.0)) return {g_r, g_c, false};
  const double rr = flat_dot(g_r, g_r);
  const double cc = flat_dot(g_c, g_c);
  return {g_r - (rc / (cc + delta)) * g_c, g_c - (rc / (rr + delta)) * g_r, true};
}

Matrix mixed_direction(const Matrix& g_r_in, const Matrix& g_c_in, const Matrix& g_r_out,
                       double delta) {
  const ProjectionResult proj = symmetric_projection(g_r_in, g_c_in, delta);
  return g_r_out + proj.g_r + proj.g_c;
}

PolicyParams project_params(PolicyParams params) {
  if (!(params.box_radius > 0.0)) throw std::invalid_argument("project_params: box_radius must be positive");
  params.logits = params.logits.cwiseMax(-params.box_radius).cwiseMin(params.box_radius);
  return params;
}

double critic_residual_gh(const FiniteMdp& mdp, const TabularPolicy& policy, const QTable& q) {
  const ValueTable v = (policy.probs.array() * q.array()).rowwise().sum();
  return (q - q_from_v(mdp, v)).lpNorm<Eigen::Infinity>();
}

double critic_residual_cost(const FiniteMdp& mdp, const TabularPolicy& policy, const QTable& q) {
  const ValueTable v = (policy.probs.array() * q.array()).rowwise().sum();
  QTable bq = mdp.cost + mdp.gamma * expected_next_values(mdp, v);
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    if (mdp.is_boundary(s)) bq.row(ix(s)).setZero();
  return (q - bq).lpNorm<Eigen::Infinity>();
}

QTable exact_cost_q(const FiniteMdp& mdp, const TabularPolicy& policy) {
  const ValueTable v = discounted_cost(mdp, policy, AbsorbingCost::kZero);
  QTable q = mdp.cost + mdp.gamma * expected_next_values(mdp, v);
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    if (mdp.is_boundary(s)) q.row(ix(s)).setZero();
  return q;
}

CriticState evaluate_policy_td(const FiniteMdp& mdp, const TabularPolicy& policy, long n_updates,
                               const StepSchedule& schedule, std::uint64_t seed, std::size_t horizon,
                               TdTarget target) {
  validate_policy(policy, mdp);
  if (horizon == 0) throw std::invalid_argument("evaluate_policy_td: horizon must be positive");
  CriticState critic = CriticState::zeros(mdp.n_states, mdp.n_actions);
  const Vector rho = mdp.start_distribution();
  long k = 0;
  for (std::uint64_t ep = 0; k < n_updates; ++ep) {
    Rng rng = Rng::substream(seed, ep);
    std::size_t x = rng.categorical({rho.data(), static_cast<std::size_t>(rho.size())});
    std::size_t a = sample_action(rng, policy, x);
    for (std::size_t t = 0; t < horizon && k < n_updates; ++t) {
      if (mdp.is_boundary(x)) {
        const Transition done = make_transition(mdp, x, a, x);
        const double step = schedule.zeta1(k++);
        td_update_ra_critic(critic, done, policy, a, step, mdp.gamma, target);
        td_update_cost_critic(critic, done, policy, a, step, mdp.gamma, target);
        break;
      }
      const std::size_t next = rng.categorical(mdp.next_distribution(x, a));
      const std::size_t next_a = sample_action(rng, policy, next);
      const Transition tr = make_transition(mdp, x, a, next);
      const double step = schedule.zeta1(k++);
      td_update_ra_critic(critic, tr, policy, next_a, step, mdp.gamma, target);
      td_update_cost_critic(critic, tr, policy, next_a, step, mdp.gamma, target);
      x = next;
      a = next_a;
    }
  }
  return critic;
}

double exact_objective(const FiniteMdp& mdp, const PolicyParams& params, GradientObjective objective,
                       const Vector& rho) {
  const TabularPolicy policy = params.policy();
  if (objective == GradientObjective::kCost) return rho.dot(discounted_cost(mdp, policy));
  const FixedPointResult fp = solve_fixed_point(mdp, policy, 1e-13);
  return rho.dot(polish_fixed_point(mdp, policy, fp.values));
}

Matrix policy_gradient_exact(const FiniteMdp& mdp, const PolicyParams& params,
                             GradientObjective objective, const ExactGradientOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("policy_gradient_exact: step must be positive");
  const Vector rho = options.rho.size() > 0 ? options.rho : mdp.start_distribution();
  Matrix grad = Matrix::Zero(params.logits.rows(), params.logits.cols());
  PolicyParams shifted = params;
  for (Idx s = 0; s < grad.rows(); ++s) {
    for (Idx a = 0; a < grad.cols(); ++a) {
      const double base = params.logits(s, a);
      shifted.logits(s, a) = base + options.step;
      const double up = exact_objective(mdp, shifted, objective, rho);
      shifted.logits(s, a) = base - options.step;
      const double down = exact_objective(mdp, shifted, objective, rho);
      shifted.logits(s, a) = base;
      grad(s, a) = (up - down) / (2.0 * options.step);
    }
  }
  return grad;
}

}  // namespace rapc
