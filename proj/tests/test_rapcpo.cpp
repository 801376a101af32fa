#include <doctest.h>

#include <cmath>

#include "rapc/envs.hpp"
#include "rapc/errors.hpp"
#include "rapc/oracle.hpp"
#include "rapc/rapcpo.hpp"
#include "test_support.hpp"

using namespace rapc;
using rapc::test::Idx;
using rapc::test::ix;

namespace {

Matrix row(std::initializer_list<double> xs) {
  Matrix m(1, static_cast<Idx>(xs.size()));
  Idx i = 0;
  for (double x : xs) m(0, i++) = x;
  return m;
}

/// One interior state with two actions: action 0 moves to the target,
/// action 1 to the failure state.
FiniteMdp fork_mdp() {
  FiniteMdp mdp;
  mdp.n_states = 3;
  mdp.n_actions = 2;
  mdp.transition.assign(18, 0.0);
  mdp.transition[(0 * 2 + 0) * 3 + 1] = 1.0;
  mdp.transition[(0 * 2 + 1) * 3 + 2] = 1.0;
  for (std::size_t s = 1; s < 3; ++s)
    for (std::size_t a = 0; a < 2; ++a) mdp.transition[(s * 2 + a) * 3 + s] = 1.0;
  mdp.cost = Matrix::Ones(3, 2);
  mdp.target_mask = {false, true, false};
  mdp.failure_mask = {false, false, true};
  mdp.gamma = 0.9;
  apply_default_shaping(mdp);
  require_valid(mdp);
  return mdp;
}

}  // namespace

TEST_CASE("td_update_ra_critic clamps at the boundary") {
  const FiniteMdp mdp = rapc::test::one_step_mdp();
  const TabularPolicy pi = uniform_policy(3, 1);
  CriticState c = CriticState::zeros(3, 1);
  c.q_gh.setConstant(0.3);
  td_update_ra_critic(c, make_transition(mdp, 2, 0, 2), pi, 0, 1.0, mdp.gamma);
  CHECK(c.q_gh(2, 0) == mdp.big_m);
  td_update_ra_critic(c, make_transition(mdp, 1, 0, 1), pi, 0, 1.0, mdp.gamma);
  CHECK(c.q_gh(1, 0) == -mdp.big_m);
  // Interior: min{g, gamma q(x', a')} with g = M.
  c.q_gh(1, 0) = -1.0;
  td_update_ra_critic(c, make_transition(mdp, 0, 0, 1), pi, 0, 0.5, mdp.gamma);
  CHECK(c.q_gh(0, 0) == doctest::Approx(0.3 - 0.5 * (0.3 - 0.99 * -1.0)));
}

TEST_CASE("td_update_ra_critic converges on the chain") {
  const FiniteMdp mdp = make_chain(3, 0.99);
  const CriticState c = evaluate_policy_td(mdp, uniform_policy(3, 1), 100000, default_schedule(0.5, 1.0, 0.2), 1);
  CHECK(std::abs(c.q_gh(0, 0) + 0.9801) <= 1e-3);
}

TEST_CASE("td_update_cost_critic") {
  SUBCASE("zero-cost MDP keeps a zero critic") {
    FiniteMdp mdp = make_random_mdp(3, 6, 2, 1, 1, 1.0);
    mdp.cost.setZero();
    const CriticState c = evaluate_policy_td(mdp, uniform_policy(6, 2), 5000, default_schedule(0.5, 1.0, 0.2), 2);
    CHECK(c.q_c.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("chain length 3 converges to 1.99") {
    const FiniteMdp mdp = make_chain(3, 0.99);
    const double exact = discounted_cost(mdp, uniform_policy(3, 1))[0];
    const CriticState c = evaluate_policy_td(mdp, uniform_policy(3, 1), 100000, default_schedule(0.5, 1.0, 0.2), 1);
    CHECK(std::abs(c.q_c(0, 0) - exact) <= 1e-3);
  }
  SUBCASE("done transition has zero continuation") {
    CriticState c = CriticState::zeros(2, 1);
    c.q_c.setConstant(5.0);
    Transition t;
    t.state = 0;
    t.next_state = 1;
    t.cost = 1.0;
    t.done = true;
    td_update_cost_critic(c, t, uniform_policy(2, 1), 0, 1.0, 0.9);
    CHECK(c.q_c(0, 0) == 1.0);
  }
  SUBCASE("expected target averages over the next action") {
    CriticState c = CriticState::zeros(2, 2);
    c.q_c(1, 0) = 2.0;
    c.q_c(1, 1) = 4.0;
    Transition t;
    t.state = 0;
    t.action = 1;
    t.next_state = 1;
    t.cost = 1.0;
    td_update_cost_critic(c, t, uniform_policy(2, 2), 0, 1.0, 0.5, TdTarget::kExpected);
    CHECK(c.q_c(0, 1) == doctest::Approx(1.0 + 0.5 * 3.0));
  }
}

TEST_CASE("phi_regression_update") {
  const double g = 0.99;
  Episode ep;
  ep.steps = {Transition{0, 0, 1.0, 1.0, -1.0, 1, false}, Transition{1, 0, 1.0, 1.0, -1.0, 2, false}};
  SUBCASE("failed and truncated episodes leave phi alone") {
    CriticState c = CriticState::zeros(3, 1, 0.4);
    ep.outcome = EpisodeOutcome::kFailed;
    phi_regression_update(c, ep, 0.5, g);
    ep.outcome = EpisodeOutcome::kTruncated;
    phi_regression_update(c, ep, 0.5, g);
    CHECK(c.phi.isApproxToConstant(0.4));
  }
  SUBCASE("targets are gamma^(T - t)") {
    CriticState c = CriticState::zeros(3, 1, 0.0);
    ep.outcome = EpisodeOutcome::kReached;
    phi_regression_update(c, ep, 1.0, g);
    CHECK(c.phi[0] == doctest::Approx(g * g));
    CHECK(c.phi[1] == doctest::Approx(g));
    CHECK(c.phi[2] == 0.0);
  }
  SUBCASE("repeated chain episodes converge to the exact factor") {
    const FiniteMdp mdp = make_chain(3, g);
    const double exact = *compensation_exact(mdp, uniform_policy(3, 1)).values[0];
    CriticState c = CriticState::zeros(3, 1);
    ep.outcome = EpisodeOutcome::kReached;
    const StepSchedule sched = default_schedule(0.5, 1.0, 1.0);
    for (long l = 0; l < 2000; ++l) phi_regression_update(c, ep, sched.zeta3(l), g);
    CHECK(std::abs(c.phi[0] - exact) <= 1e-3);
  }
}

TEST_CASE("gradient_components") {
  PolicyParams params = PolicyParams::zeros(1, 2);
  CriticState critic = CriticState::zeros(1, 2);
  critic.q_gh << 1.0, -1.0;
  critic.q_c << 2.0, 0.5;
  const std::vector<GradientSample> batch{{0, 0, 1.0}};

  SUBCASE("all states infeasible") {
    const GradientComponents g = gradient_components(params, critic, batch, {false});
    CHECK(g.g_r_in.isZero());
    CHECK(g.g_c_in.isZero());
    CHECK(g.g_r_out(0, 0) == doctest::Approx(0.5));
    CHECK(g.g_r_out(0, 1) == doctest::Approx(-0.5));
  }
  SUBCASE("closed-form score function, uniform policy, q = (1, -1)") {
    // d log pi(0) / d theta = e_0 - pi = (0.5, -0.5).
    for (const auto est : {GradientEstimator::kSampled, GradientEstimator::kAllActions}) {
      const GradientComponents g = gradient_components(params, critic, batch, {true}, kPhiFloor, est);
      CHECK(g.g_r_in(0, 0) == doctest::Approx(0.5));
      CHECK(g.g_r_in(0, 1) == doctest::Approx(-0.5));
      CHECK(g.g_r_out.isZero());
    }
    // All-actions cost term: pi_b (qc_b - sum pi qc) = 0.5 * (+-0.75).
    const GradientComponents g = gradient_components(params, critic, batch, {true}, kPhiFloor, GradientEstimator::kAllActions);
    CHECK(g.g_c_in(0, 0) == doctest::Approx(0.375));
    CHECK(g.g_c_in(0, 1) == doctest::Approx(-0.375));
  }
  SUBCASE("doubling phi halves the RA terms only") {
    params.logits << 0.4, -0.3;
    const std::vector<GradientSample> b2{{0, 0, 0.7}, {0, 1, 1.3}};
    critic.phi << 0.3;
    const GradientComponents a = gradient_components(params, critic, b2, {true});
    critic.phi << 0.6;
    const GradientComponents b = gradient_components(params, critic, b2, {true});
    CHECK((a.g_r_in - 2.0 * b.g_r_in).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((a.g_c_in - b.g_c_in).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("phi below the floor uses the floor") {
    critic.phi << 0.0;
    const GradientComponents g = gradient_components(params, critic, batch, {true}, 0.25);
    CHECK(g.g_r_in(0, 0) == doctest::Approx(0.5 / 0.25));
  }
}

TEST_CASE("symmetric_projection") {
  SUBCASE("conflicting pair") {
    const ProjectionResult r = symmetric_projection(row({1, 0}), row({-1, 1}), 1e-12);
    CHECK(r.applied);
    CHECK(r.g_r(0, 0) == doctest::Approx(0.5));
    CHECK(r.g_r(0, 1) == doctest::Approx(0.5));
    CHECK(std::abs(r.g_c(0, 0)) <= 1e-11);
    CHECK(r.g_c(0, 1) == doctest::Approx(1.0));
    CHECK(std::abs((r.g_r.array() * row({-1, 1}).array()).sum()) <= 1e-11);
    CHECK(std::abs((r.g_c.array() * row({1, 0}).array()).sum()) <= 1e-11);
  }
  SUBCASE("non-conflicting pair passes through") {
    const ProjectionResult r = symmetric_projection(row({1, 2}), row({3, -1}), 1e-12);
    CHECK_FALSE(r.applied);
    CHECK(r.g_r == row({1, 2}));
    CHECK(r.g_c == row({3, -1}));
  }
  SUBCASE("zero cost gradient") {
    const ProjectionResult r = symmetric_projection(row({1, 2}), row({0, 0}), 1e-12);
    CHECK_FALSE(r.applied);
    CHECK(r.g_r == row({1, 2}));
  }
  CHECK_THROWS(symmetric_projection(row({1}), row({1}), 0.0));
}

TEST_CASE("mixed_direction") {
  CHECK(mixed_direction(row({1, 2}), row({3, 1}), row({0, 0})) == row({4, 3}));
  const Matrix d = mixed_direction(row({1, 0}), row({-1, 1}), row({0, 0}), 1e-12);
  CHECK(d(0, 0) == doctest::Approx(0.5));
  CHECK(d(0, 1) == doctest::Approx(1.5));
  CHECK(mixed_direction(row({0, 0}), row({0, 0}), row({0, 0})).isZero());
  CHECK(mixed_direction(row({1, 0}), row({0, 1}), row({2, 2})) == row({3, 3}));
}

TEST_CASE("project_params") {
  PolicyParams p = PolicyParams::zeros(1, 3, 5.0);
  p.logits << 1.0, -4.0, 3.0;
  CHECK(project_params(p).logits == p.logits);
  p.logits << 10.0, -7.0, 2.0;
  const PolicyParams q = project_params(p);
  CHECK(q.logits == row({5.0, -5.0, 2.0}));
  CHECK(project_params(q).logits == q.logits);
}

TEST_CASE("default_schedule") {
  const StepSchedule s = default_schedule(0.5, 0.3, 0.1);
  CHECK(s.zeta1(0) == 0.5);
  CHECK(s.zeta2(0) == 0.3);
  CHECK(s.zeta3(0) == 0.1);
  for (long k : {1L, 10L, 1000L, 100000L})
    CHECK(s.zeta2(k) / s.zeta1(k) == doctest::Approx((0.3 / 0.5) * std::pow(1.0 + k, -0.2)));
  double sq = 0.0;
  for (long k = 0; k <= 1000000; ++k) sq += s.zeta1(k) * s.zeta1(k);
  // sum_k a^2 (1+k)^-1.1 < a^2 (1 + 1/0.1)
  CHECK(sq < 0.25 * 11.0);
  const StepSchedule slow = default_schedule(0.5, 0.3, 0.1, 10.0);
  CHECK(slow.zeta1(10) == doctest::Approx(0.5 / std::pow(2.0, 0.55)));
}

TEST_CASE("policy_gradient_exact") {
  SUBCASE("all-target MDP has zero gradient") {
    FiniteMdp mdp = make_chain(2, 0.9);
    mdp.target_mask = {true, true};
    mdp.transition = {1, 0, 0, 1};
    apply_default_shaping(mdp);
    mdp.initial = Vector::Constant(2, 0.5);
    PolicyParams p = PolicyParams::zeros(2, 1);
    CHECK(policy_gradient_exact(mdp, p, GradientObjective::kReachAvoid).isZero());
  }
  SUBCASE("saturated deterministic-optimal policy has a tiny gradient") {
    const FiniteMdp mdp = fork_mdp();
    PolicyParams p = PolicyParams::zeros(3, 2);
    p.logits(0, 0) = 10.0;
    p.logits(0, 1) = -10.0;
    ExactGradientOptions o;
    o.rho = Vector::Unit(3, 0);
    const Matrix g = policy_gradient_exact(mdp, p, GradientObjective::kReachAvoid, o);
    CHECK(g.norm() < 1e-6);
    p.logits.setZero();
    CHECK(policy_gradient_exact(mdp, p, GradientObjective::kReachAvoid, o).norm() > 0.1);
  }
  SUBCASE("fork MDP closed form") {
    // V(0) = 0.9 (pi_1 - pi_0) = 0.9 tanh(d / 2) with d = theta_1 - theta_0.
    const FiniteMdp mdp = fork_mdp();
    PolicyParams p = PolicyParams::zeros(3, 2);
    p.logits(0, 0) = 0.3;
    ExactGradientOptions o;
    o.rho = Vector::Unit(3, 0);
    const Matrix g = policy_gradient_exact(mdp, p, GradientObjective::kReachAvoid, o);
    const double d = -0.3;
    const double slope = 0.9 * 0.5 / std::pow(std::cosh(d / 2.0), 2);
    CHECK(g(0, 1) == doctest::Approx(slope).epsilon(1e-8));
    CHECK(g(0, 0) == doctest::Approx(-slope).epsilon(1e-8));
    CHECK(exact_objective(mdp, p, GradientObjective::kReachAvoid, o.rho) == doctest::Approx(0.9 * std::tanh(d / 2.0)));
  }
}

TEST_CASE("TrainConfig") {
  TrainConfig cfg;
  cfg.validate();
  cfg.p = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.episodes = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.a2 = 3.5;
  cfg.estimator = GradientEstimator::kSampled;
  cfg.gamma = 0.9;
  const TrainConfig back = load_train_config(dump_train_config(cfg));
  CHECK(dump_train_config(back) == dump_train_config(cfg));
  CHECK(back.a2 == 3.5);
  CHECK(back.estimator == GradientEstimator::kSampled);
  CHECK_THROWS_AS(load_train_config("{\"episodez\": 3}"), ConfigError);
  CHECK(load_train_config("{\"episodes\": 7}").episodes == 7);
}

TEST_CASE("train is deterministic and keeps logits in the box") {
  const FiniteMdp mdp = make_gridworld(frozenlake4_spec());
  TrainConfig cfg;
  cfg.episodes = 60;
  cfg.checkpoint_every = 20;
  cfg.a2 = 50.0;
  cfg.box_radius = 2.0;
  const TrainReport a = train(mdp, cfg, 4);
  const TrainReport b = train(mdp, cfg, 4);
  CHECK(report_csv(a) == report_csv(b));
  CHECK(a.checkpoints.size() == 3);
  CHECK(a.checkpoints.back().iteration == 60);
  CHECK(a.final_params.logits.cwiseAbs().maxCoeff() <= 2.0);
  CHECK(report_csv(train(mdp, cfg, 5)) != report_csv(a));
  TrainConfig wrong = cfg;
  wrong.gamma = 0.5;
  CHECK_THROWS_AS(train(mdp, wrong, 1), ConfigError);
}
