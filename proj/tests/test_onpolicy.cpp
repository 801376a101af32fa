#include <doctest.h>

#include <cmath>

#include "rapc/bellman.hpp"
#include "rapc/envs.hpp"
#include "rapc/errors.hpp"
#include "rapc/onpolicy.hpp"
#include "test_support.hpp"

using namespace rapc;
using rapc::test::ix;

namespace {

double clamp_manual(double h, double g, double gamma, double v) { return std::max(h, std::min(g, gamma * v)); }

/// A random segment with arbitrary signals and snapshot values.
RolloutSegment random_segment(Rng& rng, std::size_t n, double gamma) {
  RolloutSegment seg;
  seg.gamma = gamma;
  std::size_t state = 0;
  for (std::size_t t = 0; t < n; ++t) {
    SegmentStep s;
    s.state = state;
    s.action = rng.uniform_index(2);
    s.cost = rng.uniform();
    s.g_value = rng.uniform(0.2, 1.0);
    s.h_value = rng.uniform(-1.0, -0.2);
    s.next_state = state + 1;
    s.behavior_prob = 0.5;
    seg.steps.push_back(s);
    state = s.next_state;
  }
  for (std::size_t t = 0; t <= n; ++t) {
    seg.values.push_back(rng.uniform(-1.0, 1.0));
    seg.cost_values.push_back(rng.uniform(0.0, 3.0));
  }
  return seg;
}

}  // namespace

TEST_CASE("k_step_target") {
  Rng rng(3);
  const RolloutSegment seg = random_segment(rng, 6, 0.95);
  SUBCASE("k = 1 is one clamp") {
    const auto& s = seg.steps[2];
    CHECK(k_step_target(seg, 2, 1, seg.values) == clamp_manual(s.h_value, s.g_value, 0.95, seg.values[3]));
  }
  SUBCASE("k = 3 is three nested clamps") {
    const auto& st = seg.steps;
    const double inner = clamp_manual(st[3].h_value, st[3].g_value, 0.95, seg.values[4]);
    const double mid = clamp_manual(st[2].h_value, st[2].g_value, 0.95, inner);
    const double outer = clamp_manual(st[1].h_value, st[1].g_value, 0.95, mid);
    CHECK(k_step_target(seg, 1, 3, seg.values) == doctest::Approx(outer).epsilon(1e-15));
  }
  SUBCASE("failure state clamps at M for every k") {
    RolloutSegment f = seg;
    f.steps[0].h_value = 1.0;
    f.steps[0].g_value = 1.0;
    for (std::size_t k = 1; k <= 6; ++k) CHECK(k_step_target(f, 0, k, f.values) == 1.0);
  }
  CHECK_THROWS_AS(k_step_target(seg, 4, 3, seg.values), std::out_of_range);
  CHECK_THROWS_AS(k_step_target(seg, 0, 0, seg.values), std::out_of_range);
}

TEST_CASE("gae_advantage") {
  Rng rng(9);
  SUBCASE("values at the exact fixed point give zero advantage") {
    const FiniteMdp mdp = make_chain(6, 0.9);
    const Vector v = solve_fixed_point(mdp, uniform_policy(6, 1), 1e-14).values;
    RolloutSegment seg;
    seg.gamma = 0.9;
    for (std::size_t t = 0; t < 5; ++t)
      seg.steps.push_back({t, 0, 1.0, mdp.g_values[ix(t)], mdp.h_values[ix(t)], t + 1, 1.0});
    for (std::size_t t = 0; t <= 5; ++t) {
      seg.values.push_back(v[ix(t)]);
      seg.cost_values.push_back(0.0);
    }
    for (double a : gae_advantage(seg, 0.95)) CHECK(std::abs(a) <= 1e-12);
  }
  SUBCASE("lambda = 0 gives the one-step advantage") {
    const RolloutSegment seg = random_segment(rng, 5, 0.9);
    const std::vector<double> a = gae_advantage(seg, 0.0);
    for (std::size_t t = 0; t < 5; ++t)
      CHECK(a[t] == doctest::Approx(k_step_target(seg, t, 1, seg.values) - seg.values[t]).epsilon(1e-14));
  }
  SUBCASE("lambda = 0.95 matches brute-force enumeration") {
    const RolloutSegment seg = random_segment(rng, 5, 0.9);
    for (std::size_t k_max : {std::size_t{0}, std::size_t{2}}) {
      const std::vector<double> a = gae_advantage(seg, 0.95, k_max);
      for (std::size_t t = 0; t < 5; ++t) {
        const std::size_t depth = std::min<std::size_t>(k_max == 0 ? 5 : k_max, 5 - t);
        double num = 0.0, den = 0.0;
        for (std::size_t k = 1; k <= depth; ++k) {
          const double w = std::pow(0.95, static_cast<double>(k - 1));
          num += w * (k_step_target(seg, t, k, seg.values) - seg.values[t]);
          den += w;
        }
        CHECK(a[t] == doctest::Approx(num / den).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS(gae_advantage(random_segment(rng, 3, 0.9), 1.0));
}

TEST_CASE("cost_gae") {
  Rng rng(21);
  SUBCASE("zero costs and values") {
    RolloutSegment seg = random_segment(rng, 4, 0.9);
    for (auto& s : seg.steps) s.cost = 0.0;
    std::fill(seg.cost_values.begin(), seg.cost_values.end(), 0.0);
    for (double a : cost_gae(seg, 0.95)) CHECK(a == 0.0);
  }
  SUBCASE("single step is the TD residual") {
    const RolloutSegment seg = random_segment(rng, 1, 0.9);
    const double delta = seg.steps[0].cost + 0.9 * seg.cost_values[1] - seg.cost_values[0];
    CHECK(cost_gae(seg, 0.95)[0] == doctest::Approx(delta));
  }
  SUBCASE("5 steps against direct enumeration") {
    const RolloutSegment seg = random_segment(rng, 5, 0.9);
    const std::vector<double> a = cost_gae(seg, 0.95);
    for (std::size_t t = 0; t < 5; ++t) {
      double sum = 0.0;
      for (std::size_t j = t; j < 5; ++j) {
        const double delta = seg.steps[j].cost + 0.9 * seg.cost_values[j + 1] - seg.cost_values[j];
        sum += std::pow(0.9 * 0.95, static_cast<double>(j - t)) * delta;
      }
      CHECK(a[t] == doctest::Approx(sum).epsilon(1e-12));
    }
  }
}

TEST_CASE("RolloutSegment validation") {
  Rng rng(1);
  RolloutSegment seg = random_segment(rng, 3, 0.9);
  seg.validate();
  RolloutSegment broken = seg;
  broken.steps[1].next_state = 9;
  CHECK_THROWS(broken.validate());
  broken = seg;
  broken.steps[0].behavior_prob = 0.0;
  CHECK_THROWS(broken.validate());
  broken = seg;
  broken.values.pop_back();
  CHECK_THROWS(broken.validate());
}

TEST_CASE("clipped_loss") {
  CHECK(clipped_loss(1.5, 1.0, 0.2) == doctest::Approx(1.5));
  CHECK(clipped_loss(1.0, -3.0, 0.2) == -3.0);
  CHECK(clipped_loss(1.0, 0.7, 0.2) == 0.7);
  CHECK(clipped_loss(0.5, -2.0, 0.2) == doctest::Approx(-1.0));
  CHECK(clipped_loss(0.5, 2.0, 0.2) == doctest::Approx(1.6));
  CHECK(clipped_loss_slope(1.5, 1.0, 0.2) == 1.0);
  CHECK(clipped_loss_slope(0.5, 2.0, 0.2) == 0.0);
  CHECK(clipped_loss_slope(1.5, -1.0, 0.2) == 0.0);
  CHECK(clipped_loss_slope(1.0, -1.0, 0.2) == -1.0);
  CHECK_THROWS(clipped_loss(0.0, 1.0, 0.2));
  CHECK_THROWS(clipped_loss(1.0, 1.0, 1.0));
}

TEST_CASE("partition_minibatch") {
  std::vector<PpoSample> batch;
  for (std::size_t i = 0; i < 10; ++i) batch.push_back({i, 0, 0.5, 0.0, 0.0});
  std::vector<bool> mask(10, false);
  for (std::size_t i : {1, 4, 5, 8}) mask[i] = true;
  const Partition p = partition_minibatch(batch, mask);
  CHECK(p.feasible.size() == 4);
  CHECK(p.infeasible.size() == 6);
  const Partition all = partition_minibatch(batch, std::vector<bool>(10, true));
  CHECK(all.feasible.size() == 10);
  CHECK(all.infeasible.empty());
  const Partition none = partition_minibatch({}, mask);
  CHECK(none.feasible.empty());
  CHECK(none.infeasible.empty());
}

TEST_CASE("ppo_update") {
  PolicyParams params = PolicyParams::zeros(3, 2);
  params.logits << 0.2, -0.1, 0.0, 0.5, -1.0, 1.0;
  const TabularPolicy pi = params.policy();
  const ValueTable phi = ValueTable::Constant(3, 0.5);
  PpoOptions opts;

  SUBCASE("zero advantages leave parameters unchanged") {
    Partition b;
    b.feasible = {{0, 0, pi.probs(0, 0), 0.0, 0.0}};
    b.infeasible = {{1, 1, pi.probs(1, 1), 0.0, 0.0}};
    CHECK(ppo_update(params, b, phi, opts).logits == params.logits);
  }
  SUBCASE("empty B0 and no conflict: plain sum of clipped gradients") {
    Partition b;
    b.feasible = {{0, 0, pi.probs(0, 0), 1.0, 1.0}, {2, 1, pi.probs(2, 1), 0.5, 2.0}};
    PpoGradients g;
    const PolicyParams next = ppo_update(params, b, phi, opts, &g);
    CHECK_FALSE(g.projected);
    CHECK(g.g_r_out.isZero());
    CHECK((g.direction - (g.g_r_in + g.g_c_in)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((next.logits - (params.logits - opts.step * g.direction)).cwiseAbs().maxCoeff() <= 1e-15);
    // Ratio 1, so each sample contributes A / N * grad log pi with A scaled by 1 / phi.
    Vector score = -pi.probs.row(0).transpose();
    score[0] += 1.0;
    CHECK(g.g_r_in(0, 0) == doctest::Approx(0.5 * (1.0 / 0.5) * score[0]));
  }
  SUBCASE("clipped samples contribute nothing") {
    Partition b;
    // Ratio 0.5 with A > 0 is on the clipped branch of the pessimistic max.
    b.infeasible = {{2, 0, 2.0 * pi.probs(2, 0), 1.0, 0.0}};
    PpoGradients g;
    ppo_update(params, b, phi, opts, &g);
    CHECK(g.direction.isZero());
  }
  SUBCASE("normalize_outside switch") {
    Partition b;
    b.infeasible = {{1, 0, pi.probs(1, 0), 1.0, 0.0}};
    PpoGradients with, without;
    ppo_update(params, b, phi, opts, &with);
    opts.normalize_outside = false;
    ppo_update(params, b, phi, opts, &without);
    CHECK((with.g_r_out - 2.0 * without.g_r_out).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("updates stay in the box") {
    Partition b;
    b.feasible = {{0, 0, pi.probs(0, 0), -50.0, 0.0}};
    opts.step = 100.0;
    CHECK(ppo_update(params, b, phi, opts).logits.cwiseAbs().maxCoeff() <= params.box_radius);
  }
}

TEST_CASE("OnPolicyConfig") {
  OnPolicyConfig c;
  c.validate();
  c.lambda = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = OnPolicyConfig{};
  c.clip_epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = OnPolicyConfig{};
  c.lambda = 0.9;
  c.rollout_length = 64;
  c.normalize_outside = false;
  const OnPolicyConfig back = load_onpolicy_config(dump_onpolicy_config(c));
  CHECK(dump_onpolicy_config(back) == dump_onpolicy_config(c));
  CHECK(back.lambda == 0.9);
  CHECK_FALSE(back.normalize_outside);
  CHECK_THROWS_AS(load_onpolicy_config("{\"lamda\": 0.9}"), ConfigError);
}

TEST_CASE("train_onpolicy is deterministic") {
  const FiniteMdp mdp = make_gridworld(frozenlake4_spec());
  OnPolicyConfig c;
  c.iterations = 6;
  c.rollout_length = 64;
  c.minibatch_size = 32;
  c.epochs_per_batch = 2;
  c.checkpoint_every = 3;
  const TrainReport a = train_onpolicy(mdp, c, 2);
  CHECK(report_csv(a) == report_csv(train_onpolicy(mdp, c, 2)));
  CHECK(a.checkpoints.size() == 2);
  CHECK(a.final_params.logits.cwiseAbs().maxCoeff() <= c.box_radius);
  CHECK(std::isfinite(a.checkpoints.back().p_ra_exact));
}
