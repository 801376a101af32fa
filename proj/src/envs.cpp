#include "rapc/envs.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rapc/rng.hpp"

namespace rapc {

namespace {

FiniteMdp empty_mdp(std::size_t ns, std::size_t na, double gamma, double big_m) {
  FiniteMdp mdp;
  mdp.n_states = ns;
  mdp.n_actions = na;
  mdp.transition.assign(ns * na * ns, 0.0);
  mdp.cost = Matrix::Zero(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(na));
  mdp.target_mask.assign(ns, false);
  mdp.failure_mask.assign(ns, false);
  mdp.gamma = gamma;
  mdp.big_m = big_m;
  return mdp;
}

double& prob_ref(FiniteMdp& mdp, std::size_t s, std::size_t a, std::size_t next) {
  return mdp.transition[(s * mdp.n_actions + a) * mdp.n_states + next];
}

void make_absorbing(FiniteMdp& mdp, std::size_t s) {
  for (std::size_t a = 0; a < mdp.n_actions; ++a) {
    for (std::size_t n = 0; n < mdp.n_states; ++n) prob_ref(mdp, s, a, n) = 0.0;
    prob_ref(mdp, s, a, s) = 1.0;
    mdp.cost(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = 0.0;
  }
}

}  // namespace

FiniteMdp make_chain(std::size_t length, double gamma, double big_m) {
  if (length < 2) throw std::invalid_argument("make_chain: length must be at least 2");
  FiniteMdp mdp = empty_mdp(length, 1, gamma, big_m);
  for (std::size_t s = 0; s + 1 < length; ++s) {
    prob_ref(mdp, s, 0, s + 1) = 1.0;
    mdp.cost(static_cast<Eigen::Index>(s), 0) = 1.0;
  }
  mdp.target_mask[length - 1] = true;
  make_absorbing(mdp, length - 1);
  apply_default_shaping(mdp);
  mdp.initial = Vector::Zero(static_cast<Eigen::Index>(length));
  mdp.initial[0] = 1.0;
  require_valid(mdp);
  return mdp;
}

void validate_grid_spec(const GridSpec& spec) {
  if (spec.width == 0 || spec.height == 0) throw std::invalid_argument("grid: empty grid");
  if (!(spec.slip_prob >= 0.0 && spec.slip_prob < 1.0))
    throw std::invalid_argument("grid: slip_prob must lie in [0, 1)");
  auto inside = [&](const Cell& c) { return c.row < spec.height && c.col < spec.width; };
  for (const auto& c : spec.target_cells)
    if (!inside(c)) throw std::invalid_argument("grid: target cell outside the grid");
  for (const auto& c : spec.hole_cells) {
    if (!inside(c)) throw std::invalid_argument("grid: hole cell outside the grid");
    for (const auto& t : spec.target_cells)
      if (c == t) throw std::invalid_argument("grid: a cell is both target and hole");
  }
  if (!inside(spec.start_cell)) throw std::invalid_argument("grid: start cell outside the grid");
  for (double c : spec.step_cost)
    if (!std::isfinite(c)) throw std::invalid_argument("grid: step cost must be finite");
}

FiniteMdp make_gridworld(const GridSpec& spec) {
  validate_grid_spec(spec);
  const std::size_t ns = spec.width * spec.height;
  FiniteMdp mdp = empty_mdp(ns, 4, spec.gamma, spec.big_m);
  for (const auto& c : spec.target_cells) mdp.target_mask[spec.state_of(c)] = true;
  for (const auto& c : spec.hole_cells) mdp.failure_mask[spec.state_of(c)] = true;

  // Row/col offsets for up, down, left, right.
  constexpr int kDr[4] = {-1, 1, 0, 0};
  constexpr int kDc[4] = {0, 0, -1, 1};
  // Perpendicular directions of each action.
  constexpr std::size_t kPerp[4][2] = {{2, 3}, {2, 3}, {0, 1}, {0, 1}};

  auto move = [&](std::size_t r, std::size_t c, std::size_t dir) {
    const long nr = static_cast<long>(r) + kDr[dir];
    const long nc = static_cast<long>(c) + kDc[dir];
    if (nr < 0 || nc < 0 || nr >= static_cast<long>(spec.height) || nc >= static_cast<long>(spec.width))
      return r * spec.width + c;
    return static_cast<std::size_t>(nr) * spec.width + static_cast<std::size_t>(nc);
  };

  for (std::size_t r = 0; r < spec.height; ++r) {
    for (std::size_t c = 0; c < spec.width; ++c) {
      const std::size_t s = r * spec.width + c;
      if (mdp.is_boundary(s)) {
        make_absorbing(mdp, s);
        continue;
      }
      for (std::size_t a = 0; a < 4; ++a) {
        prob_ref(mdp, s, a, move(r, c, a)) += 1.0 - spec.slip_prob;
        prob_ref(mdp, s, a, move(r, c, kPerp[a][0])) += 0.5 * spec.slip_prob;
        prob_ref(mdp, s, a, move(r, c, kPerp[a][1])) += 0.5 * spec.slip_prob;
        mdp.cost(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = spec.step_cost[a];
      }
    }
  }
  apply_default_shaping(mdp);
  mdp.initial = Vector::Zero(static_cast<Eigen::Index>(ns));
  mdp.initial[static_cast<Eigen::Index>(spec.state_of(spec.start_cell))] = 1.0;
  require_valid(mdp);
  return mdp;
}

GridSpec grid_from_layout(const std::vector<std::string>& rows, double slip_prob, double gamma,
                          double big_m) {
  if (rows.empty()) throw std::invalid_argument("grid layout: no rows");
  GridSpec spec;
  spec.height = rows.size();
  spec.width = rows.front().size();
  spec.slip_prob = slip_prob;
  spec.gamma = gamma;
  spec.big_m = big_m;
  bool have_start = false;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != spec.width) throw std::invalid_argument("grid layout: ragged rows");
    for (std::size_t c = 0; c < spec.width; ++c) {
      switch (rows[r][c]) {
        case 'S':
          if (have_start) throw std::invalid_argument("grid layout: more than one start cell");
          spec.start_cell = {r, c};
          have_start = true;
          break;
        case 'G': spec.target_cells.push_back({r, c}); break;
        case 'H': spec.hole_cells.push_back({r, c}); break;
        case '.':
        case 'F': break;
        default: throw std::invalid_argument(std::string("grid layout: unknown cell '") + rows[r][c] + "'");
      }
    }
  }
  if (!have_start) throw std::invalid_argument("grid layout: no start cell");
  validate_grid_spec(spec);
  return spec;
}

GridSpec frozenlake4_spec() {
  return grid_from_layout({"SFFF", "FHFH", "FFFH", "HFFG"}, 0.2, 0.99);
}

GridSpec cliff5_spec() {
  return grid_from_layout({".....", ".....", ".....", ".....", "SHHHG"}, 0.1, 0.99);
}

FiniteMdp make_random_mdp(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                          std::size_t n_target, std::size_t n_failure, double concentration,
                          double gamma, double big_m) {
  if (n_states == 0 || n_actions == 0) throw std::invalid_argument("random mdp: empty model");
  if (n_target + n_failure >= n_states)
    throw std::invalid_argument("random mdp: n_target + n_failure must be below n_states");
  if (!(concentration > 0.0)) throw std::invalid_argument("random mdp: concentration must be positive");

  Rng rng(seed);
  FiniteMdp mdp = empty_mdp(n_states, n_actions, gamma, big_m);
  std::vector<double> weights(n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double total = 0.0;
      for (auto& w : weights) total += (w = rng.gamma(concentration));
      if (!(total > 0.0)) {  // every draw underflowed; fall back to a point mass
        weights.assign(n_states, 0.0);
        weights[rng.uniform_index(n_states)] = total = 1.0;
      }
      for (std::size_t n = 0; n < n_states; ++n) prob_ref(mdp, s, a, n) = weights[n] / total;
      mdp.cost(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = rng.uniform();
    }
  }

  std::vector<std::size_t> order(n_states);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n_states - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);
  for (std::size_t k = 0; k < n_target; ++k) mdp.target_mask[order[k]] = true;
  for (std::size_t k = n_target; k < n_target + n_failure; ++k) mdp.failure_mask[order[k]] = true;
  for (std::size_t s = 0; s < n_states; ++s) {
    if (!mdp.is_boundary(s)) continue;
    // Absorbing, but keep the sampled cost row: terminal costs are the
    // oracle's choice to zero out or not.
    for (std::size_t a = 0; a < n_actions; ++a) {
      for (std::size_t n = 0; n < n_states; ++n) prob_ref(mdp, s, a, n) = 0.0;
      prob_ref(mdp, s, a, s) = 1.0;
    }
  }

  // Dirichlet rows are normalized by division; push the residual rounding
  // error into the largest entry so rows sum to 1 well inside tolerance.
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      std::size_t top = 0;
      for (std::size_t n = 0; n < n_states; ++n) {
        sum += prob_ref(mdp, s, a, n);
        if (prob_ref(mdp, s, a, n) > prob_ref(mdp, s, a, top)) top = n;
      }
      prob_ref(mdp, s, a, top) += 1.0 - sum;
    }
  }

  apply_default_shaping(mdp);
  mdp.initial = mdp.start_distribution();
  require_valid(mdp);
  return mdp;
}

}  // namespace rapc
