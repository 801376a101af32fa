#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rapc/mdp.hpp"

namespace rapc {

/// Deterministic chain s0 -> s1 -> ... -> s_{length-1} with a single action.
/// The last state is the (absorbing) target; the failure set is empty.
/// Unit cost per step, zero cost on the absorbing target.
FiniteMdp make_chain(std::size_t length, double gamma, double big_m = 1.0);

struct Cell {
  std::size_t row = 0;
  std::size_t col = 0;

  bool operator==(const Cell&) const = default;
};

enum class GridAction : std::size_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

/// FrozenLake-style gridworld. States are row-major, s = row * width + col.
struct GridSpec {
  std::size_t width = 4;
  std::size_t height = 4;
  std::vector<Cell> target_cells;
  std::vector<Cell> hole_cells;
  Cell start_cell;
  double slip_prob = 0.0;
  /// Stage cost per action (up, down, left, right) outside the absorbing cells.
  std::array<double, 4> step_cost{1.0, 1.0, 1.0, 1.0};
  double gamma = 0.99;
  double big_m = 1.0;

  std::size_t state_of(Cell c) const { return c.row * width + c.col; }
};

/// Throws std::invalid_argument if the spec is malformed.
void validate_grid_spec(const GridSpec& spec);

/// Intended move with probability 1 - slip, each perpendicular move with
/// slip / 2; moves off the grid stay put. Target and hole cells absorb.
/// The initial distribution is a point mass on the start cell.
FiniteMdp make_gridworld(const GridSpec& spec);

/// Builds a spec from rows of 'S' (start), 'G' (target), 'H' (hole), '.' or 'F'.
GridSpec grid_from_layout(const std::vector<std::string>& rows, double slip_prob, double gamma,
                          double big_m = 1.0);

/// The 4x4 FrozenLake map (SFFF / FHFH / FFFH / HFFG) with slip 0.2.
GridSpec frozenlake4_spec();

/// 5x5 map with slip 0.1: start bottom-left, goal bottom-right, and a row of
/// holes between them along the bottom edge.
GridSpec cliff5_spec();

/// Random MDP: transition rows ~ symmetric Dirichlet(concentration), target
/// and failure states drawn disjointly and made absorbing, costs ~ U[0, 1].
/// The initial distribution is uniform over the remaining states. Identical
/// arguments give bit-identical MDPs.
FiniteMdp make_random_mdp(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                          std::size_t n_target, std::size_t n_failure, double concentration,
                          double gamma = 0.99, double big_m = 1.0);

}  // namespace rapc
