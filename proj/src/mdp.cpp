#include "rapc/mdp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rapc/errors.hpp"

namespace rapc {

Vector FiniteMdp::start_distribution() const {
  if (initial.size() > 0) return initial;
  Vector d = Vector::Zero(static_cast<Eigen::Index>(n_states));
  std::size_t interior = 0;
  for (std::size_t s = 0; s < n_states; ++s) interior += is_boundary(s) ? 0 : 1;
  if (interior == 0) return Vector::Constant(static_cast<Eigen::Index>(n_states), 1.0 / n_states);
  for (std::size_t s = 0; s < n_states; ++s)
    if (!is_boundary(s)) d[s] = 1.0 / static_cast<double>(interior);
  return d;
}

std::string ValidationReport::summary() const {
  if (ok()) return "ok";
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].message;
  }
  return os.str();
}

ValidationReport validate(const FiniteMdp& mdp) {
  ValidationReport report;
  auto add = [&](Violation::Kind kind, std::size_t s, std::size_t a, double value,
                 std::string msg) {
    report.violations.push_back({kind, s, a, value, std::move(msg)});
  };
  const std::size_t ns = mdp.n_states;
  const std::size_t na = mdp.n_actions;
  if (ns == 0 || na == 0) {
    add(Violation::Kind::kDimension, 0, 0, 0.0, "n_states and n_actions must be positive");
    return report;
  }
  const auto ins = static_cast<Eigen::Index>(ns);
  const auto ina = static_cast<Eigen::Index>(na);
  if (mdp.transition.size() != ns * na * ns || mdp.cost.rows() != ins || mdp.cost.cols() != ina ||
      mdp.target_mask.size() != ns || mdp.failure_mask.size() != ns ||
      mdp.g_values.size() != ins || mdp.h_values.size() != ins ||
      (mdp.initial.size() != 0 && mdp.initial.size() != ins)) {
    add(Violation::Kind::kDimension, 0, 0, 0.0, "array dimensions do not match n_states/n_actions");
    return report;
  }

  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      double sum = 0.0;
      for (std::size_t n = 0; n < ns; ++n) {
        const double p = mdp.prob(s, a, n);
        if (!(p >= 0.0) || !std::isfinite(p)) {
          std::ostringstream os;
          os << "transition(" << s << "," << a << "," << n << ") = " << p << " is not a probability";
          add(Violation::Kind::kNegativeProbability, s, a, p, os.str());
        }
        sum += p;
      }
      if (!(std::abs(sum - 1.0) <= kStochasticTol)) {
        std::ostringstream os;
        os.precision(17);
        os << "transition row (state " << s << ", action " << a << ") sums to " << sum
           << ", deficit " << 1.0 - sum;
        add(Violation::Kind::kRowSum, s, a, 1.0 - sum, os.str());
      }
      const double c = mdp.cost(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      if (!std::isfinite(c)) {
        std::ostringstream os;
        os << "cost(" << s << "," << a << ") is not finite";
        add(Violation::Kind::kCost, s, a, c, os.str());
      }
    }
  }

  const double m = mdp.big_m;
  if (!(m > 0.0) || !std::isfinite(m)) {
    add(Violation::Kind::kBigM, 0, 0, m, "big_m must be positive and finite");
  }
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) {
    std::ostringstream os;
    os << "gamma = " << mdp.gamma << " must lie in the open interval (0, 1)";
    add(Violation::Kind::kGamma, 0, 0, mdp.gamma, os.str());
  }

  for (std::size_t s = 0; s < ns; ++s) {
    const auto is = static_cast<Eigen::Index>(s);
    if (mdp.target_mask[s] && mdp.failure_mask[s]) {
      add(Violation::Kind::kMaskOverlap, s, 0, 0.0,
          "state " + std::to_string(s) + " is in both the target and the failure set");
    }
    const double g = mdp.g_values[is];
    const double h = mdp.h_values[is];
    const bool g_ok = mdp.target_mask[s] ? g == -m : (g > 0.0 && std::isfinite(g));
    if (!g_ok) {
      std::ostringstream os;
      os << "g(" << s << ") = " << g << (mdp.target_mask[s] ? " must equal -M on the target set"
                                                            : " must be positive off the target set");
      add(Violation::Kind::kTargetShaping, s, 0, g, os.str());
    }
    const bool h_ok = mdp.failure_mask[s] ? h == m : h == -m;
    if (!h_ok) {
      std::ostringstream os;
      os << "h(" << s << ") = " << h << (mdp.failure_mask[s] ? " must equal M on the failure set"
                                                             : " must equal -M off the failure set");
      add(Violation::Kind::kFailureShaping, s, 0, h, os.str());
    }
  }

  if (mdp.initial.size() > 0) {
    double sum = 0.0;
    bool nonneg = true;
    for (Eigen::Index s = 0; s < mdp.initial.size(); ++s) {
      nonneg = nonneg && mdp.initial[s] >= 0.0;
      sum += mdp.initial[s];
    }
    if (!nonneg || !(std::abs(sum - 1.0) <= kStochasticTol)) {
      add(Violation::Kind::kInitialDistribution, 0, 0, 1.0 - sum,
          "initial distribution must be nonnegative and sum to 1");
    }
  }
  return report;
}

void require_valid(const FiniteMdp& mdp) {
  const auto report = validate(mdp);
  if (!report.ok()) throw ValidationError("invalid MDP: " + report.summary());
}

std::pair<Vector, Vector> default_shaping(const std::vector<bool>& target_mask,
                                          const std::vector<bool>& failure_mask, double big_m,
                                          double g_off_target) {
  if (!(g_off_target > 0.0)) throw std::invalid_argument("g_off_target must be positive");
  if (!(big_m > 0.0)) throw std::invalid_argument("big_m must be positive");
  if (target_mask.size() != failure_mask.size())
    throw std::invalid_argument("target and failure masks differ in length");
  const auto n = static_cast<Eigen::Index>(target_mask.size());
  Vector g(n), h(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    if (target_mask[s] && failure_mask[s])
      throw std::invalid_argument("target and failure sets must be disjoint");
    g[s] = target_mask[s] ? -big_m : g_off_target;
    h[s] = failure_mask[s] ? big_m : -big_m;
  }
  return {std::move(g), std::move(h)};
}

void apply_default_shaping(FiniteMdp& mdp, double g_off_target) {
  auto [g, h] = default_shaping(mdp.target_mask, mdp.failure_mask, mdp.big_m,
                                g_off_target > 0.0 ? g_off_target : mdp.big_m);
  mdp.g_values = std::move(g);
  mdp.h_values = std::move(h);
}

TabularPolicy uniform_policy(std::size_t n_states, std::size_t n_actions) {
  return {Matrix::Constant(static_cast<Eigen::Index>(n_states),
                           static_cast<Eigen::Index>(n_actions), 1.0 / n_actions)};
}

TabularPolicy softmax_policy(const Matrix& logits) {
  if (!logits.allFinite()) throw std::invalid_argument("softmax_policy: logits must be finite");
  TabularPolicy policy{Matrix(logits.rows(), logits.cols())};
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const double top = logits.row(s).maxCoeff();
    auto row = policy.probs.row(s);
    row = (logits.row(s).array() - top).exp().matrix();
    row /= row.sum();
  }
  return policy;
}

TabularPolicy deterministic_policy(const std::vector<std::size_t>& actions, std::size_t n_actions) {
  TabularPolicy policy{Matrix::Zero(static_cast<Eigen::Index>(actions.size()),
                                    static_cast<Eigen::Index>(n_actions))};
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] >= n_actions) throw std::invalid_argument("deterministic_policy: action out of range");
    policy.probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(actions[s])) = 1.0;
  }
  return policy;
}

void validate_policy(const TabularPolicy& policy, const FiniteMdp& mdp) {
  if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions) {
    throw ValidationError("policy shape " + std::to_string(policy.n_states()) + "x" +
                          std::to_string(policy.n_actions()) + " does not match the MDP");
  }
  for (Eigen::Index s = 0; s < policy.probs.rows(); ++s) {
    double sum = 0.0;
    for (Eigen::Index a = 0; a < policy.probs.cols(); ++a) {
      const double p = policy.probs(s, a);
      if (!(p >= 0.0) || !std::isfinite(p))
        throw ValidationError("policy row " + std::to_string(s) + " has a negative entry");
      sum += p;
    }
    if (!(std::abs(sum - 1.0) <= kStochasticTol)) {
      std::ostringstream os;
      os.precision(17);
      os << "policy row " << s << " sums to " << sum;
      throw ValidationError(os.str());
    }
  }
}

Matrix induced_transition(const FiniteMdp& mdp, const TabularPolicy& policy) {
  const auto ns = static_cast<Eigen::Index>(mdp.n_states);
  Matrix p = Matrix::Zero(ns, ns);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double w = policy.probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      if (w == 0.0) continue;
      const auto row = mdp.next_distribution(s, a);
      for (std::size_t n = 0; n < mdp.n_states; ++n) p(s, n) += w * row[n];
    }
  }
  return p;
}

Matrix expected_next_values(const FiniteMdp& mdp, const ValueTable& v) {
  Matrix out(static_cast<Eigen::Index>(mdp.n_states), static_cast<Eigen::Index>(mdp.n_actions));
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto row = mdp.next_distribution(s, a);
      double acc = 0.0;
      for (std::size_t n = 0; n < mdp.n_states; ++n) acc += row[n] * v[static_cast<Eigen::Index>(n)];
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = acc;
    }
  }
  return out;
}

}  // namespace rapc
