#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include "rapc/bellman.hpp"
#include "rapc/csv.hpp"
#include "rapc/envs.hpp"
#include "rapc/errors.hpp"
#include "rapc/mdp_io.hpp"
#include "rapc/onpolicy.hpp"
#include "rapc/oracle.hpp"
#include "rapc/rapcpo.hpp"
#include "rapc/rng.hpp"

namespace rapc::cli {

namespace {

using Idx = Eigen::Index;

Idx ix(std::size_t i) { return static_cast<Idx>(i); }

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") out << text;
  else write_file(path, text);
}

Cell parse_cell(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("cell \"" + text + "\" must be written row,col");
  try {
    return {std::stoul(text.substr(0, comma)), std::stoul(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ConfigError("cell \"" + text + "\" must be written row,col");
  }
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

TabularPolicy policy_or_uniform(const std::string& path, const FiniteMdp& mdp) {
  TabularPolicy policy =
      path.empty() ? uniform_policy(mdp.n_states, mdp.n_actions) : load_policy(read_file(path));
  validate_policy(policy, mdp);
  return policy;
}

std::string basis(const FiniteMdp& mdp, const TabularPolicy& policy, const std::string& flags) {
  return dump_mdp(mdp) + dump_policy(policy) + flags;
}

/// Seed range "a..b" (inclusive) or a single seed.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) return {std::stoull(text)};
    const std::uint64_t lo = std::stoull(text.substr(0, dots));
    const std::uint64_t hi = std::stoull(text.substr(dots + 2));
    if (hi < lo) throw ConfigError("seed range \"" + text + "\" is empty");
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  } catch (const std::logic_error&) {
    throw ConfigError("seeds must be written a..b or as one integer");
  }
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const auto dot = path.rfind('.');
  const auto slash = path.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + suffix;
  return path.substr(0, dot) + suffix + path.substr(dot);
}

struct OracleColumns {
  std::vector<double> p_ra;
  std::vector<std::optional<double>> phi;
};

/// Reads the p_ra and phi columns of an `oracle` CSV.
OracleColumns read_oracle_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  OracleColumns cols;
  long p_col = -1, phi_col = -1, state_col = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line, ',');
    if (header.empty()) {
      header = fields;
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "p_ra") p_col = static_cast<long>(i);
        if (header[i] == "phi") phi_col = static_cast<long>(i);
        if (header[i] == "state") state_col = static_cast<long>(i);
      }
      if (p_col < 0 || phi_col < 0 || state_col < 0)
        throw ConfigError("oracle csv: needs state, p_ra and phi columns");
      continue;
    }
    if (fields.size() != header.size()) throw ConfigError("oracle csv: ragged row");
    if (std::stoul(fields[static_cast<std::size_t>(state_col)]) != cols.p_ra.size())
      throw ConfigError("oracle csv: states out of order");
    cols.p_ra.push_back(std::stod(fields[static_cast<std::size_t>(p_col)]));
    const std::string& phi = fields[static_cast<std::size_t>(phi_col)];
    cols.phi.push_back(phi.empty() ? std::nullopt : std::optional<double>(std::stod(phi)));
  }
  return cols;
}

// ---------------------------------------------------------------- gen-env

struct GenEnvOptions {
  std::string out;
  double gamma = 0.99;
  double big_m = 1.0;
  // chain
  std::size_t length = 3;
  // grid
  std::size_t width = 4, height = 4;
  double slip = 0.0;
  std::string preset, layout, start;
  std::vector<std::string> targets, holes;
  std::vector<double> step_cost;
  // random
  std::uint64_t seed = 0;
  std::size_t states = 8, actions = 3, n_targets = 1, n_failures = 1;
  double concentration = 1.0;
};

void add_common_env(CLI::App* cmd, GenEnvOptions& o) {
  cmd->add_option("--gamma", o.gamma, "discount factor in (0, 1)");
  cmd->add_option("--big-m", o.big_m, "signal magnitude M > 0");
  cmd->add_option("--out", o.out, "output path (default stdout)");
}

// ------------------------------------------------------------------ train

struct TrainOptions {
  std::string mode = "tabular";
  std::string mdp, config, out, policy_out, seeds;
  std::uint64_t seed = 1;
  std::optional<double> p;
  std::optional<long> episodes;
  std::optional<double> lambda, clip;
  bool no_cost_term = false;
};

struct TrainRun {
  TrainReport report;
  std::string csv;
};

TrainRun run_training(const TrainOptions& o, const FiniteMdp& mdp, std::uint64_t seed) {
  TrainRun run;
  if (o.mode == "tabular") {
    TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_train_config(read_file(o.config));
    if (o.p) cfg.p = *o.p;
    if (o.episodes) cfg.episodes = *o.episodes;
    if (o.no_cost_term) cfg.use_cost_term = false;
    if (o.lambda || o.clip) throw ConfigError("--lambda and --clip apply to --mode onpolicy");
    cfg.validate();
    run.report = train(mdp, cfg, seed);
  } else if (o.mode == "onpolicy") {
    OnPolicyConfig cfg = o.config.empty() ? OnPolicyConfig{} : load_onpolicy_config(read_file(o.config));
    if (o.p) cfg.p = *o.p;
    if (o.episodes) cfg.iterations = *o.episodes;
    if (o.lambda) cfg.lambda = *o.lambda;
    if (o.clip) cfg.clip_epsilon = *o.clip;
    if (o.no_cost_term) cfg.use_cost_term = false;
    cfg.validate();
    run.report = train_onpolicy(mdp, cfg, seed);
  } else {
    throw ConfigError("--mode must be tabular or onpolicy");
  }
  run.csv = report_csv(run.report);
  return run;
}

void warn_a3(const TrainReport& report, std::ostream& err) {
  for (const auto& c : report.checkpoints)
    if (c.a3_violations > 0)
      err << "note: seed " << report.seed << " iter " << c.iteration << ": " << c.a3_violations
          << " feasible state(s) miss the strict margin\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reach-avoid certificates and RAPCPO training on finite MDPs", "rapc"};
  app.require_subcommand(1);
  std::function<void()> action;

  // gen-env
  GenEnvOptions env;
  auto* gen = app.add_subcommand("gen-env", "write an MDP config");
  gen->require_subcommand(1);
  auto* chain = gen->add_subcommand("chain", "deterministic chain ending in the target");
  chain->add_option("--length", env.length, "number of states (>= 2)");
  add_common_env(chain, env);
  chain->callback([&] {
    action = [&] { emit(env.out, dump_mdp(make_chain(env.length, env.gamma, env.big_m)), out); };
  });

  auto* grid = gen->add_subcommand("grid", "slippery gridworld");
  grid->set_help_flag("--help", "print this help and exit");
  auto* w_opt = grid->add_option("--w", env.width, "width");
  auto* h_opt = grid->add_option("--h", env.height, "height");
  auto* slip_opt = grid->add_option("--slip", env.slip, "slip probability in [0, 1)");
  grid->add_option("--preset", env.preset, "frozenlake4 or cliff5")
      ->check(CLI::IsMember({"frozenlake4", "cliff5"}));
  grid->add_option("--layout", env.layout, "rows of S/G/H/. separated by '/'");
  grid->add_option("--target", env.targets, "target cell row,col (repeatable)");
  grid->add_option("--hole", env.holes, "hole cell row,col (repeatable)");
  grid->add_option("--start", env.start, "start cell row,col");
  grid->add_option("--step-cost", env.step_cost, "stage cost of up, down, left, right")->expected(4);
  auto* grid_gamma = grid->add_option("--gamma", env.gamma, "discount factor in (0, 1)");
  grid->add_option("--big-m", env.big_m, "signal magnitude M > 0");
  grid->add_option("--out", env.out, "output path (default stdout)");
  grid->callback([&, w_opt, h_opt, slip_opt, grid_gamma] {
    action = [&, w_opt, h_opt, slip_opt, grid_gamma] {
      GridSpec spec;
      if (!env.preset.empty()) {
        spec = env.preset == "frozenlake4" ? frozenlake4_spec() : cliff5_spec();
        if (slip_opt->count()) spec.slip_prob = env.slip;
        if (grid_gamma->count()) spec.gamma = env.gamma;
      } else if (!env.layout.empty()) {
        spec = grid_from_layout(split(env.layout, '/'), env.slip, env.gamma);
      } else {
        if (!w_opt->count() || !h_opt->count()) throw ConfigError("gen-env grid needs --preset, --layout, or --w and --h");
        spec.width = env.width;
        spec.height = env.height;
        spec.slip_prob = env.slip;
        spec.gamma = env.gamma;
        for (const auto& t : env.targets) spec.target_cells.push_back(parse_cell(t));
        for (const auto& t : env.holes) spec.hole_cells.push_back(parse_cell(t));
        if (!env.start.empty()) spec.start_cell = parse_cell(env.start);
      }
      spec.big_m = env.big_m;
      if (!env.step_cost.empty()) std::copy(env.step_cost.begin(), env.step_cost.end(), spec.step_cost.begin());
      try {
        emit(env.out, dump_mdp(make_gridworld(spec)), out);
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
    };
  });

  auto* random = gen->add_subcommand("random", "seeded random MDP");
  random->add_option("--seed", env.seed, "generator seed");
  random->add_option("--states", env.states, "number of states");
  random->add_option("--actions", env.actions, "number of actions");
  random->add_option("--targets", env.n_targets, "number of target states");
  random->add_option("--failures", env.n_failures, "number of failure states");
  random->add_option("--concentration", env.concentration, "Dirichlet concentration > 0");
  add_common_env(random, env);
  random->callback([&] {
    action = [&] {
      emit(env.out,
           dump_mdp(make_random_mdp(env.seed, env.states, env.actions, env.n_targets, env.n_failures,
                                    env.concentration, env.gamma, env.big_m)),
           out);
    };
  });

  // oracle
  std::string mdp_path, policy_path, out_path, occupancy_kind = "discounted", absorbing = "zero";
  auto* oracle = app.add_subcommand("oracle", "exact per-state quantities of a fixed policy");
  oracle->add_option("--mdp", mdp_path, "MDP config")->required();
  oracle->add_option("--policy", policy_path, "policy file (default uniform)");
  oracle->add_option("--out", out_path, "output CSV (default stdout)");
  oracle->add_option("--occupancy", occupancy_kind, "discounted or stationary")
      ->check(CLI::IsMember({"discounted", "stationary"}));
  oracle->add_option("--absorbing-cost", absorbing, "zero or model")->check(CLI::IsMember({"zero", "model"}));
  oracle->callback([&] {
    action = [&] {
      const FiniteMdp mdp = load_mdp(read_file(mdp_path));
      const TabularPolicy policy = policy_or_uniform(policy_path, mdp);
      const ValueTable p = reach_avoid_prob(mdp, policy);
      const ValueTable v = indicator_value(mdp, policy, mdp.gamma);
      const CompensationTable phi = compensation_exact(mdp, policy);
      const ValueTable vc =
          discounted_cost(mdp, policy, absorbing == "zero" ? AbsorbingCost::kZero : AbsorbingCost::kModel);
      const Vector occ = occupancy(mdp, policy, mdp.start_distribution(),
                                   occupancy_kind == "discounted" ? OccupancyKind::kDiscounted
                                                                  : OccupancyKind::kStationary);
      CsvWriter csv({"state", "p_ra", "v_gamma", "phi", "v_cost", "occupancy", "defined_flag"});
      for (std::size_t s = 0; s < mdp.n_states; ++s) {
        csv.cell(s).cell(p[ix(s)]).cell(v[ix(s)]);
        if (phi.defined(s)) csv.cell(*phi.values[s]);
        else csv.blank();
        csv.cell(vc[ix(s)]).cell(occ[ix(s)]).cell(phi.defined(s));
        csv.end_row();
      }
      emit(out_path, csv.str(stable_hash(basis(mdp, policy, "oracle " + occupancy_kind + " " + absorbing))), out);
    };
  });

  // certify
  double p_threshold = 0.5, tol = 1e-10;
  std::size_t sweep = 0, max_states = 20, max_actions = 4;
  std::uint64_t seed = 1;
  auto* certify_cmd = app.add_subcommand("certify", "certificate bound, p_hat, and feasible set");
  auto* certify_mdp = certify_cmd->add_option("--mdp", mdp_path, "MDP config");
  certify_cmd->add_option("--policy", policy_path, "policy file (default uniform)");
  certify_cmd->add_option("--p", p_threshold, "threshold p in (0, 1)");
  certify_cmd->add_option("--tol", tol, "fixed-point tolerance");
  certify_cmd->add_option("--out", out_path, "output CSV (default stdout)");
  auto* sweep_opt = certify_cmd->add_option(
      "--sweep", sweep, "check soundness on this many random MDPs with random softmax policies");
  certify_cmd->add_option("--seed", seed, "sweep seed");
  certify_cmd->add_option("--max-states", max_states, "largest sweep MDP");
  certify_cmd->add_option("--max-actions", max_actions, "most actions in a sweep MDP");
  sweep_opt->excludes(certify_mdp);
  certify_cmd->callback([&] {
    action = [&] {
      if (sweep > 0) {
        if (max_states < 3 || max_actions < 1) throw ConfigError("--max-states must be >= 3 and --max-actions >= 1");
        CsvWriter csv({"instance", "state", "v_gh", "bound", "p_ra", "margin"});
        for (std::size_t i = 0; i < sweep; ++i) {
          Rng rng = Rng::substream(seed, i);
          const std::size_t ns = 3 + rng.uniform_index(max_states - 2);
          const std::size_t na = 1 + rng.uniform_index(max_actions);
          const FiniteMdp mdp = make_random_mdp(rng.next_u64(), ns, na, 1, 1 + rng.uniform_index(ns - 2), 0.5);
          Matrix logits(ix(ns), ix(na));
          for (Idx s = 0; s < logits.rows(); ++s)
            for (Idx a = 0; a < logits.cols(); ++a) logits(s, a) = 2.0 * rng.normal();
          const TabularPolicy policy = softmax_policy(logits);
          const ValueTable v = solve_fixed_point(mdp, policy, tol).values;
          const ValueTable bound = certificate_bound(v, mdp.big_m);
          const ValueTable p = reach_avoid_prob(mdp, policy);
          for (std::size_t s = 0; s < ns; ++s) {
            csv.cell(i).cell(s).cell(v[ix(s)]).cell(bound[ix(s)]).cell(p[ix(s)]).cell(p[ix(s)] - bound[ix(s)]);
            csv.end_row();
          }
        }
        std::ostringstream key;
        key << "certify-sweep " << sweep << ' ' << seed << ' ' << max_states << ' ' << max_actions << ' '
            << format_real(tol);
        emit(out_path, csv.str(stable_hash(key.str())), out);
        return;
      }
      if (mdp_path.empty()) throw ConfigError("certify needs --mdp or --sweep");
      const FiniteMdp mdp = load_mdp(read_file(mdp_path));
      const TabularPolicy policy = policy_or_uniform(policy_path, mdp);
      CertifyOptions opts;
      opts.tol = tol;
      const CertificateReport r = certify(mdp, policy, p_threshold, opts);
      CsvWriter csv({"state", "v_gh", "bound", "phi_used", "p_hat_raw", "p_hat_clipped", "feasible"});
      for (std::size_t s = 0; s < mdp.n_states; ++s) {
        csv.cell(s).cell(r.value_table[ix(s)]).cell(r.bound[ix(s)]).cell(r.phi_used[ix(s)])
            .cell(r.p_hat.raw[ix(s)]).cell(r.p_hat.clipped[ix(s)]).cell(static_cast<bool>(r.feasible_mask[s]));
        csv.end_row();
      }
      const std::string flags = "certify " + format_real(p_threshold) + " " + format_real(tol);
      emit(out_path, csv.str(stable_hash(basis(mdp, policy, flags))), out);
    };
  });

  // train
  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "train a policy and write the checkpoint report");
  train_cmd->add_option("--mode", tr.mode, "tabular or onpolicy")->check(CLI::IsMember({"tabular", "onpolicy"}));
  train_cmd->add_option("--mdp", tr.mdp, "MDP config")->required();
  train_cmd->add_option("--config", tr.config, "training config (JSON)");
  train_cmd->add_option("--p", tr.p, "threshold p in [0, 1)");
  train_cmd->add_option("--seed", tr.seed, "training seed");
  train_cmd->add_option("--seeds", tr.seeds, "seed range a..b; reports are merged by seed");
  train_cmd->add_option("--episodes", tr.episodes, "episodes (tabular) or iterations (onpolicy)");
  train_cmd->add_option("--lambda", tr.lambda, "GAE lambda (onpolicy)");
  train_cmd->add_option("--clip", tr.clip, "clip ratio epsilon (onpolicy)");
  train_cmd->add_flag("--no-cost-term", tr.no_cost_term, "drop the cost gradient (reach-only baseline)");
  train_cmd->add_option("--out", tr.out, "report CSV (default stdout)");
  train_cmd->add_option("--policy-out", tr.policy_out, "final policy file");
  train_cmd->callback([&] {
    action = [&] {
      const FiniteMdp mdp = load_mdp(read_file(tr.mdp));
      if (tr.seeds.empty()) {
        const TrainRun run = run_training(tr, mdp, tr.seed);
        warn_a3(run.report, err);
        emit(tr.out, run.csv, out);
        if (!tr.policy_out.empty()) write_file(tr.policy_out, dump_policy(run.report.final_policy()));
        return;
      }
      CsvWriter merged({"seed", "iter", "p_ra_exact", "v_cost_exact", "feasible_count", "p_hat_mean", "grad_norm",
                        "residual_gh", "residual_c"});
      std::string hashes;
      for (std::uint64_t s : parse_seeds(tr.seeds)) {
        const TrainRun run = run_training(tr, mdp, s);
        warn_a3(run.report, err);
        hashes += run.report.config_hash;
        for (const auto& c : run.report.checkpoints) {
          merged.cell(static_cast<std::int64_t>(s)).cell(static_cast<std::int64_t>(c.iteration)).cell(c.p_ra_exact)
              .cell(c.v_cost_exact).cell(c.feasible_count).cell(c.p_hat_mean).cell(c.grad_norm)
              .cell(c.residual_gh).cell(c.residual_c);
          merged.end_row();
        }
        const std::string tag = ".seed" + std::to_string(s);
        if (!tr.out.empty() && tr.out != "-") write_file(with_suffix(tr.out, tag), run.csv);
        if (!tr.policy_out.empty())
          write_file(with_suffix(tr.policy_out, tag), dump_policy(run.report.final_policy()));
      }
      emit(tr.out, merged.str(stable_hash(hashes)), out);
    };
  });

  // ablate
  std::string oracle_csv, train_config;
  bool train_first = false;
  double min_p = 0.0;
  auto* ablate = app.add_subcommand("ablate", "calibration of p_hat against the unnormalized bound");
  ablate->add_option("--mdp", mdp_path, "MDP config")->required();
  ablate->add_option("--policy", policy_path, "policy file (default uniform)");
  ablate->add_option("--oracle", oracle_csv, "take p_ra and phi from an oracle CSV");
  ablate->add_flag("--train", train_first, "train a tabular policy first (see --config, --seed)");
  ablate->add_option("--config", train_config, "training config for --train");
  ablate->add_option("--seed", seed, "training seed for --train");
  ablate->add_option("--min-p", min_p, "summary uses states with P(RA) above this");
  ablate->add_option("--out", out_path, "output CSV (default stdout)");
  ablate->callback([&] {
    action = [&] {
      const FiniteMdp mdp = load_mdp(read_file(mdp_path));
      TabularPolicy policy;
      std::string flags = "ablate " + format_real(min_p);
      if (train_first) {
        if (!policy_path.empty()) throw ConfigError("--train and --policy are exclusive");
        const TrainConfig cfg = train_config.empty() ? TrainConfig{} : load_train_config(read_file(train_config));
        policy = train(mdp, cfg, seed).final_policy();
        flags += " train " + std::to_string(seed) + dump_train_config(cfg);
      } else {
        policy = policy_or_uniform(policy_path, mdp);
      }
      const ValueTable v = solve_fixed_point(mdp, policy).values;
      const ValueTable bound = certificate_bound(v, mdp.big_m);
      std::vector<double> p_true(mdp.n_states);
      std::vector<std::optional<double>> phi(mdp.n_states);
      if (!oracle_csv.empty()) {
        OracleColumns cols = read_oracle_csv(read_file(oracle_csv));
        if (cols.p_ra.size() != mdp.n_states) throw ValidationError("oracle csv: state count does not match the MDP");
        p_true = cols.p_ra;
        phi = cols.phi;
      } else {
        const ValueTable p = reach_avoid_prob(mdp, policy);
        const CompensationTable c = compensation_exact(mdp, policy);
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
          p_true[s] = p[ix(s)];
          phi[s] = c.values[s];
        }
      }
      CsvWriter csv({"state", "p_true", "est_no_phi", "est_with_phi", "phi_defined"});
      double err_no = 0.0, err_with = 0.0;
      std::size_t used = 0;
      for (std::size_t s = 0; s < mdp.n_states; ++s) {
        csv.cell(s).cell(p_true[s]).cell(bound[ix(s)]);
        double with_phi = 0.0;
        if (phi[s]) {
          with_phi = std::clamp(-v[ix(s)] / (mdp.big_m * std::max(*phi[s], kPhiFloor)), 0.0, 1.0);
          csv.cell(with_phi);
        } else {
          csv.blank();
        }
        csv.cell(phi[s].has_value());
        csv.end_row();
        if (!mdp.is_boundary(s) && p_true[s] > min_p && phi[s]) {
          err_no += std::abs(bound[ix(s)] - p_true[s]);
          err_with += std::abs(with_phi - p_true[s]);
          ++used;
        }
      }
      csv.cell("mae").blank();
      if (used > 0) csv.cell(err_no / static_cast<double>(used)).cell(err_with / static_cast<double>(used));
      else csv.blank().blank();
      csv.cell(used);
      csv.end_row();
      emit(out_path, csv.str(stable_hash(basis(mdp, policy, flags))), out);
    };
  });

  std::vector<std::string> argv_rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(argv_rest.begin(), argv_rest.end());
  try {
    app.parse(argv_rest);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInvalid;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const ConvergenceError& e) {
    err << "numerical failure: " << e.what() << " (residual " << format_real(e.residual()) << " after "
        << e.iterations() << " sweeps)\n";
    return kExitNumerical;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

}  // namespace rapc::cli
