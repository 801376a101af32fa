#pragma once

#include <string>
#include <string_view>

#include "rapc/mdp.hpp"

namespace rapc {

/// Parses and validates an MDP config document.
///
/// The document is a JSON object with fields `n_states`, `n_actions`,
/// `gamma`, `big_m`, `transition` ([state][action] rows of n_states
/// probabilities), `cost` ([state][action]), `target` and `failure` (state
/// index lists), and optionally `g_override`, `h_override` (per-state) and
/// `initial` (a distribution over states). Without `g_override`, g is -M on
/// the target set and M elsewhere.
///
/// Throws ConfigError on malformed text (with the line number) or a missing
/// or mistyped field (naming the field), ValidationError on invariant
/// violations.
FiniteMdp load_mdp(std::string_view config_text);

/// Serializes `mdp` to config text. Numbers carry 17 significant digits, so
/// load_mdp(dump_mdp(m)) reproduces m bit for bit.
std::string dump_mdp(const FiniteMdp& mdp);

/// Policy file: `{"n_states": S, "n_actions": A, "probs": [[...], ...]}`.
TabularPolicy load_policy(std::string_view text);
std::string dump_policy(const TabularPolicy& policy);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace rapc
